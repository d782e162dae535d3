//! Robust information design for binary-action coordination games.
//!
//! A designer privately observes the state and sequentially invites agents
//! to cooperate. The crate computes welfare-optimal invitation policies that
//! implement the designed outcome in the smallest equilibrium, checks
//! sequential obedience, solves the exact LP for small populations and
//! compares against classical Bayes-correlated benchmarks.
//!
//! Everything is generic over the scalar type (`f64` or `f32`); the `*F64`
//! and `*F32` aliases fix it.
//!
//! ```
//! use robustinfo::{check_policy, design, to_sequential_policy, Environment, StateParams, WelfareSpec};
//!
//! let env: Environment = Environment::new(
//!     3,
//!     vec![StateParams::new("L", 0.5, 1.0, 0.1), StateParams::new("H", 0.5, 2.4, 0.5)],
//!     2.0,
//! )?;
//! let welfare = WelfareSpec::power(3, vec![6.0, 12.0], 1.5)?;
//!
//! let tp = design(&env, &welfare)?;
//! assert_eq!(tp.threshold_label, "L");
//! assert!((tp.mixing_weight - 1.95 / 2.85).abs() < 1e-12);
//! let policy = to_sequential_policy(&tp, &env);
//! assert!(check_policy(&policy, &env, 1e-9)?.pass);
//! # Ok::<(), robustinfo::Error>(())
//! ```

pub mod baselines;
pub mod designer;
pub mod env;
pub mod equilibrium;
pub mod error;
pub mod fixtures;
pub mod instances;
pub mod lp;
pub mod scalar;
pub mod seqpolicy;

pub use baselines::{compare, design_bce_optimistic, evaluate_bce_realized, BaselinePolicy, ComparisonRecord};
pub use designer::{design, design_instrumented, design_with, to_sequential_policy, DesignOptions, OpCounts, ThresholdPolicy};
pub use env::{AssumptionReport, Environment, Heterogeneity, StateParams, WelfareKind, WelfareSpec};
pub use equilibrium::{evaluate_policy_realized, smallest_equilibrium, Belief, EquilibriumOutcome, EvaluationMode, PolicyRef};
pub use error::{Error, Result};
pub use lp::{build_lp, extract_policy, kkt_residuals, solve, LinearProgram, LpSolution, LpStatus};
pub use scalar::Scalar;
pub use seqpolicy::{check_policy, InvitationSequence, ObedienceReport, SequentialPolicy};

pub type EnvironmentF64 = Environment<f64>;
pub type EnvironmentF32 = Environment<f32>;
pub type WelfareSpecF64 = WelfareSpec<f64>;
pub type WelfareSpecF32 = WelfareSpec<f32>;
pub type SequentialPolicyF64 = SequentialPolicy<f64>;
pub type SequentialPolicyF32 = SequentialPolicy<f32>;
pub type ThresholdPolicyF64 = ThresholdPolicy<f64>;
pub type ThresholdPolicyF32 = ThresholdPolicy<f32>;
pub type LinearProgramF64 = LinearProgram<f64>;
pub type LinearProgramF32 = LinearProgram<f32>;
pub type BeliefF64 = Belief<f64>;
pub type BeliefF32 = Belief<f32>;
