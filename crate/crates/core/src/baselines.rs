//! Classical Bayes-correlated benchmark and its welfare under smallest play.
//!
//! The optimistic designer only needs recommended cooperators to be willing
//! when everyone else complies, so each state is weighted by the
//! full-cooperation gain `G(1, θ) = b − c + λ` instead of the potential.
//! Its realized counterpart replays the same invitations and lets agents
//! pick the smallest equilibrium.

use serde::Serialize;

use crate::designer::{balance, to_sequential_policy, DesignOptions};
use crate::env::{ensure_compatible, Environment, WelfareSpec};
use crate::equilibrium::{evaluate_policy_realized, EvaluationMode, PolicyRef, PublicEvent};
use crate::error::{Error, Result};
use crate::lp::{solve, LinearProgram, LpStatus, Sense, VarKey};
use crate::scalar::Scalar;
use crate::seqpolicy::{check_policy, InvitationSequence, SequentialPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BaselineKind {
    BceOptimistic,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BceOptions {
    /// Solve the classical-obedience LP over cooperation counts instead of
    /// the all-or-none closed form. Only matters for non-convex welfare.
    pub count_lp: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselinePolicy<T = f64> {
    pub kind: BaselineKind,
    pub labels: Vec<String>,
    /// Probability of recommending cooperation to everyone, per state.
    pub invite_mass: Vec<T>,
    pub predicted_welfare: T,
    /// State where the recommendation is mixed, if any state is invited.
    pub mixing_state: Option<usize>,
    pub mixing_weight: T,
    /// Lowest-ranked state invited with certainty.
    pub invite_threshold: Option<usize>,
    /// Per-state distribution over recommended cooperation counts when the
    /// count LP was used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count_mass: Option<Vec<Vec<T>>>,
}

impl<T: Scalar> BaselinePolicy<T> {
    pub fn invite_threshold_label(&self) -> Option<&str> {
        self.invite_threshold.map(|s| self.labels[s].as_str())
    }

    fn all_defect(env: &Environment<T>) -> Self {
        Self {
            kind: BaselineKind::BceOptimistic,
            labels: env.labels().to_vec(),
            invite_mass: vec![T::zero(); env.n_states()],
            predicted_welfare: T::zero(),
            mixing_state: None,
            mixing_weight: T::zero(),
            invite_threshold: None,
            count_mass: None,
        }
    }

    /// The recommendations as a policy: everyone invited in uniformly random
    /// order, or nobody.
    pub fn to_sequential_policy(&self, env: &Environment<T>) -> SequentialPolicy<T> {
        let mut policy = SequentialPolicy::new(self.labels.clone());
        match &self.count_mass {
            Some(rows) => {
                for (s, row) in rows.iter().enumerate() {
                    for (k, &m) in row.iter().enumerate() {
                        if m > T::zero() {
                            policy.add(s, InvitationSequence::full(k), m);
                        }
                    }
                }
            }
            None => {
                for (s, &q) in self.invite_mass.iter().enumerate() {
                    policy.set_uniform_full(s, q);
                    policy.set(s, InvitationSequence::empty(), T::one() - q);
                }
            }
        }
        debug_assert_eq!(policy.n_states(), env.n_states());
        policy
    }
}

pub fn design_bce_optimistic<T: Scalar>(env: &Environment<T>, welfare: &WelfareSpec<T>) -> Result<BaselinePolicy<T>> {
    design_bce_optimistic_with(env, welfare, BceOptions::default())
}

pub fn design_bce_optimistic_with<T: Scalar>(
    env: &Environment<T>,
    welfare: &WelfareSpec<T>,
    options: BceOptions,
) -> Result<BaselinePolicy<T>> {
    ensure_compatible(env, welfare)?;
    if options.count_lp {
        return count_lp_baseline(env, welfare);
    }
    let gains: Vec<T> = (0..env.n_states()).map(|s| env.full_gain(s)).collect();
    let values: Vec<T> = (0..env.n_states()).map(|s| welfare.full_value(s)).collect();
    let b = match balance(env.prior(), &gains, &values, false) {
        Ok(b) => b,
        Err(Error::Infeasible(_)) => return Ok(BaselinePolicy::all_defect(env)),
        Err(e) => return Err(e),
    };
    let predicted_welfare = (0..env.n_states())
        .map(|s| env.prior()[s] * b.invite[s] * values[s])
        .sum();
    let invite_threshold = b
        .order
        .iter()
        .copied()
        .find(|&s| b.invite[s] >= T::one() - T::feas_tol());
    Ok(BaselinePolicy {
        kind: BaselineKind::BceOptimistic,
        labels: env.labels().to_vec(),
        invite_mass: b.invite,
        predicted_welfare,
        mixing_state: Some(b.threshold),
        mixing_weight: b.mixing,
        invite_threshold,
        count_mass: None,
    })
}

/// Classical obedience over symmetric recommendations "`k` of `N` agents
/// cooperate": recommended agents see `k − 1` cooperating others, the rest
/// see `k`.
fn count_lp_baseline<T: Scalar>(env: &Environment<T>, welfare: &WelfareSpec<T>) -> Result<BaselinePolicy<T>> {
    let n = env.n_agents();
    let n_states = env.n_states();
    let width = n_states * (n + 1);
    let mut keys = Vec::with_capacity(width);
    let mut objective = Vec::with_capacity(width);
    for s in 0..n_states {
        for k in 0..=n {
            keys.push(VarKey {
                state: s,
                sequence: InvitationSequence::full(k),
            });
            objective.push(env.prior()[s] * welfare.value_at(s, k));
        }
    }
    let mut lp = LinearProgram::new(env.labels().to_vec(), keys, objective)?;
    let nn = T::of_usize(n);
    let mut coop = vec![T::zero(); width];
    let mut non = vec![T::zero(); width];
    for s in 0..n_states {
        let mut feas = vec![T::zero(); width];
        for k in 0..=n {
            let j = s * (n + 1) + k;
            feas[j] = T::one();
            let mu = env.prior()[s];
            if k > 0 {
                coop[j] = mu * T::of_usize(k) / nn * env.gain(s, k - 1);
            }
            if k < n {
                non[j] = mu * T::of_usize(n - k) / nn * env.gain(s, k);
            }
        }
        lp.add_eq(format!("feas_{s}"), feas, T::one())?;
    }
    lp.add_ineq("obey_coop", coop, Sense::Ge, T::zero())?;
    lp.add_ineq("obey_defect", non, Sense::Le, T::zero())?;
    let sol = solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::State(format!("classical-obedience LP ended {:?}", sol.status)));
    }
    let rows: Vec<Vec<T>> = (0..n_states)
        .map(|s| sol.primal[s * (n + 1)..(s + 1) * (n + 1)].to_vec())
        .collect();
    Ok(BaselinePolicy {
        kind: BaselineKind::BceOptimistic,
        labels: env.labels().to_vec(),
        invite_mass: rows.iter().map(|r| r[n]).collect(),
        predicted_welfare: sol.value,
        mixing_state: None,
        mixing_weight: T::zero(),
        invite_threshold: None,
        count_mass: Some(rows),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizedBaseline<T = f64> {
    pub welfare: T,
    /// The recommendations, issued privately in random order, already
    /// satisfy sequential obedience; play then follows them.
    pub sequentially_obedient: bool,
    /// Public invitation events, when they had to be evaluated.
    pub events: Vec<PublicEvent<T>>,
}

/// Welfare of the optimistic recommendations when agents coordinate on the
/// smallest equilibrium.
///
/// If the recommendations happen to be sequentially obedient (issued
/// privately in uniformly random order), conservative play still follows
/// them. Otherwise each invitation is treated as a public "invite all" or
/// "invite none" event and agents play the smallest equilibrium under the
/// event posterior.
pub fn evaluate_bce_realized<T: Scalar>(
    bp: &BaselinePolicy<T>,
    env: &Environment<T>,
    welfare: &WelfareSpec<T>,
) -> Result<RealizedBaseline<T>> {
    ensure_compatible(env, welfare)?;
    let policy = bp.to_sequential_policy(env);
    if check_policy(&policy, env, T::feas_tol())?.pass {
        return Ok(RealizedBaseline {
            welfare: policy.expected_welfare(env, welfare)?,
            sequentially_obedient: true,
            events: Vec::new(),
        });
    }
    let ev = evaluate_policy_realized(PolicyRef::Sequential(&policy), env, welfare, EvaluationMode::Public)?;
    Ok(RealizedBaseline {
        welfare: ev.expected_welfare,
        sequentially_obedient: false,
        events: ev.public_events,
    })
}

/// Robust optimum, optimistic prediction and realized baseline for one
/// instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRecord<T = f64> {
    pub cost: T,
    pub robust_welfare: T,
    pub bce_predicted: T,
    pub bce_realized: T,
    pub theta_star: Option<String>,
    pub p_star: Option<T>,
    pub bce_threshold: Option<String>,
    /// `bce_predicted − robust_welfare`.
    pub optimism_gap: T,
    /// `robust_welfare − bce_realized`.
    pub robustness_gain: T,
}

pub const CSV_COLUMNS: [&str; 7] = [
    "cost",
    "robust_welfare",
    "bce_predicted",
    "bce_realized",
    "theta_star",
    "p_star",
    "bce_threshold",
];

impl<T: Scalar> ComparisonRecord<T> {
    /// Fields in [`CSV_COLUMNS`] order; absent values are empty.
    pub fn csv_fields(&self) -> [String; 7] {
        let num = |x: T| format_g10(x.to_f64().unwrap_or(f64::NAN));
        [
            num(self.cost),
            num(self.robust_welfare),
            num(self.bce_predicted),
            num(self.bce_realized),
            self.theta_star.clone().unwrap_or_default(),
            self.p_star.map(num).unwrap_or_default(),
            self.bce_threshold.clone().unwrap_or_default(),
        ]
    }
}

pub fn compare<T: Scalar>(env: &Environment<T>, welfare: &WelfareSpec<T>) -> Result<ComparisonRecord<T>> {
    compare_with(env, welfare, DesignOptions::default(), BceOptions::default())
}

pub fn compare_with<T: Scalar>(
    env: &Environment<T>,
    welfare: &WelfareSpec<T>,
    design_options: DesignOptions,
    bce_options: BceOptions,
) -> Result<ComparisonRecord<T>> {
    let (robust_welfare, theta_star, p_star) = match crate::designer::design_with(env, welfare, design_options) {
        Ok(tp) => {
            debug_assert!(check_policy(&to_sequential_policy(&tp, env), env, T::feas_tol())?.pass);
            (tp.expected_welfare, Some(tp.threshold_label), Some(tp.mixing_weight))
        }
        // only universal defection is implementable
        Err(Error::Infeasible(_)) => (T::zero(), None, None),
        Err(e) => return Err(e),
    };
    let bp = design_bce_optimistic_with(env, welfare, bce_options)?;
    let realized = evaluate_bce_realized(&bp, env, welfare)?;
    Ok(ComparisonRecord {
        cost: env.cost(),
        robust_welfare,
        bce_predicted: bp.predicted_welfare,
        bce_realized: realized.welfare,
        theta_star,
        p_star,
        bce_threshold: bp.invite_threshold_label().map(str::to_owned),
        optimism_gap: bp.predicted_welfare - robust_welfare,
        robustness_gain: robust_welfare - realized.welfare,
    })
}

/// C `%.10g`: ten significant digits, trailing zeros dropped, exponent form
/// outside `[1e-4, 1e10)`.
pub fn format_g10(x: f64) -> String {
    const DIGITS: i32 = 10;
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (DIGITS - 1 - exp) as usize, x)).to_owned()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::StateParams;
    use crate::fixtures::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn case1_baseline_invites_everything() {
        let (env, w) = (case1_env(), case1_welfare());
        let bp = design_bce_optimistic(&env, &w).unwrap();
        assert_eq!(bp.kind, BaselineKind::BceOptimistic);
        assert_abs_diff_eq!(bp.invite_mass[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bp.invite_mass[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bp.predicted_welfare, 9.0, epsilon = 1e-12);
        let realized = evaluate_bce_realized(&bp, &env, &w).unwrap();
        assert!(!realized.sequentially_obedient);
        assert_eq!(realized.welfare, 0.0);
    }

    #[test]
    fn case1_comparison() {
        let rec = compare(&case1_env(), &case1_welfare()).unwrap();
        assert_abs_diff_eq!(rec.robust_welfare, 6.0 + 3.0 * 1.95 / 2.85, epsilon = 1e-12);
        assert_abs_diff_eq!(rec.bce_predicted, 9.0, epsilon = 1e-12);
        assert_eq!(rec.bce_realized, 0.0);
        assert_eq!(rec.theta_star.as_deref(), Some("L"));
        assert_abs_diff_eq!(rec.optimism_gap, 9.0 - rec.robust_welfare, epsilon = 1e-12);
        assert_eq!(rec.csv_fields()[..6], ["2", "8.052631579", "9", "0", "L", "0.6842105263"]);
        assert_eq!(rec.csv_fields()[6], "L");
    }

    #[test]
    fn case2_at_cost_two() {
        let (env, w) = (case2_env(2.0), case2_welfare());
        let bp = design_bce_optimistic(&env, &w).unwrap();
        assert_eq!(bp.invite_threshold_label(), Some("0.28"));
        assert_eq!(bp.mixing_state.map(|s| env.label(s)), Some("0.27"));
        for (s, &q) in bp.invite_mass.iter().enumerate() {
            let theta = (s + 1) as f64 / 100.0;
            if theta > 0.275 {
                assert_eq!(q, 1.0, "state {theta}");
            } else if theta < 0.265 {
                assert_eq!(q, 0.0, "state {theta}");
            }
        }
        let rec = compare(&env, &w).unwrap();
        assert!(rec.robust_welfare > 0.0);
        assert!(rec.bce_predicted > rec.robust_welfare);
        assert_eq!(rec.bce_realized, 0.0);
        assert_eq!(rec.theta_star.as_deref(), Some("0.56"));
    }

    #[test]
    fn case2_low_cost_coincides() {
        let (env, w) = (case2_env(1.0), case2_welfare());
        let rec = compare(&env, &w).unwrap();
        assert_abs_diff_eq!(rec.robust_welfare, rec.bce_predicted, epsilon = 1e-9);
        assert_abs_diff_eq!(rec.bce_realized, rec.bce_predicted, epsilon = 1e-9);
    }

    #[test]
    fn hopeless_state_is_all_defect() {
        let env = Environment::new(3, vec![StateParams::new("x", 1.0, 0.5, 0.2)], 1.0).unwrap();
        let w = WelfareSpec::power(3, vec![4.0], 1.5).unwrap();
        let bp = design_bce_optimistic(&env, &w).unwrap();
        assert_eq!(bp.predicted_welfare, 0.0);
        assert_eq!(bp.invite_threshold, None);
        let rec = compare(&env, &w).unwrap();
        assert_eq!((rec.robust_welfare, rec.bce_predicted, rec.bce_realized), (0.0, 0.0, 0.0));
        assert_eq!(rec.csv_fields(), ["1", "0", "0", "0", "", "", ""].map(String::from));
    }

    #[test]
    fn count_lp_matches_closed_form_on_convex_welfare() {
        for cost in [1.5, 2.0, 2.3] {
            let env = case1_env_with_cost(cost);
            let w = case1_welfare();
            let closed = design_bce_optimistic(&env, &w).unwrap();
            let lp = design_bce_optimistic_with(&env, &w, BceOptions { count_lp: true }).unwrap();
            assert!(lp.predicted_welfare >= closed.predicted_welfare - 1e-9, "cost {cost}");
            assert!(lp.count_mass.is_some());
        }
    }

    #[test]
    fn threshold_ignores_welfare_scale() {
        let env = case2_env(2.0);
        let w = case2_welfare();
        let a = design_bce_optimistic(&env, &w).unwrap();
        let b = design_bce_optimistic(&env, &w.scaled(7.5).unwrap()).unwrap();
        assert_eq!(a.invite_threshold, b.invite_threshold);
        assert_eq!(a.mixing_state, b.mixing_state);
    }

    #[test]
    fn g10_formatting() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (8.052631578947368, "8.052631579"),
            (0.6842105263157895, "0.6842105263"),
            (1234567890123.0, "1.23456789e+12"),
            (0.00001234, "1.234e-05"),
            (0.0001234, "0.0001234"),
            (9999999999.5, "1e+10"),
            (2.95, "2.95"),
            (1e-300, "1e-300"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g10(x), want, "{x}");
        }
    }
}
