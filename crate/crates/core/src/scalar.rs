//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the solver is generic over (`f32` or `f64`).
///
/// Tolerances are part of the scalar because the absolute bounds used for
/// double precision are meaningless in single precision.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Prior and belief normalization tolerance.
    fn prior_tol() -> Self;

    /// Feasibility (per-state mass) and default obedience tolerance.
    fn feas_tol() -> Self;

    /// Strict-gain threshold for best responses.
    fn gain_tol() -> Self;

    /// Simplex pivot tolerance.
    fn pivot_tol() -> Self;
}

impl Scalar for f64 {
    fn prior_tol() -> Self {
        1e-12
    }
    fn feas_tol() -> Self {
        1e-9
    }
    fn gain_tol() -> Self {
        1e-12
    }
    fn pivot_tol() -> Self {
        1e-10
    }
}

impl Scalar for f32 {
    fn prior_tol() -> Self {
        1e-5
    }
    fn feas_tol() -> Self {
        1e-5
    }
    fn gain_tol() -> Self {
        1e-6
    }
    fn pivot_tol() -> Self {
        1e-5
    }
}
