//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar the measure algebra and solvers are written against.
///
/// Implemented for `f32` and `f64`. The solver tolerances shipped in
/// [`crate::SolverConfig::default`] assume `f64`; `f32` is useful for the exact
/// measure calculus and for cheap smoke runs.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal; every supported scalar can represent it approximately.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    #[inline]
    fn two_pi() -> Self {
        Self::TAU()
    }

    #[inline]
    fn four_pi() -> Self {
        Self::TAU() + Self::TAU()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `e^t (e^t - 1)` without cancellation for small `t`.
#[inline]
pub(crate) fn exp_expm1<T: Real>(t: T) -> T {
    t.exp() * t.exp_m1()
}
