//! Scalar abstraction for the numerical core.
//!
//! Everything numeric in this crate is generic over [`Real`], which is any
//! IEEE float with the `num-traits` capabilities we need (`f32` or `f64`).
//! The shipped binaries and reports instantiate it as [`crate::Scalar`].

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, used for tabulated constants.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant must convert to scalar")
    }

    /// Lossy conversion to `f64`, used when crossing into reports.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar must convert to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `x^e` with an exact integer-exponent fast path.
///
/// Decay exponents in this crate are often small integers (k = 3, m = 4);
/// repeated multiplication keeps those cases exact and fast, while
/// non-integer exponents fall back to `powf`.
pub fn powr<R: Real>(x: R, e: R) -> R {
    if e == R::zero() {
        return R::one();
    }
    if e.fract() == R::zero() {
        if let Some(i) = e.to_i32() {
            if i.abs() <= 64 {
                return x.powi(i);
            }
        }
    }
    // half-integer exponents through the correctly rounded sqrt
    let half = R::of(0.5);
    if (e - half).fract() == R::zero() && x >= R::zero() {
        if let Some(i) = (e - half).to_i32() {
            if i.abs() <= 64 {
                return x.powi(i) * x.sqrt();
            }
        }
    }
    x.powf(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_powers_are_exact() {
        assert_eq!(powr(6.0_f64, 3.0), 216.0);
        assert_eq!(powr(6.0_f64, 5.0), 7776.0);
        assert_eq!(powr(2.0_f64, -3.0), 0.125);
        assert_eq!(powr(7.0_f64, 0.0), 1.0);
    }

    #[test]
    fn half_integer_exponents_use_sqrt() {
        let v: f64 = powr(6.0, 1.5);
        assert_eq!(v, 6.0 * 6.0_f64.sqrt());
        assert_eq!(powr(4.0_f64, 0.5), 2.0);
        assert_eq!(powr(4.0_f64, -0.5), 0.5);
    }

    #[test]
    fn fractional_exponents_fall_back() {
        let v: f64 = powr(6.0, 2.7);
        assert_eq!(v, 6.0_f64.powf(2.7));
    }

    #[test]
    fn works_for_f32() {
        let v: f32 = powr(3.0_f32, 2.0);
        assert_eq!(v, 9.0);
    }
}
