//! Scalar abstraction shared by every numerical module.

use std::fmt;

use nalgebra::RealField;
use num_traits::{FloatConst, FromPrimitive, ToPrimitive};

/// Real floating-point scalar (`f32` or `f64`).
///
/// Elementary functions come from [`RealField`]; literals and conversions go
/// through num-traits.
pub trait Real:
    RealField
    + Copy
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Default
    + fmt::Display
    + fmt::LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Lossy conversion back to `f64` for reporting and I/O.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn two_pi_s() -> Self {
        Self::TAU()
    }

    /// Positive floor for guarding divisions; representable in `f32`.
    #[inline]
    fn tiny() -> Self {
        Self::of(1e-30)
    }

    #[inline]
    fn sq(self) -> Self {
        self * self
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Hz to rad/s.
#[inline]
pub fn angular<T: Real>(hz: T) -> T {
    hz * T::two_pi_s()
}

/// rad/s to Hz.
#[inline]
pub fn ordinary<T: Real>(omega: T) -> T {
    omega / T::two_pi_s()
}
