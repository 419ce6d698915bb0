//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::Debug;

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point scalar the geometry, metrics and optimizers are generic over.
///
/// Implemented for `f32` and `f64`. Arithmetic and transcendental functions come
/// from [`RealField`]; conversions from literals go through [`Real::lit`].
pub trait Real:
    RealField + Copy + Default + Debug + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    /// Widens to `f64`; used for reporting and serialization.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn is_finite_value(self) -> bool {
        self.to_f64_lossy().is_finite()
    }

    /// Rounds toward negative infinity and returns the result as `i64`.
    #[inline]
    fn floor_i64(self) -> i64 {
        self.to_f64_lossy().floor() as i64
    }

    /// Machine epsilon for the concrete type.
    fn epsilon_value() -> Self;
}

impl Real for f32 {
    fn epsilon_value() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    fn epsilon_value() -> Self {
        f64::EPSILON
    }
}

/// Smallest of two partially ordered values; NaN-free inputs assumed.
#[inline]
pub fn min<T: Real>(a: T, b: T) -> T {
    if b < a {
        b
    } else {
        a
    }
}

#[inline]
pub fn max<T: Real>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}
