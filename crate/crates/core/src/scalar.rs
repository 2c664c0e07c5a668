//! Generic floating point scalar used throughout the crate.

use nalgebra as na;
use num_traits as nt;

/// Floating point types the solvers are generic over (`f32`, `f64`).
///
/// Math methods (`sqrt`, `abs`, `sin`, ...) come from [`na::RealField`];
/// conversions go through [`nt::FromPrimitive`] / [`nt::ToPrimitive`].
pub trait Real:
    na::RealField
    + Copy
    + nt::FromPrimitive
    + nt::ToPrimitive
    + nt::FloatConst
    + Default
    + std::iter::Sum
{
    const ZERO: Self;
    const ONE: Self;
    /// Machine epsilon.
    const EPS: Self;

    /// Converts an `f64` literal. Never fails for the supported types.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as nt::FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_(n: usize) -> Self {
        <Self as nt::FromPrimitive>::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_(self) -> f64 {
        <Self as nt::ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }
}

macro_rules! impl_real {
    ($f:ident) => {
        impl Real for $f {
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;
            const EPS: Self = $f::EPSILON;
        }
    };
}

impl_real!(f32);
impl_real!(f64);
