//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the solver and the decay toolkit are generic over.
///
/// Implemented for `f32` and `f64`. Tolerances quoted throughout the crate
/// assume `f64`; `f32` runs are useful for quick exploration only.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Lossy conversion from a count.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Euclidean dot product of two equal-length slices.
#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub(crate) fn norm_sq<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |acc, &x| acc + x * x)
}
