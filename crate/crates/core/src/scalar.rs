use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point element type of embeddings, parameters and scores: f32 or f64.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossless for f32 and f64 sources.
    fn of_f32(v: f32) -> Self;
    fn from_f64_lossy(v: f64) -> Self;
    fn to_f64_lossless(self) -> f64;

    /// Tolerance for "sums to one" checks on probability vectors of length `len`.
    fn normalization_tolerance(len: usize) -> Self {
        let floor = Self::from_f64_lossy(1e-9);
        let rounding = Self::epsilon() * Self::from_f64_lossy(4.0 * len.max(1) as f64);
        floor.max(rounding)
    }
}

impl Scalar for f32 {
    fn of_f32(v: f32) -> Self {
        v
    }
    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }
    fn to_f64_lossless(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn of_f32(v: f32) -> Self {
        v as f64
    }
    fn from_f64_lossy(v: f64) -> Self {
        v
    }
    fn to_f64_lossless(self) -> f64 {
        self
    }
}

/// Shorthand for literal constants in generic code.
#[inline]
pub(crate) fn lit<T: Scalar>(v: f64) -> T {
    T::from_f64_lossy(v)
}
