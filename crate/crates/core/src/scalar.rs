//! Scalar abstraction for embedding vectors, retrieval scores, and metric values.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real number type the numeric modules are generic over.
///
/// Implemented for `f32` and `f64`. Embedding backends produce `f32` on the
/// wire; indices and metrics may be instantiated at either width.
pub trait Scalar:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + serde::Serialize
    + 'static
{
    fn from_f32_lossy(v: f32) -> Self;

    fn to_f32_lossy(self) -> f32;

    fn to_f64_lossy(self) -> f64;

    /// Builds a scalar from a ratio of counts.
    fn ratio(num: usize, den: usize) -> Self {
        Self::from_usize(num).unwrap() / Self::from_usize(den).unwrap()
    }
}

impl Scalar for f32 {
    fn from_f32_lossy(v: f32) -> Self {
        v
    }

    fn to_f32_lossy(self) -> f32 {
        self
    }

    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f32_lossy(v: f32) -> Self {
        v as f64
    }

    fn to_f32_lossy(self) -> f32 {
        self as f32
    }

    fn to_f64_lossy(self) -> f64 {
        self
    }
}

/// Inner product with strictly sequential accumulation.
///
/// Summation order is fixed so that scores are reproducible bit for bit.
#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = S::zero();
    for (x, y) in a.iter().zip(b) {
        acc += *x * *y;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_hand_sum() {
        assert_eq!(dot(&[1.0f32, 2.0, 3.0], &[4.0, 5.0, 6.0]), 32.0);
        assert_eq!(dot::<f64>(&[], &[]), 0.0);
    }

    #[test]
    fn ratio_of_counts() {
        assert_eq!(<f64 as Scalar>::ratio(1, 4), 0.25);
    }
}
