//! Scalar abstraction over the numeric type used for weights, similarities
//! and probabilities.
//!
//! Everything numeric in the engine is generic over [`Scalar`], so the same
//! code runs on `f32` or `f64` (the crate root exports `f64` aliases, which
//! is what the CLI uses). Symbolic data (atoms, substitutions, provenance)
//! carries no scalar at all.

use std::cmp::Ordering;
use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar with the conversions the engine needs.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

/// Convert from `f64`, saturating instead of failing (only lossy for `f32`).
pub fn from_f64<S: Scalar>(v: f64) -> S {
    S::from_f64(v).unwrap_or_else(|| if v > 0.0 { S::max_value() } else { S::min_value() })
}

/// Convert a count into a scalar.
pub fn from_usize<S: Scalar>(v: usize) -> S {
    S::from_usize(v).unwrap_or_else(S::max_value)
}

/// Total order for finite scalars; the engine never produces NaN.
pub fn cmp_finite<S: Scalar>(a: S, b: S) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}
