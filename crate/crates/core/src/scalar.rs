//! The real-number abstraction every algorithm in this crate is written against.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar: `f32` or `f64`.
///
/// Tolerances are part of the scalar because an absolute `1e-12` is below the
/// resolution of `f32` near 1.
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
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Absolute tolerance for metric and measure axioms on input data.
    const INPUT_TOL: f64;
    /// Absolute tolerance for coupling marginals.
    const MARGINAL_TOL: f64;

    #[inline]
    fn input_tol() -> Self {
        Self::lit(Self::INPUT_TOL)
    }

    #[inline]
    fn marginal_tol() -> Self {
        Self::lit(Self::MARGINAL_TOL)
    }

    /// Converts an `f64` literal. Never fails for finite inputs.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize fits in a float")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const INPUT_TOL: f64 = 1e-12;
    const MARGINAL_TOL: f64 = 1e-10;
}

impl Scalar for f32 {
    const INPUT_TOL: f64 = 1e-5;
    const MARGINAL_TOL: f64 = 1e-5;
}

/// Total order on scalars that sorts NaN last. Inputs are validated finite, so
/// this only matters for garbage that slipped past validation.
#[inline]
pub(crate) fn cmp<T: Scalar>(a: &T, b: &T) -> std::cmp::Ordering {
    a.partial_cmp(b).unwrap_or_else(|| a.is_nan().cmp(&b.is_nan()))
}

/// Sorted, deduplicated copy of `values` (exact equality).
pub(crate) fn sorted_distinct<T: Scalar>(mut values: Vec<T>) -> Vec<T> {
    values.sort_by(cmp);
    values.dedup();
    values
}
