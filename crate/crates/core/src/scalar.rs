//! Floating-point abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar type the copula, marginal and vine code is generic over.
///
/// Implemented for `f32` and `f64`. Tolerances that are quoted as absolute
/// numbers in the documentation are floored at a small multiple of the type's
/// machine epsilon, so `f32` instantiations stay meaningful.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal must be representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Distance kept from 0 and 1 when clamping probabilities.
    #[inline]
    fn unit_eps() -> Self {
        Self::lit(1e-10).max(Self::epsilon())
    }

    /// `x` floored at `16 * epsilon`.
    #[inline]
    fn tol(x: f64) -> Self {
        Self::lit(x).max(Self::epsilon() * Self::lit(16.0))
    }

    /// Clamps to `[unit_eps, 1 - unit_eps]`.
    #[inline]
    fn clamp_unit(self) -> Self {
        let eps = Self::unit_eps();
        if self.is_nan() {
            return self;
        }
        self.max(eps).min(Self::one() - eps)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `ln(exp(a) + exp(b))` without overflow.
#[inline]
pub(crate) fn ln_add_exp<T: Scalar>(a: T, b: T) -> T {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if hi == T::neg_infinity() {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}
