//! Numeric abstraction for the optimization layer.
//!
//! The simplex engine and the affine-form algebra are written once against
//! [`Scalar`] and instantiated for `f64` (the production path), `f32`, and
//! exact [`BigRational`] arithmetic (used to re-solve LPs whose floating-point
//! answer fails certification).

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// A field element the LP and affine layers can compute with.
pub trait Scalar:
    Clone + Debug + Display + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync
{
    /// Pivot and feasibility tolerance. Zero for exact types.
    fn tolerance() -> Self;

    /// Lossy conversion from `f64`; `None` for non-finite input.
    fn from_f64_lossy(x: f64) -> Option<Self>;

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn is_negligible(&self) -> bool {
        self.abs() <= Self::tolerance()
    }
}

impl Scalar for f64 {
    fn tolerance() -> Self {
        1e-11
    }
    fn from_f64_lossy(x: f64) -> Option<Self> {
        x.is_finite().then_some(x)
    }
}

impl Scalar for f32 {
    fn tolerance() -> Self {
        1e-5
    }
    fn from_f64_lossy(x: f64) -> Option<Self> {
        let y = x as f32;
        y.is_finite().then_some(y)
    }
}

impl Scalar for BigRational {
    fn tolerance() -> Self {
        BigRational::from_integer(BigInt::from(0))
    }
    fn from_f64_lossy(x: f64) -> Option<Self> {
        BigRational::from_float(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_roundtrip_is_exact() {
        let r = BigRational::from_f64_lossy(0.1).unwrap();
        assert_eq!(r.to_f64_lossy(), 0.1);
        assert!(BigRational::tolerance().is_negligible());
        assert!(BigRational::from_f64_lossy(f64::NAN).is_none());
    }

    #[test]
    fn float_tolerances_are_ordered() {
        assert!(f64::tolerance() < f32::tolerance() as f64);
        assert!(1e-12_f64.is_negligible());
        assert!(!1e-3_f64.is_negligible());
    }
}
