use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// Field-like scalar used by the exact-or-approximate numeric routines.
///
/// `f32`/`f64` give fast approximate results; [`crate::Exact`] gives exact
/// rational arithmetic for oracles and small-scale verification.
pub trait Scalar:
    Num + Signed + Clone + Debug + PartialOrd + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// `num / den`, exact where the type allows it.
    fn ratio(num: i64, den: i64) -> Self;

    fn from_count(v: usize) -> Self {
        Self::ratio(v as i64, 1)
    }

    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    fn ratio(num: i64, den: i64) -> Self {
        (num as f64 / den as f64) as f32
    }
}

impl Scalar for f64 {
    fn ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
}

impl Scalar for BigRational {
    fn ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_count(v: usize) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn as_f64(&self) -> f64 {
        // ToPrimitive on big ratios can fail for huge parts; fall back to
        // dividing the converted numerator and denominator.
        self.to_f64().unwrap_or_else(|| {
            let n = self.numer().to_f64().unwrap_or(f64::NAN);
            let d = self.denom().to_f64().unwrap_or(f64::NAN);
            n / d
        })
    }
}

/// Sum of a slice of scalars.
pub fn sum<T: Scalar>(values: &[T]) -> T {
    values.iter().cloned().fold(T::zero(), |acc, v| acc + v)
}
