use std::fmt::Debug;
use std::ops::Neg;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, ToPrimitive, Zero};

/// Field arithmetic shared by the floating and exact eigen-solves.
pub trait Scalar: Num + Clone + Debug + Neg<Output = Self> {
    fn from_int(n: i64) -> Self;
    fn from_f64_exact(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    /// Zero test used by the resonance check; exact for rationals.
    fn negligible(&self, scale: &Self) -> bool;
}

impl Scalar for f64 {
    fn from_int(n: i64) -> Self {
        n as f64
    }
    fn from_f64_exact(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn negligible(&self, scale: &Self) -> bool {
        self.abs() <= 1e-9 * scale.abs().max(1.0)
    }
}

impl Scalar for BigRational {
    fn from_int(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    fn from_f64_exact(x: f64) -> Self {
        BigRational::from_f64(x).expect("finite float")
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn negligible(&self, _scale: &Self) -> bool {
        self.is_zero()
    }
}
