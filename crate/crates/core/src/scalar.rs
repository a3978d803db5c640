//! Scalar traits the solvers are generic over.
//!
//! Cost values live in a [`CostScalar`]: exact rationals for every verdict,
//! `f64` for quick approximate runs. The real-field Riccati code works over
//! any [`RealScalar`].

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, One, Signed, Zero};

use crate::error::{Error, Result};

/// Exact rational with arbitrary-precision numerator and denominator.
pub type Rational = BigRational;

/// Ordered field used for cost and value tables.
pub trait CostScalar:
    Clone
    + Debug
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Send
    + Sync
{
    /// Exact textual form (`"num/den"` for rationals).
    fn to_exact_string(&self) -> String;

    fn from_ratio(num: i64, den: i64) -> Self;

    fn abs_value(&self) -> Self {
        if *self < Self::zero() {
            Self::zero() - self.clone()
        } else {
            self.clone()
        }
    }
}

impl CostScalar for Rational {
    fn to_exact_string(&self) -> String {
        format_rational(self)
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    fn abs_value(&self) -> Self {
        self.abs()
    }
}

impl CostScalar for f64 {
    fn to_exact_string(&self) -> String {
        format!("{self:?}")
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
}

/// Floating-point scalar for the real-field Riccati code.
pub trait RealScalar: Float + Debug + Send + Sync + 'static {}

impl RealScalar for f32 {}
impl RealScalar for f64 {}

/// Builds `num/den` in lowest terms.
pub fn rational(num: i64, den: i64) -> Rational {
    Rational::from_ratio(num, den)
}

/// Always `"num/den"`, denominator positive, lowest terms.
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `"num/den"` or a bare integer.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::InvalidInput(format!("malformed rational {s:?}, expected \"num/den\""));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(Error::InvalidInput(format!("zero denominator in {s:?}")));
    }
    Ok(Rational::new(n, d))
}
