//! Arithmetic in the prime field GF(p).
//!
//! Elements are stored as reduced `u32` residues; products go through `u64`
//! so any prime up to 2^31 is safe.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Largest modulus accepted by [`PrimeField::new`].
pub const MAX_MODULUS: u64 = 1 << 31;

/// A validated prime modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrimeField {
    p: u32,
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

impl PrimeField {
    /// Validates `p` by trial division.
    pub fn new(p: u64) -> Result<Self> {
        if p > MAX_MODULUS {
            return Err(Error::InvalidInput(format!("modulus {p} exceeds 2^31")));
        }
        if !is_prime(p) {
            return Err(Error::InvalidInput(format!("modulus {p} is not prime")));
        }
        Ok(Self { p: p as u32 })
    }

    #[inline]
    pub fn modulus(self) -> u32 {
        self.p
    }

    /// Number of elements, as a `usize`.
    #[inline]
    pub fn order(self) -> usize {
        self.p as usize
    }

    #[inline]
    pub fn reduce(self, v: i64) -> u32 {
        v.rem_euclid(self.p as i64) as u32
    }

    #[inline]
    pub fn add(self, a: u32, b: u32) -> u32 {
        ((a as u64 + b as u64) % self.p as u64) as u32
    }

    #[inline]
    pub fn sub(self, a: u32, b: u32) -> u32 {
        ((a as u64 + self.p as u64 - b as u64) % self.p as u64) as u32
    }

    #[inline]
    pub fn neg(self, a: u32) -> u32 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    #[inline]
    pub fn mul(self, a: u32, b: u32) -> u32 {
        ((a as u64 * b as u64) % self.p as u64) as u32
    }

    pub fn pow(self, mut base: u32, mut exp: u64) -> u32 {
        let mut acc = 1 % self.p;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse by the extended Euclidean algorithm.
    pub fn inv(self, a: u32) -> Result<u32> {
        if a.is_multiple_of(self.p) {
            return Err(Error::DivisionByZero(self.p));
        }
        let (mut r0, mut r1) = (self.p as i64, a as i64);
        let (mut t0, mut t1) = (0i64, 1i64);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (t0, t1) = (t1, t0 - q * t1);
        }
        debug_assert_eq!(r0, 1);
        Ok(self.reduce(t0))
    }

    pub fn div(self, a: u32, b: u32) -> Result<u32> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn elem(self, v: i64) -> FieldScalar {
        FieldScalar {
            value: self.reduce(v),
            field: self,
        }
    }

    pub fn zero(self) -> FieldScalar {
        self.elem(0)
    }

    pub fn one(self) -> FieldScalar {
        self.elem(1)
    }
}

impl fmt::Display for PrimeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF({})", self.p)
    }
}

/// An element of GF(p), carrying its modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldScalar {
    value: u32,
    field: PrimeField,
}

impl FieldScalar {
    pub fn new(field: PrimeField, value: i64) -> Self {
        field.elem(value)
    }

    #[inline]
    pub fn value(self) -> u32 {
        self.value
    }

    #[inline]
    pub fn field(self) -> PrimeField {
        self.field
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    pub fn inv(self) -> Result<Self> {
        fp_inv(self)
    }

    pub fn pow(self, exp: u64) -> Self {
        Self {
            value: self.field.pow(self.value, exp),
            field: self.field,
        }
    }

    fn check(self, other: Self) {
        assert_eq!(
            self.field, other.field,
            "mixed-modulus arithmetic: {} vs {}",
            self.field, other.field
        );
    }
}

/// Inverse of a nonzero field element.
pub fn fp_inv(a: FieldScalar) -> Result<FieldScalar> {
    Ok(FieldScalar {
        value: a.field.inv(a.value)?,
        field: a.field,
    })
}

impl Add for FieldScalar {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.check(rhs);
        Self {
            value: self.field.add(self.value, rhs.value),
            field: self.field,
        }
    }
}

impl Sub for FieldScalar {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.check(rhs);
        Self {
            value: self.field.sub(self.value, rhs.value),
            field: self.field,
        }
    }
}

impl Mul for FieldScalar {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.check(rhs);
        Self {
            value: self.field.mul(self.value, rhs.value),
            field: self.field,
        }
    }
}

impl Neg for FieldScalar {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            value: self.field.neg(self.value),
            field: self.field,
        }
    }
}

impl fmt::Display for FieldScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gf(p: u64) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(fp_inv(gf(3).elem(2)).unwrap().value(), 2);
        assert_eq!(fp_inv(gf(5).elem(1)).unwrap().value(), 1);
        assert_eq!(fp_inv(gf(7).elem(3)).unwrap().value(), 5);
    }

    #[test]
    fn inverse_matches_exhaustive_search() {
        for p in [2u64, 3, 5, 7, 11, 13] {
            let f = gf(p);
            for a in 1..p as i64 {
                let brute = (1..p as i64).find(|b| (a * b) % p as i64 == 1).unwrap();
                assert_eq!(fp_inv(f.elem(a)).unwrap().value() as i64, brute);
            }
        }
    }

    #[test]
    fn zero_has_no_inverse() {
        assert_eq!(fp_inv(gf(5).zero()), Err(Error::DivisionByZero(5)));
    }

    #[test]
    fn rejects_composites_and_large_moduli() {
        for bad in [0u64, 1, 4, 9, 15, 91] {
            assert!(PrimeField::new(bad).is_err(), "{bad}");
        }
        assert!(PrimeField::new(MAX_MODULUS + 1).is_err());
        assert!(PrimeField::new(2_147_483_647).is_ok());
    }

    #[test]
    fn large_prime_products_do_not_overflow() {
        let f = gf(2_147_483_647);
        let a = f.elem(2_147_483_646);
        assert_eq!((a * a).value(), 1);
        assert_eq!((a * fp_inv(a).unwrap()).value(), 1);
    }

    proptest! {
        #[test]
        fn field_axioms(pi in 0usize..4, a in 0i64..1000, b in 0i64..1000, c in 0i64..1000) {
            let f = gf([2u64, 3, 5, 7][pi]);
            let (a, b, c) = (f.elem(a), f.elem(b), f.elem(c));
            prop_assert_eq!((a + b) + c, a + (b + c));
            prop_assert_eq!((a * b) * c, a * (b * c));
            prop_assert_eq!(a + b, b + a);
            prop_assert_eq!(a * b, b * a);
            prop_assert_eq!(a * (b + c), a * b + a * c);
            prop_assert!((a + (-a)).is_zero());
            prop_assert_eq!(a - b, a + (-b));
            if !a.is_zero() {
                prop_assert_eq!((a * fp_inv(a).unwrap()).value(), 1);
            }
        }
    }
}
