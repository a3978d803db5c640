//! Univariate polynomials over GF(p).

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::field::{FieldScalar, PrimeField};
use crate::matrix::MatrixFp;

/// Polynomial with coefficients lowest degree first; the zero polynomial has
/// no coefficients, so the leading coefficient is always nonzero.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PolyFp {
    field: PrimeField,
    coeffs: Vec<u32>,
}

impl PolyFp {
    pub fn new(field: PrimeField, coeffs: &[i64]) -> Self {
        Self::from_residues(field, coeffs.iter().map(|&c| field.reduce(c)).collect())
    }

    pub fn from_residues(field: PrimeField, mut coeffs: Vec<u32>) -> Self {
        while coeffs.last() == Some(&0) {
            coeffs.pop();
        }
        Self { field, coeffs }
    }

    pub fn zero(field: PrimeField) -> Self {
        Self {
            field,
            coeffs: Vec::new(),
        }
    }

    pub fn one(field: PrimeField) -> Self {
        Self::constant(field, 1)
    }

    pub fn constant(field: PrimeField, c: u32) -> Self {
        Self::from_residues(field, vec![c % field.modulus()])
    }

    /// `x`.
    pub fn x(field: PrimeField) -> Self {
        Self::from_residues(field, vec![0, 1])
    }

    /// Monic linear factor `x - root`.
    pub fn linear(field: PrimeField, root: u32) -> Self {
        Self::from_residues(field, vec![field.neg(root % field.modulus()), 1])
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn coeffs(&self) -> &[u32] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> u32 {
        self.coeffs.get(i).copied().unwrap_or(0)
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.coeffs == [1]
    }

    pub fn leading(&self) -> u32 {
        self.coeffs.last().copied().unwrap_or(0)
    }

    pub fn is_monic(&self) -> bool {
        self.leading() == 1
    }

    pub fn monic(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let inv = self.field.inv(self.leading()).expect("leading coefficient is nonzero");
        self.scale(inv)
    }

    pub fn scale(&self, c: u32) -> Self {
        let f = self.field;
        Self::from_residues(f, self.coeffs.iter().map(|&a| f.mul(a, c)).collect())
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let f = self.field;
        let len = self.coeffs.len().max(rhs.coeffs.len());
        Self::from_residues(
            f,
            (0..len).map(|i| f.add(self.coeff(i), rhs.coeff(i))).collect(),
        )
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        let f = self.field;
        let len = self.coeffs.len().max(rhs.coeffs.len());
        Self::from_residues(
            f,
            (0..len).map(|i| f.sub(self.coeff(i), rhs.coeff(i))).collect(),
        )
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Self::zero(self.field);
        }
        let f = self.field;
        let mut out = vec![0u32; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] = f.add(out[i + j], f.mul(a, b));
            }
        }
        Self::from_residues(f, out)
    }

    pub fn pow(&self, mut exp: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(self.field);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            exp >>= 1;
        }
        acc
    }

    /// Euclidean division; errors on a zero divisor.
    pub fn div_rem(&self, divisor: &Self) -> Result<(Self, Self)> {
        let f = self.field;
        let Some(dd) = divisor.degree() else {
            return Err(Error::DivisionByZero(f.modulus()));
        };
        let inv_lead = f.inv(divisor.leading())?;
        let mut rem = self.coeffs.clone();
        if rem.len() <= dd {
            return Ok((Self::zero(f), self.clone()));
        }
        let mut quot = vec![0u32; rem.len() - dd];
        for k in (0..quot.len()).rev() {
            let c = f.mul(rem[k + dd], inv_lead);
            quot[k] = c;
            if c == 0 {
                continue;
            }
            for (j, &b) in divisor.coeffs.iter().enumerate() {
                rem[k + j] = f.sub(rem[k + j], f.mul(c, b));
            }
        }
        rem.truncate(dd);
        Ok((Self::from_residues(f, quot), Self::from_residues(f, rem)))
    }

    pub fn rem(&self, divisor: &Self) -> Result<Self> {
        Ok(self.div_rem(divisor)?.1)
    }

    /// Exact quotient; panics if `divisor` does not divide `self`.
    pub fn exact_div(&self, divisor: &Self) -> Self {
        let (q, r) = self.div_rem(divisor).expect("nonzero divisor");
        assert!(r.is_zero(), "{divisor} does not divide {self}");
        q
    }

    pub fn derivative(&self) -> Self {
        let f = self.field;
        Self::from_residues(
            f,
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| f.mul(c, (i as u64 % f.modulus() as u64) as u32))
                .collect(),
        )
    }

    /// `self^exp mod modulus`.
    pub fn pow_mod(&self, mut exp: u64, modulus: &Self) -> Result<Self> {
        let mut base = self.rem(modulus)?;
        let mut acc = Self::one(self.field).rem(modulus)?;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc.mul(&base).rem(modulus)?;
            }
            base = base.mul(&base).rem(modulus)?;
            exp >>= 1;
        }
        Ok(acc)
    }

    pub fn eval(&self, x: FieldScalar) -> FieldScalar {
        let f = self.field;
        let v = self
            .coeffs
            .iter()
            .rev()
            .fold(0u32, |acc, &c| f.add(f.mul(acc, x.value()), c));
        f.elem(v as i64)
    }

    /// Total order used to sort factors: coefficient vectors compared
    /// lexicographically, lowest degree first.
    pub fn lex_cmp(&self, other: &Self) -> Ordering {
        self.coeffs.cmp(&other.coeffs)
    }
}

/// Monic greatest common divisor.
pub fn poly_gcd(f: &PolyFp, g: &PolyFp) -> Result<PolyFp> {
    if f.is_zero() && g.is_zero() {
        return Err(Error::InvalidInput("gcd(0, 0) is undefined".into()));
    }
    let (mut a, mut b) = (f.clone(), g.clone());
    while !b.is_zero() {
        let r = a.rem(&b)?;
        a = b;
        b = r;
    }
    Ok(a.monic())
}

/// Horner evaluation of `f` at the square matrix `a`.
pub fn poly_eval_matrix(f: &PolyFp, a: &MatrixFp) -> Result<MatrixFp> {
    if !a.is_square() {
        return Err(Error::Shape(format!(
            "polynomial evaluation needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if f.field() != a.field() {
        return Err(Error::ModulusMismatch(
            f.field().modulus(),
            a.field().modulus(),
        ));
    }
    let n = a.rows();
    let id = MatrixFp::identity(a.field(), n);
    let mut acc = MatrixFp::zeros(a.field(), n, n);
    for &c in f.coeffs().iter().rev() {
        acc = acc.mul(a)?.add(&id.scale(c))?;
    }
    Ok(acc)
}

impl fmt::Display for PolyFp {
    fn fmt(&self, fmt: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(fmt, "0");
        }
        let mut terms = Vec::new();
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            let term = match (i, c) {
                (0, c) => c.to_string(),
                (1, 1) => "x".to_string(),
                (1, c) => format!("{c}x"),
                (i, 1) => format!("x^{i}"),
                (i, c) => format!("{c}x^{i}"),
            };
            terms.push(term);
        }
        write!(fmt, "{}", terms.join(" + "))
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
    fn gcd_examples() {
        let f3 = gf(3);
        let f = PolyFp::new(f3, &[-1, 0, 1]);
        let g = PolyFp::new(f3, &[-1, 1]);
        assert_eq!(poly_gcd(&f, &g).unwrap(), g);

        let f2 = gf(2);
        let f = PolyFp::new(f2, &[0, 1, 1]);
        let g = PolyFp::x(f2);
        assert_eq!(poly_gcd(&f, &g).unwrap(), g);

        let a = PolyFp::new(f3, &[1, 1]);
        let b = PolyFp::new(f3, &[2, 1]);
        let f = a.mul(&a).mul(&b);
        let g = a.mul(&b).mul(&b);
        assert_eq!(poly_gcd(&f, &g).unwrap(), a.mul(&b));
    }

    #[test]
    fn gcd_of_zeros_is_an_error() {
        let z = PolyFp::zero(gf(5));
        assert!(matches!(poly_gcd(&z, &z), Err(Error::InvalidInput(_))));
        let g = PolyFp::new(gf(5), &[0, 2]);
        assert_eq!(poly_gcd(&z, &g).unwrap(), PolyFp::x(gf(5)));
    }

    #[test]
    fn eval_matrix_examples() {
        let f3 = gf(3);
        let a = MatrixFp::from_rows(f3, &[[1, 1, 0], [0, 2, 0], [0, 0, 1]]).unwrap();
        assert_eq!(
            poly_eval_matrix(&PolyFp::one(f3), &a).unwrap(),
            MatrixFp::identity(f3, 3)
        );
        assert_eq!(poly_eval_matrix(&PolyFp::x(f3), &a).unwrap(), a);
        // A^2 = [[1,0,0],[0,1,0],[0,0,1]] mod 3, so A^2 - I = 0.
        let x2m1 = PolyFp::new(f3, &[-1, 0, 1]);
        let expected = a.mul(&a).unwrap().sub(&MatrixFp::identity(f3, 3)).unwrap();
        assert_eq!(poly_eval_matrix(&x2m1, &a).unwrap(), expected);
        assert!(expected.is_zero());
        let rect = MatrixFp::zeros(f3, 2, 3);
        assert!(matches!(poly_eval_matrix(&x2m1, &rect), Err(Error::Shape(_))));
    }

    #[test]
    fn division_and_derivative() {
        let f5 = gf(5);
        let f = PolyFp::new(f5, &[1, 2, 3, 4]);
        let d = PolyFp::new(f5, &[3, 0, 1]);
        let (q, r) = f.div_rem(&d).unwrap();
        assert_eq!(q.mul(&d).add(&r), f);
        assert!(r.degree() < d.degree());
        assert_eq!(f.derivative(), PolyFp::new(f5, &[2, 6, 12]));
        assert_eq!(PolyFp::new(f5, &[1, 0, 0, 0, 0, 1]).derivative(), PolyFp::zero(f5));
        assert!(f.div_rem(&PolyFp::zero(f5)).is_err());
    }

    #[test]
    fn display() {
        let f = PolyFp::new(gf(3), &[2, 0, 1]);
        assert_eq!(f.to_string(), "x^2 + 2");
        assert_eq!(PolyFp::zero(gf(3)).to_string(), "0");
    }

    fn poly_strategy() -> impl Strategy<Value = (u64, Vec<i64>, Vec<i64>)> {
        (0usize..3, prop::collection::vec(0i64..7, 1..8), prop::collection::vec(0i64..7, 1..8))
            .prop_map(|(pi, a, b)| ([2u64, 3, 5][pi], a, b))
    }

    proptest! {
        #[test]
        fn gcd_times_lcm_is_product((p, a, b) in poly_strategy()) {
            let f = gf(p);
            let a = PolyFp::new(f, &a);
            let b = PolyFp::new(f, &b);
            prop_assume!(!a.is_zero() && !b.is_zero());
            let g = poly_gcd(&a, &b).unwrap();
            prop_assert!(a.rem(&g).unwrap().is_zero());
            prop_assert!(b.rem(&g).unwrap().is_zero());
            let lcm = a.mul(&b).exact_div(&g);
            prop_assert_eq!(g.mul(&lcm).monic(), a.mul(&b).monic());
            prop_assert!(lcm.rem(&a).unwrap().is_zero());
            prop_assert!(lcm.rem(&b).unwrap().is_zero());
        }
    }
}
