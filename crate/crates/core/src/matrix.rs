//! Dense matrices over GF(p).

use std::fmt;

use crate::error::{Error, Result};
use crate::field::{FieldScalar, PrimeField};

/// Row-major dense matrix over GF(p). Zero rows or columns are allowed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MatrixFp {
    field: PrimeField,
    rows: usize,
    cols: usize,
    data: Vec<u32>,
}

/// Result of [`MatrixFp::rref`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rref {
    pub matrix: MatrixFp,
    pub rank: usize,
    pub pivot_cols: Vec<usize>,
}

impl MatrixFp {
    pub fn zeros(field: PrimeField, rows: usize, cols: usize) -> Self {
        Self {
            field,
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(field: PrimeField, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1 % field.modulus();
        }
        m
    }

    /// Entries are reduced mod p.
    pub fn from_rows<R: AsRef<[i64]>>(field: PrimeField, rows: &[R]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.as_ref().len());
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != c {
                return Err(Error::Shape(format!(
                    "row {i} has {} entries, expected {c}",
                    row.len()
                )));
            }
            data.extend(row.iter().map(|&v| field.reduce(v)));
        }
        Ok(Self {
            field,
            rows: r,
            cols: c,
            data,
        })
    }

    /// Builds a matrix whose columns are the given vectors (each of length `rows`).
    pub fn from_columns(field: PrimeField, rows: usize, columns: &[Vec<u32>]) -> Self {
        let cols = columns.len();
        let mut m = Self::zeros(field, rows, cols);
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows, "column {j} has wrong length");
            for (i, &v) in col.iter().enumerate() {
                m.data[i * cols + j] = v % field.modulus();
            }
        }
        m
    }

    pub fn from_raw(field: PrimeField, rows: usize, cols: usize, data: Vec<u32>) -> Self {
        assert_eq!(data.len(), rows * cols);
        debug_assert!(data.iter().all(|&v| v < field.modulus()));
        Self {
            field,
            rows,
            cols,
            data,
        }
    }

    #[inline]
    pub fn field(&self) -> PrimeField {
        self.field
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: u32) {
        self.data[i * self.cols + j] = v % self.field.modulus();
    }

    pub fn entry(&self, i: usize, j: usize) -> FieldScalar {
        self.field.elem(self.get(i, j) as i64)
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<u32> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<u32>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    fn same_field(&self, other: &Self) -> Result<()> {
        if self.field != other.field {
            return Err(Error::ModulusMismatch(
                self.field.modulus(),
                other.field.modulus(),
            ));
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.field, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        self.same_field(rhs)?;
        if self.cols != rhs.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let p = self.field.modulus() as u64;
        let mut out = Self::zeros(self.field, self.rows, rhs.cols);
        for i in 0..self.rows {
            for j in 0..rhs.cols {
                let mut acc = 0u64;
                for k in 0..self.cols {
                    acc = (acc + self.get(i, k) as u64 * rhs.get(k, j) as u64) % p;
                }
                out.data[i * rhs.cols + j] = acc as u32;
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[u32]) -> Vec<u32> {
        assert_eq!(v.len(), self.cols, "vector length mismatch");
        let p = self.field.modulus() as u64;
        (0..self.rows)
            .map(|i| {
                let row = self.row(i);
                let mut acc = 0u64;
                for (a, b) in row.iter().zip(v) {
                    acc = (acc + *a as u64 * *b as u64) % p;
                }
                acc as u32
            })
            .collect()
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(u32, u32) -> u32) -> Result<Self> {
        self.same_field(rhs)?;
        if (self.rows, self.cols) != (rhs.rows, rhs.cols) {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self {
            data,
            ..self.clone()
        })
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        let f = self.field;
        self.zip_with(rhs, |a, b| f.add(a, b))
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        let f = self.field;
        self.zip_with(rhs, |a, b| f.sub(a, b))
    }

    pub fn scale(&self, c: u32) -> Self {
        let f = self.field;
        Self {
            data: self.data.iter().map(|&a| f.mul(a, c)).collect(),
            ..self.clone()
        }
    }

    pub fn pow(&self, mut exp: u64) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::Shape(format!(
                "power of non-square {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let mut base = self.clone();
        let mut acc = Self::identity(self.field, self.rows);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            base = base.mul(&base)?;
            exp >>= 1;
        }
        Ok(acc)
    }

    /// Horizontal concatenation `[self | rhs]`.
    pub fn hstack(&self, rhs: &Self) -> Result<Self> {
        self.same_field(rhs)?;
        if self.rows != rhs.rows {
            return Err(Error::Shape(format!(
                "hstack of {} and {} rows",
                self.rows, rhs.rows
            )));
        }
        let cols = self.cols + rhs.cols;
        let mut out = Self::zeros(self.field, self.rows, cols);
        for i in 0..self.rows {
            out.data[i * cols..i * cols + self.cols].copy_from_slice(self.row(i));
            out.data[i * cols + self.cols..(i + 1) * cols].copy_from_slice(rhs.row(i));
        }
        Ok(out)
    }

    /// Rows `range` of `self`, all columns.
    pub fn row_block(&self, range: std::ops::Range<usize>) -> Self {
        let rows = range.len();
        Self {
            field: self.field,
            rows,
            cols: self.cols,
            data: self.data[range.start * self.cols..range.end * self.cols].to_vec(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut out = Self::zeros(self.field, self.rows, cols.len());
        for i in 0..self.rows {
            for (k, &j) in cols.iter().enumerate() {
                out.data[i * cols.len() + k] = self.get(i, j);
            }
        }
        out
    }

    /// Gauss-Jordan reduction to reduced row echelon form.
    pub fn rref(&self) -> Rref {
        let f = self.field;
        let mut m = self.clone();
        let mut pivot_cols = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(piv) = (r..m.rows).find(|&i| m.get(i, c) != 0) else {
                continue;
            };
            if piv != r {
                for j in 0..m.cols {
                    m.data.swap(piv * m.cols + j, r * m.cols + j);
                }
            }
            let inv = f.inv(m.get(r, c)).expect("pivot is nonzero");
            for j in c..m.cols {
                let v = f.mul(m.get(r, j), inv);
                m.data[r * m.cols + j] = v;
            }
            for i in 0..m.rows {
                if i == r {
                    continue;
                }
                let factor = m.get(i, c);
                if factor == 0 {
                    continue;
                }
                for j in c..m.cols {
                    let v = f.sub(m.get(i, j), f.mul(factor, m.get(r, j)));
                    m.data[i * m.cols + j] = v;
                }
            }
            pivot_cols.push(c);
            r += 1;
        }
        Rref {
            matrix: m,
            rank: r,
            pivot_cols,
        }
    }

    pub fn rank(&self) -> usize {
        self.rref().rank
    }

    pub fn is_invertible(&self) -> bool {
        self.is_square() && self.rank() == self.rows
    }

    pub fn inverse(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::Shape(format!(
                "inverse of non-square {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let aug = self.hstack(&Self::identity(self.field, n))?.rref();
        if aug.pivot_cols.iter().take_while(|&&c| c < n).count() < n {
            return Err(Error::InvalidInput("matrix is singular".into()));
        }
        let cols: Vec<usize> = (n..2 * n).collect();
        Ok(aug.matrix.select_columns(&cols))
    }
}

impl fmt::Display for MatrixFp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            let row: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            write!(f, "{}", row.join(" "))?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gf3() -> PrimeField {
        PrimeField::new(3).unwrap()
    }

    #[test]
    fn rref_identity_and_zero() {
        let id = MatrixFp::identity(gf3(), 3);
        let r = id.rref();
        assert_eq!(r.matrix, id);
        assert_eq!(r.rank, 3);
        assert_eq!(r.pivot_cols, vec![0, 1, 2]);

        let z = MatrixFp::zeros(gf3(), 2, 3);
        let r = z.rref();
        assert_eq!(r.matrix, z);
        assert_eq!(r.rank, 0);
        assert!(r.pivot_cols.is_empty());
    }

    #[test]
    fn example_input_matrix_has_full_column_rank() {
        let b = MatrixFp::from_rows(gf3(), &[[1, 0], [1, 1], [0, 1]]).unwrap();
        let r = b.rref();
        assert_eq!(r.rank, 2);
        let expected = MatrixFp::from_rows(gf3(), &[[1, 0], [0, 1], [0, 0]]).unwrap();
        assert_eq!(r.matrix, expected);
    }

    #[test]
    fn inverse_round_trip() {
        let a = MatrixFp::from_rows(gf3(), &[[1, 1, 0], [0, 2, 0], [0, 0, 1]]).unwrap();
        let inv = a.inverse().unwrap();
        assert_eq!(a.mul(&inv).unwrap(), MatrixFp::identity(gf3(), 3));
        let singular = MatrixFp::from_rows(gf3(), &[[1, 2], [2, 1]]).unwrap();
        assert!(singular.inverse().is_err());
    }

    #[test]
    fn shape_errors() {
        let a = MatrixFp::zeros(gf3(), 2, 3);
        assert!(matches!(a.mul(&a), Err(Error::Shape(_))));
        assert!(matches!(a.pow(2), Err(Error::Shape(_))));
        let b = MatrixFp::zeros(PrimeField::new(5).unwrap(), 3, 2);
        assert!(matches!(a.mul(&b), Err(Error::ModulusMismatch(3, 5))));
        assert!(MatrixFp::from_rows(gf3(), &[vec![1, 2], vec![1]]).is_err());
    }

    #[test]
    fn entries_are_reduced() {
        let a = MatrixFp::from_rows(gf3(), &[[-1, 4], [3, 5]]).unwrap();
        assert_eq!(a.to_rows(), vec![vec![2, 1], vec![0, 2]]);
    }
}
