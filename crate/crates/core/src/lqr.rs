//! Finite-horizon LQR over the reals and the block structure induced by an
//! invariant decomposition.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::RealScalar;

/// Condition-number limit for the inversions in the recursion.
pub const DEFAULT_CONDITION_LIMIT: f64 = 1e12;

fn c<T: RealScalar>(v: f64) -> T {
    T::from(v).expect("representable constant")
}

/// Dense row-major real matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: RealScalar> RealMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        let data: Vec<T> = rows.iter().flatten().copied().collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        Ok(Self { rows: r, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let data = (0..rows * cols).map(|k| f(k / cols.max(1), k % cols.max(1))).collect();
        Self { rows, cols, data }
    }

    /// Square block-diagonal matrix from square or rectangular blocks.
    pub fn block_diagonal(blocks: &[RealMatrix<T>]) -> Self {
        let rows = blocks.iter().map(|b| b.rows).sum();
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut m = Self::zeros(rows, cols);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            for i in 0..b.rows {
                for j in 0..b.cols {
                    m[(r0 + i, c0 + j)] = b[(i, j)];
                }
            }
            r0 += b.rows;
            c0 += b.cols;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].to_vec())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Shape(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..rhs.cols {
                    out[(i, j)] = out[(i, j)] + a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.rows)
            .map(|i| (0..self.cols).fold(T::zero(), |acc, j| acc + self[(i, j)] * v[j]))
            .collect()
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if (self.rows, self.cols) != (rhs.rows, rhs.cols) {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    fn norm1(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).fold(T::zero(), |acc, i| acc + self[(i, j)].abs()))
            .fold(T::zero(), T::max)
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols && self.sub(&self.transpose()).is_ok_and(|d| d.max_abs() <= tol)
    }

    pub fn block(&self, rows: Range<usize>, cols: Range<usize>) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self[(rows.start + i, cols.start + j)])
    }

    pub fn hstack(blocks: &[RealMatrix<T>]) -> Result<Self> {
        let rows = blocks.first().map_or(0, |b| b.rows);
        if blocks.iter().any(|b| b.rows != rows) {
            return Err(Error::Shape("hstack needs equal row counts".into()));
        }
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut m = Self::zeros(rows, cols);
        let mut c0 = 0;
        for b in blocks {
            for i in 0..rows {
                for j in 0..b.cols {
                    m[(i, c0 + j)] = b[(i, j)];
                }
            }
            c0 += b.cols;
        }
        Ok(m)
    }

    /// Inverse by LU with partial pivoting; fails when the 1-norm condition
    /// number exceeds `condition_limit`.
    pub fn inverse(&self, condition_limit: f64) -> Result<Self> {
        if self.rows != self.cols {
            return Err(Error::Shape(format!("{}x{} is not square", self.rows, self.cols)));
        }
        let n = self.rows;
        let mut lu = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let pivot = (k..n)
                .max_by(|&i, &j| lu[(i, k)].abs().partial_cmp(&lu[(j, k)].abs()).expect("finite"))
                .expect("nonempty range");
            if lu[(pivot, k)] == T::zero() {
                return Err(Error::IllConditioned(f64::INFINITY));
            }
            if pivot != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, pivot * n + j);
                }
                perm.swap(k, pivot);
            }
            for i in k + 1..n {
                let f = lu[(i, k)] / lu[(k, k)];
                lu[(i, k)] = f;
                for j in k + 1..n {
                    lu[(i, j)] = lu[(i, j)] - f * lu[(k, j)];
                }
            }
        }
        let mut inv = Self::zeros(n, n);
        for col in 0..n {
            let mut y: Vec<T> = (0..n).map(|i| if perm[i] == col { T::one() } else { T::zero() }).collect();
            for i in 0..n {
                for k in 0..i {
                    y[i] = y[i] - lu[(i, k)] * y[k];
                }
            }
            for i in (0..n).rev() {
                for k in i + 1..n {
                    y[i] = y[i] - lu[(i, k)] * y[k];
                }
                y[i] = y[i] / lu[(i, i)];
            }
            for i in 0..n {
                inv[(i, col)] = y[i];
            }
        }
        let cond = (self.norm1() * inv.norm1()).to_f64().unwrap_or(f64::INFINITY);
        if !cond.is_finite() || cond > condition_limit {
            return Err(Error::IllConditioned(cond));
        }
        Ok(inv)
    }

    /// Eigenvalues (ascending) and eigenvectors (columns) of a symmetric
    /// matrix by cyclic Jacobi rotations.
    pub fn symmetric_eigen(&self) -> Result<(Vec<T>, RealMatrix<T>)> {
        if !self.is_symmetric(c::<T>(1e-8) * self.max_abs().max(T::one())) {
            return Err(Error::InvalidInput("matrix is not symmetric".into()));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut v = Self::identity(n);
        let eps = T::epsilon();
        for _ in 0..100 {
            let off = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .fold(T::zero(), |acc, (i, j)| acc + a[(i, j)] * a[(i, j)]);
            if off <= eps * eps * a.max_abs().max(T::min_positive_value()).powi(2) {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[(p, q)] == T::zero() {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (c::<T>(2.0) * a[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let cs = T::one() / (t * t + T::one()).sqrt();
                    let sn = t * cs;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = cs * akp - sn * akq;
                        a[(k, q)] = sn * akp + cs * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = cs * apk - sn * aqk;
                        a[(q, k)] = sn * apk + cs * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = cs * vkp - sn * vkq;
                        v[(k, q)] = sn * vkp + cs * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).expect("finite"));
        let values = order.iter().map(|&i| a[(i, i)]).collect();
        let vectors = Self::from_fn(n, n, |i, j| v[(i, order[j])]);
        Ok((values, vectors))
    }

    /// Orthonormal basis (columns) of the numerical null space.
    pub fn null_space(&self, tol: T) -> Result<Self> {
        let gram = self.transpose().mul(self)?;
        let (values, vectors) = gram.symmetric_eigen()?;
        let scale = values.last().copied().unwrap_or(T::zero()).max(T::one());
        let cols: Vec<usize> = (0..values.len()).filter(|&k| values[k] <= tol * scale).collect();
        Ok(Self::from_fn(self.cols, cols.len(), |i, j| vectors[(i, cols[j])]))
    }

    pub fn numerical_rank(&self, tol: T) -> Result<usize> {
        Ok(self.cols - self.null_space(tol)?.cols)
    }
}

impl<T> std::ops::Index<(usize, usize)> for RealMatrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for RealMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// `K_0..=K_T` and feedback gains for `t = 0..T`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution<T> {
    pub k: Vec<RealMatrix<T>>,
    /// `-(BᵀK_t B)^{-1} BᵀK_t A`.
    pub gains: Vec<RealMatrix<T>>,
    /// `-(BᵀK_{t+1} B)^{-1} BᵀK_{t+1} A`.
    pub gains_next: Vec<RealMatrix<T>>,
}

fn gain<T: RealScalar>(a: &RealMatrix<T>, b: &RealMatrix<T>, k: &RealMatrix<T>) -> Result<RealMatrix<T>> {
    let btk = b.transpose().mul(k)?;
    let inv = btk.mul(b)?.inverse(DEFAULT_CONDITION_LIMIT)?;
    Ok(inv.mul(&btk)?.mul(a)?.scale(-T::one()))
}

/// Backward Riccati recursion from `K_T = P`.
pub fn riccati_backward<T: RealScalar>(
    a: &RealMatrix<T>,
    b: &RealMatrix<T>,
    p: &RealMatrix<T>,
    horizon: usize,
) -> Result<RiccatiSolution<T>> {
    let n = a.rows;
    if a.cols != n || b.rows != n || p.rows != n || p.cols != n {
        return Err(Error::Shape("A and P must be n x n and B n x m".into()));
    }
    if horizon == 0 {
        return Err(Error::InvalidHorizon("finite horizon needs T >= 1".into()));
    }
    let tol = c::<T>(1e-10);
    if !p.is_symmetric(tol * p.max_abs().max(T::one())) {
        return Err(Error::PreconditionFailed("P is not symmetric".into()));
    }
    let (eig, _) = p.symmetric_eigen()?;
    if eig.first().is_some_and(|&l| l <= T::zero()) {
        return Err(Error::PreconditionFailed("P is not positive definite".into()));
    }
    if b.cols > 0 && b.numerical_rank(c(1e-12))? < b.cols {
        return Err(Error::PreconditionFailed("B does not have full column rank".into()));
    }
    let at = a.transpose();
    let mut k = vec![RealMatrix::zeros(n, n); horizon + 1];
    k[horizon] = p.clone();
    for t in (0..horizon).rev() {
        let kn = &k[t + 1];
        let mut next = p.add(&at.mul(kn)?.mul(a)?)?;
        if b.cols > 0 {
            let ktb = kn.mul(b)?;
            let inv = b.transpose().mul(&ktb)?.inverse(DEFAULT_CONDITION_LIMIT)?;
            let corr = at.mul(&ktb)?.mul(&inv)?.mul(&ktb.transpose())?.mul(a)?;
            next = next.sub(&corr)?;
        }
        // Symmetrise against round-off.
        k[t] = next.add(&next.transpose())?.scale(c(0.5));
    }
    let mut gains = Vec::with_capacity(horizon);
    let mut gains_next = Vec::with_capacity(horizon);
    for t in 0..horizon {
        if b.cols == 0 {
            gains.push(RealMatrix::zeros(0, n));
            gains_next.push(RealMatrix::zeros(0, n));
        } else {
            gains.push(gain(a, b, &k[t])?);
            gains_next.push(gain(a, b, &k[t + 1])?);
        }
    }
    Ok(RiccatiSolution { k, gains, gains_next })
}

/// `Σ_{t=0..T} x_tᵀ P x_t` along `x_{t+1} = (A + B G_t) x_t`.
pub fn trajectory_cost<T: RealScalar>(
    a: &RealMatrix<T>,
    b: &RealMatrix<T>,
    p: &RealMatrix<T>,
    gains: &[RealMatrix<T>],
    x0: &[T],
) -> T {
    let quad = |x: &[T]| {
        let px = p.mul_vec(x);
        x.iter().zip(&px).fold(T::zero(), |acc, (&u, &v)| acc + u * v)
    };
    let mut x = x0.to_vec();
    let mut total = quad(&x);
    for g in gains {
        let u = g.mul_vec(&x);
        let ax = a.mul_vec(&x);
        let bu = b.mul_vec(&u);
        x = ax.iter().zip(&bu).map(|(&p, &q)| p + q).collect();
        total = total + quad(&x);
    }
    total
}

/// `x0ᵀ K x0`.
pub fn quadratic_form<T: RealScalar>(k: &RealMatrix<T>, x0: &[T]) -> T {
    let kx = k.mul_vec(x0);
    x0.iter().zip(&kx).fold(T::zero(), |acc, (&u, &v)| acc + u * v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDiagonalReport {
    pub holds: bool,
    /// `SᵀPS` is block diagonal, that is, the parts are `P`-orthogonal.
    pub p_block_diagonal: bool,
    pub max_offdiag_k: f64,
    pub max_offdiag_gain: f64,
    pub max_block_k_error: f64,
    pub max_block_gain_error: f64,
    pub input_dims: Vec<usize>,
}

fn offsets(dims: &[usize]) -> Vec<Range<usize>> {
    let mut start = 0;
    dims.iter()
        .map(|&d| {
            let r = start..start + d;
            start += d;
            r
        })
        .collect()
}

fn max_offdiag<T: RealScalar>(m: &RealMatrix<T>, rows: &[Range<usize>], cols: &[Range<usize>]) -> T {
    let mut worst = T::zero();
    for (i, r) in rows.iter().enumerate() {
        for (j, cr) in cols.iter().enumerate() {
            if i != j {
                worst = worst.max(m.block(r.clone(), cr.clone()).max_abs());
            }
        }
    }
    worst
}

/// Checks that the adapted basis `S = [S_1 | ... | S_r]` of the `parts`
/// (basis columns of each invariant subspace) block-diagonalises the
/// Riccati recursion and the gains, and that per-block recursions on
/// `(A_i, B_i, P_i)` reproduce the diagonal blocks.
pub fn block_diagonal_check<T: RealScalar>(
    a: &RealMatrix<T>,
    b: &RealMatrix<T>,
    p: &RealMatrix<T>,
    parts: &[RealMatrix<T>],
    horizon: usize,
    tol: T,
) -> Result<BlockDiagonalReport> {
    let n = a.rows;
    let m = b.cols;
    let s = RealMatrix::hstack(parts)?;
    if s.rows != n || s.cols != n {
        return Err(Error::PreconditionFailed(format!(
            "parts span {} columns in dimension {}, need a basis of R^{n}",
            s.cols, s.rows
        )));
    }
    let s_inv = s
        .inverse(DEFAULT_CONDITION_LIMIT)
        .map_err(|_| Error::PreconditionFailed("parts do not form a direct sum".into()))?;
    let dims: Vec<usize> = parts.iter().map(|x| x.cols).collect();
    let x_blocks = offsets(&dims);

    let a_tilde = s_inv.mul(a)?.mul(&s)?;
    let scale = a.max_abs().max(T::one());
    for (j, cols) in x_blocks.iter().enumerate() {
        for (i, rows) in x_blocks.iter().enumerate() {
            if i != j && a_tilde.block(rows.clone(), cols.clone()).max_abs() > tol * scale {
                return Err(Error::PreconditionFailed(format!("part {j} is not A-invariant")));
            }
        }
    }

    // E_i: inputs whose image has no component outside part i.
    let b_tilde = s_inv.mul(b)?;
    let mut e_bases = Vec::with_capacity(parts.len());
    for (i, rows) in x_blocks.iter().enumerate() {
        let other_rows: Vec<usize> = (0..n).filter(|r| !rows.contains(r)).collect();
        let others = RealMatrix::from_fn(other_rows.len(), m, |r, col| b_tilde[(other_rows[r], col)]);
        let e = others.null_space(c(1e-10))?;
        e_bases.push(e);
        let _ = i;
    }
    let input_dims: Vec<usize> = e_bases.iter().map(|e| e.cols).collect();
    if input_dims.iter().sum::<usize>() != m {
        return Err(Error::PreconditionFailed(
            "range condition fails: the preimages of the parts do not span the input space".into(),
        ));
    }
    let w = RealMatrix::hstack(&e_bases)?;
    let w_inv = w
        .inverse(DEFAULT_CONDITION_LIMIT)
        .map_err(|_| Error::PreconditionFailed("range condition fails: preimages are dependent".into()))?;
    let u_blocks = offsets(&input_dims);
    let b_hat = b_tilde.mul(&w)?;
    let p_tilde = s.transpose().mul(p)?.mul(&s)?;
    let p_block_diagonal = max_offdiag(&p_tilde, &x_blocks, &x_blocks) <= tol * p.max_abs().max(T::one());

    let full = riccati_backward(a, b, p, horizon)?;
    let mut max_offdiag_k = T::zero();
    let mut max_offdiag_gain = T::zero();
    let k_tilde: Vec<RealMatrix<T>> = full
        .k
        .iter()
        .map(|k| s.transpose().mul(k)?.mul(&s))
        .collect::<Result<_>>()?;
    let g_tilde: Vec<RealMatrix<T>> = full
        .gains
        .iter()
        .map(|g| w_inv.mul(g)?.mul(&s))
        .collect::<Result<_>>()?;
    for k in &k_tilde {
        max_offdiag_k = max_offdiag_k.max(max_offdiag(k, &x_blocks, &x_blocks));
    }
    for g in &g_tilde {
        max_offdiag_gain = max_offdiag_gain.max(max_offdiag(g, &u_blocks, &x_blocks));
    }

    let mut max_block_k_error = T::zero();
    let mut max_block_gain_error = T::zero();
    for (i, rows) in x_blocks.iter().enumerate() {
        let a_i = a_tilde.block(rows.clone(), rows.clone());
        let b_i = b_hat.block(rows.clone(), u_blocks[i].clone());
        let p_i = p_tilde.block(rows.clone(), rows.clone());
        let p_i = p_i.add(&p_i.transpose())?.scale(c(0.5));
        let block = riccati_backward(&a_i, &b_i, &p_i, horizon)?;
        for (t, k) in block.k.iter().enumerate() {
            let err = k.sub(&k_tilde[t].block(rows.clone(), rows.clone()))?.max_abs();
            max_block_k_error = max_block_k_error.max(err);
        }
        for (t, g) in block.gains.iter().enumerate() {
            let err = g.sub(&g_tilde[t].block(u_blocks[i].clone(), rows.clone()))?.max_abs();
            max_block_gain_error = max_block_gain_error.max(err);
        }
    }
    let f = |v: T| v.to_f64().unwrap_or(f64::INFINITY);
    let holds = p_block_diagonal
        && max_offdiag_k <= tol
        && max_offdiag_gain <= tol
        && max_block_k_error <= tol
        && max_block_gain_error <= tol;
    Ok(BlockDiagonalReport {
        holds,
        p_block_diagonal,
        max_offdiag_k: f(max_offdiag_k),
        max_offdiag_gain: f(max_offdiag_gain),
        max_block_k_error: f(max_block_k_error),
        max_block_gain_error: f(max_block_gain_error),
        input_dims,
    })
}
