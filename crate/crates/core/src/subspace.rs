//! Subspaces of GF(p)^n and direct-sum decompositions.
//!
//! A [`Subspace`] keeps its basis in reduced column echelon form, which is
//! unique per subspace, so `==` on subspaces is equality of spans.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::matrix::MatrixFp;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Subspace {
    ambient_dim: usize,
    /// `ambient_dim x dim`, reduced column echelon form.
    basis: MatrixFp,
    /// Pivot coordinate of each basis column.
    pivots: Vec<usize>,
}

impl Subspace {
    /// Span of the given vectors.
    pub fn span(field: PrimeField, ambient_dim: usize, vectors: &[Vec<u32>]) -> Self {
        let rows: Vec<Vec<i64>> = vectors
            .iter()
            .map(|v| {
                assert_eq!(v.len(), ambient_dim, "vector outside ambient space");
                v.iter().map(|&x| x as i64).collect()
            })
            .collect();
        if rows.is_empty() {
            return Self::zero(field, ambient_dim);
        }
        let m = MatrixFp::from_rows(field, &rows).expect("rows have equal length");
        let r = m.rref();
        let kept: Vec<usize> = (0..r.rank).collect();
        // Nonzero rows of the RREF, transposed into columns.
        let basis = r.matrix.transpose().select_columns(&kept);
        Self {
            ambient_dim,
            basis,
            pivots: r.pivot_cols,
        }
    }

    /// Column space of `m`.
    pub fn column_space(m: &MatrixFp) -> Self {
        Self::span(m.field(), m.rows(), &m.columns())
    }

    pub fn zero(field: PrimeField, ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            basis: MatrixFp::zeros(field, ambient_dim, 0),
            pivots: Vec::new(),
        }
    }

    pub fn full(field: PrimeField, ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            basis: MatrixFp::identity(field, ambient_dim),
            pivots: (0..ambient_dim).collect(),
        }
    }

    pub fn field(&self) -> PrimeField {
        self.basis.field()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.cols()
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn is_full(&self) -> bool {
        self.dim() == self.ambient_dim
    }

    /// Canonical basis, one vector per column.
    pub fn basis(&self) -> &MatrixFp {
        &self.basis
    }

    pub fn basis_vectors(&self) -> Vec<Vec<u32>> {
        self.basis.columns()
    }

    pub fn contains(&self, v: &[u32]) -> bool {
        assert_eq!(v.len(), self.ambient_dim, "vector outside ambient space");
        let f = self.field();
        let mut r = v.to_vec();
        for (k, &piv) in self.pivots.iter().enumerate() {
            let c = r[piv];
            if c == 0 {
                continue;
            }
            for (i, x) in r.iter_mut().enumerate() {
                *x = f.sub(*x, f.mul(c, self.basis.get(i, k)));
            }
        }
        r.iter().all(|&x| x == 0)
    }

    pub fn contains_subspace(&self, other: &Subspace) -> bool {
        other.basis_vectors().iter().all(|v| self.contains(v))
    }

    fn check_ambient(&self, other: &Subspace) -> Result<()> {
        if self.ambient_dim != other.ambient_dim {
            return Err(Error::Shape(format!(
                "subspaces of GF(p)^{} and GF(p)^{}",
                self.ambient_dim, other.ambient_dim
            )));
        }
        if self.field() != other.field() {
            return Err(Error::ModulusMismatch(
                self.field().modulus(),
                other.field().modulus(),
            ));
        }
        Ok(())
    }

    /// Image of the subspace under `m`.
    pub fn image(&self, m: &MatrixFp) -> Result<Subspace> {
        if m.cols() != self.ambient_dim {
            return Err(Error::Shape(format!(
                "map with {} columns applied to subspace of dimension-{} space",
                m.cols(),
                self.ambient_dim
            )));
        }
        Ok(Subspace::column_space(&m.mul(&self.basis)?))
    }
}

/// `{v : M v = 0}`.
pub fn null_space(m: &MatrixFp) -> Subspace {
    let field = m.field();
    let r = m.rref();
    let mut vectors = Vec::new();
    let mut is_pivot = vec![false; m.cols()];
    for &c in &r.pivot_cols {
        is_pivot[c] = true;
    }
    for free in (0..m.cols()).filter(|&c| !is_pivot[c]) {
        let mut v = vec![0u32; m.cols()];
        v[free] = 1;
        for (row, &pc) in r.pivot_cols.iter().enumerate() {
            v[pc] = field.neg(r.matrix.get(row, free));
        }
        vectors.push(v);
    }
    Subspace::span(field, m.cols(), &vectors)
}

pub fn subspace_sum(s: &Subspace, t: &Subspace) -> Result<Subspace> {
    s.check_ambient(t)?;
    let mut vectors = s.basis_vectors();
    vectors.extend(t.basis_vectors());
    Ok(Subspace::span(s.field(), s.ambient_dim, &vectors))
}

/// Sum of any number of subspaces of a common ambient space.
pub fn subspace_sum_all(field: PrimeField, ambient_dim: usize, parts: &[Subspace]) -> Result<Subspace> {
    let mut acc = Subspace::zero(field, ambient_dim);
    for s in parts {
        acc = subspace_sum(&acc, s)?;
    }
    Ok(acc)
}

/// Intersection via the kernel of `[S | -T]`.
pub fn subspace_intersect(s: &Subspace, t: &Subspace) -> Result<Subspace> {
    s.check_ambient(t)?;
    let field = s.field();
    let stacked = s.basis.hstack(&t.basis.scale(field.neg(1)))?;
    let kernel = null_space(&stacked);
    let k = s.dim();
    let vectors: Vec<Vec<u32>> = kernel
        .basis_vectors()
        .iter()
        .map(|coef| s.basis.mul_vec(&coef[..k]))
        .collect();
    Ok(Subspace::span(field, s.ambient_dim, &vectors))
}

/// `{u : M u ∈ S}`.
pub fn preimage(m: &MatrixFp, s: &Subspace) -> Result<Subspace> {
    if m.rows() != s.ambient_dim {
        return Err(Error::Shape(format!(
            "map into GF(p)^{} but subspace lives in GF(p)^{}",
            m.rows(),
            s.ambient_dim
        )));
    }
    let field = m.field();
    let stacked = m.hstack(&s.basis.scale(field.neg(1)))?;
    let kernel = null_space(&stacked);
    let vectors: Vec<Vec<u32>> = kernel
        .basis_vectors()
        .iter()
        .map(|v| v[..m.cols()].to_vec())
        .collect();
    Ok(Subspace::span(field, m.cols(), &vectors))
}

/// True when the parts are linearly independent (their sum is direct).
pub fn is_independent(parts: &[Subspace]) -> bool {
    let Some(first) = parts.first() else {
        return true;
    };
    let total: usize = parts.iter().map(Subspace::dim).sum();
    match subspace_sum_all(first.field(), first.ambient_dim, parts) {
        Ok(sum) => sum.dim() == total,
        Err(_) => false,
    }
}

/// True when the parts form a direct sum equal to the whole ambient space.
pub fn is_direct_sum(parts: &[Subspace]) -> bool {
    let Some(first) = parts.first() else {
        return false;
    };
    let total: usize = parts.iter().map(Subspace::dim).sum();
    total == first.ambient_dim && is_independent(parts)
}

/// `A S ⊆ S`.
pub fn is_invariant(a: &MatrixFp, s: &Subspace) -> bool {
    if !a.is_square() || a.rows() != s.ambient_dim {
        return false;
    }
    s.basis_vectors().iter().all(|b| s.contains(&a.mul_vec(b)))
}

/// `X = X_1 ⊕ ... ⊕ X_r` with `r > 1`, plus the change-of-basis data that
/// realises the projections `ρ_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectSumDecomposition {
    ambient_dim: usize,
    parts: Vec<Subspace>,
    change_of_basis: MatrixFp,
    inverse_change_of_basis: MatrixFp,
    offsets: Vec<usize>,
}

impl DirectSumDecomposition {
    pub fn new(parts: Vec<Subspace>) -> Result<Self> {
        if parts.len() < 2 {
            return Err(Error::NotDirectSum(format!(
                "need at least two parts, got {}",
                parts.len()
            )));
        }
        let field = parts[0].field();
        let n = parts[0].ambient_dim;
        for (i, s) in parts.iter().enumerate() {
            if s.ambient_dim != n || s.field() != field {
                return Err(Error::NotDirectSum(format!(
                    "part {i} lives in a different ambient space"
                )));
            }
        }
        if !is_direct_sum(&parts) {
            let dims: Vec<usize> = parts.iter().map(Subspace::dim).collect();
            return Err(Error::NotDirectSum(format!(
                "part dimensions {dims:?} in ambient dimension {n}"
            )));
        }
        let mut columns = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(parts.len() + 1);
        offsets.push(0);
        for s in &parts {
            columns.extend(s.basis_vectors());
            offsets.push(columns.len());
        }
        let change_of_basis = MatrixFp::from_columns(field, n, &columns);
        let inverse_change_of_basis = change_of_basis.inverse()?;
        Ok(Self {
            ambient_dim: n,
            parts,
            change_of_basis,
            inverse_change_of_basis,
            offsets,
        })
    }

    pub fn field(&self) -> PrimeField {
        self.change_of_basis.field()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn parts(&self) -> &[Subspace] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn part_dim(&self, i: usize) -> usize {
        self.parts[i].dim()
    }

    /// Coordinate range of part `i` inside the adapted basis.
    pub fn range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn change_of_basis(&self) -> &MatrixFp {
        &self.change_of_basis
    }

    pub fn inverse_change_of_basis(&self) -> &MatrixFp {
        &self.inverse_change_of_basis
    }

    /// Coordinates of `ρ_i(x)` in the canonical basis of part `i`.
    pub fn coordinates(&self, i: usize, x: &[u32]) -> Vec<u32> {
        let c = self.inverse_change_of_basis.mul_vec(x);
        c[self.range(i)].to_vec()
    }

    /// All part coordinates at once.
    pub fn all_coordinates(&self, x: &[u32]) -> Vec<Vec<u32>> {
        let c = self.inverse_change_of_basis.mul_vec(x);
        (0..self.parts.len()).map(|i| c[self.range(i)].to_vec()).collect()
    }

    /// Part coordinates back to the ambient space.
    pub fn embed(&self, i: usize, coords: &[u32]) -> Vec<u32> {
        self.parts[i].basis().mul_vec(coords)
    }

    /// Components `x_i = ρ_i(x)`; they sum to `x`.
    pub fn decompose_vector(&self, x: &[u32]) -> Vec<Vec<u32>> {
        self.all_coordinates(x)
            .iter()
            .enumerate()
            .map(|(i, c)| self.embed(i, c))
            .collect()
    }

    /// `ρ_i` as an `n x n` matrix.
    pub fn projection(&self, i: usize) -> MatrixFp {
        let rows: Vec<usize> = self.range(i).collect();
        let coord_rows = self
            .inverse_change_of_basis
            .transpose()
            .select_columns(&rows)
            .transpose();
        self.parts[i]
            .basis()
            .mul(&coord_rows)
            .expect("shapes agree by construction")
    }

    /// Rows of `P^{-1} M` belonging to part `i`: the part-`i` coordinates of
    /// `ρ_i ∘ M`.
    pub fn coordinate_block(&self, i: usize, m: &MatrixFp) -> Result<MatrixFp> {
        Ok(self.inverse_change_of_basis.mul(m)?.row_block(self.range(i)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gf(p: u64) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    fn span3(vs: &[[u32; 3]]) -> Subspace {
        let v: Vec<Vec<u32>> = vs.iter().map(|x| x.to_vec()).collect();
        Subspace::span(gf(3), 3, &v)
    }

    fn example_b() -> MatrixFp {
        MatrixFp::from_rows(gf(3), &[[1, 0], [1, 1], [0, 1]]).unwrap()
    }

    fn example_a() -> MatrixFp {
        MatrixFp::from_rows(gf(3), &[[1, 1, 0], [0, 2, 0], [0, 0, 1]]).unwrap()
    }

    fn example_parts() -> Vec<Subspace> {
        vec![span3(&[[1, 0, 0]]), span3(&[[1, 1, 0]]), span3(&[[0, 0, 1]])]
    }

    #[test]
    fn null_space_examples() {
        let f = gf(3);
        assert!(null_space(&MatrixFp::identity(f, 3)).is_zero());
        let ns = null_space(&MatrixFp::zeros(f, 3, 2));
        assert_eq!(ns, Subspace::full(f, 2));
        assert!(null_space(&example_b()).is_zero());
    }

    #[test]
    fn sum_examples() {
        let f = gf(3);
        let s = span3(&[[1, 2, 0], [0, 1, 1]]);
        assert_eq!(subspace_sum(&s, &Subspace::zero(f, 3)).unwrap(), s);
        let e12 = subspace_sum(&span3(&[[1, 0, 0]]), &span3(&[[0, 1, 0]])).unwrap();
        assert_eq!(e12.dim(), 2);
        assert!(subspace_sum(&s, &Subspace::zero(f, 2)).is_err());
    }

    #[test]
    fn intersection_examples() {
        let s = span3(&[[1, 2, 0], [0, 1, 1]]);
        assert_eq!(subspace_intersect(&s, &s).unwrap(), s);
        let rb = Subspace::column_space(&example_b());
        let parts = example_parts();
        assert!(subspace_intersect(&rb, &parts[0]).unwrap().is_zero());
        assert!(subspace_intersect(&rb, &parts[2]).unwrap().is_zero());
        assert_eq!(subspace_intersect(&rb, &parts[1]).unwrap(), parts[1]);
    }

    #[test]
    fn preimage_examples() {
        let f = gf(3);
        let b = example_b();
        assert_eq!(preimage(&b, &Subspace::full(f, 3)).unwrap(), Subspace::full(f, 2));
        let parts = example_parts();
        let e2 = preimage(&b, &parts[1]).unwrap();
        assert_eq!(e2, Subspace::span(f, 2, &[vec![1, 0]]));
        assert!(preimage(&b, &parts[0]).unwrap().is_zero());
        assert!(preimage(&b, &Subspace::full(f, 2)).is_err());
    }

    #[test]
    fn direct_sum_examples() {
        let e = |i: usize| {
            let mut v = [0u32; 3];
            v[i] = 1;
            span3(&[v])
        };
        assert!(is_direct_sum(&[e(0), e(1), e(2)]));
        assert!(!is_direct_sum(&[e(0), e(0)]));
        assert!(is_direct_sum(&example_parts()));
    }

    #[test]
    fn invariance_examples() {
        let f = gf(3);
        let a = example_a();
        assert!(is_invariant(&a, &Subspace::full(f, 3)));
        assert!(is_invariant(&a, &example_parts()[1]));
        assert!(!is_invariant(&a, &span3(&[[0, 1, 0]])));
    }

    #[test]
    fn decompose_vector_examples() {
        let d = DirectSumDecomposition::new(example_parts()).unwrap();
        assert_eq!(d.decompose_vector(&[0, 0, 0]), vec![vec![0; 3]; 3]);
        assert_eq!(
            d.decompose_vector(&[1, 2, 0]),
            vec![vec![2, 0, 0], vec![2, 2, 0], vec![0, 0, 0]]
        );
        // x = [a1, a2, a3] splits as (a1 + 2 a2) e1 + a2 [1,1,0] + a3 e3.
        for a1 in 0..3u32 {
            for a2 in 0..3u32 {
                for a3 in 0..3u32 {
                    let comps = d.decompose_vector(&[a1, a2, a3]);
                    assert_eq!(comps[0], vec![(a1 + 2 * a2) % 3, 0, 0]);
                    assert_eq!(comps[1], vec![a2, a2, 0]);
                    assert_eq!(comps[2], vec![0, 0, a3]);
                }
            }
        }
        let rho2 = d.projection(1);
        assert_eq!(rho2.mul_vec(&[1, 2, 0]), vec![2, 2, 0]);
    }

    #[test]
    fn decomposition_rejects_bad_parts() {
        let p = example_parts();
        assert!(DirectSumDecomposition::new(vec![p[0].clone()]).is_err());
        assert!(DirectSumDecomposition::new(vec![p[0].clone(), p[1].clone()]).is_err());
    }

    fn random_vectors(p: u32, n: usize, k: usize) -> impl Strategy<Value = Vec<Vec<u32>>> {
        prop::collection::vec(prop::collection::vec(0..p, n), 0..=k)
    }

    fn prime_and_dim() -> impl Strategy<Value = (u32, usize)> {
        (prop::sample::select(vec![2u32, 3, 5]), 1usize..5)
    }

    proptest! {
        #[test]
        fn dimension_law((p, n) in prime_and_dim(), seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let f = gf(p as u64);
            let mut rand_span = || {
                let k = rng.gen_range(0..=n);
                let vs: Vec<Vec<u32>> = (0..k).map(|_| (0..n).map(|_| rng.gen_range(0..p)).collect()).collect();
                Subspace::span(f, n, &vs)
            };
            let s = rand_span();
            let t = rand_span();
            let sum = subspace_sum(&s, &t).unwrap();
            let cap = subspace_intersect(&s, &t).unwrap();
            prop_assert_eq!(sum.dim() + cap.dim(), s.dim() + t.dim());
            prop_assert!(s.contains_subspace(&cap) && t.contains_subspace(&cap));
            prop_assert!(sum.contains_subspace(&s) && sum.contains_subspace(&t));
        }

        #[test]
        fn canonical_basis_is_unique((p, n) in prime_and_dim(), seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let f = gf(p as u64);
            let k = rng.gen_range(0..=n);
            let vs: Vec<Vec<u32>> = (0..k).map(|_| (0..n).map(|_| rng.gen_range(0..p)).collect()).collect();
            let s = Subspace::span(f, n, &vs);
            // Random invertible recombination of the basis plus redundant vectors.
            let mut others: Vec<Vec<u32>> = s.basis_vectors();
            for _ in 0..3 {
                if others.is_empty() { break; }
                let i = rng.gen_range(0..others.len());
                let j = rng.gen_range(0..others.len());
                let c = rng.gen_range(1..p);
                if i != j {
                    let vj = others[j].clone();
                    for (x, y) in others[i].iter_mut().zip(&vj) {
                        *x = f.add(*x, f.mul(c, *y));
                    }
                }
                let extra: Vec<u32> = others[j].iter().map(|&x| f.mul(x, c)).collect();
                others.push(extra);
            }
            others.reverse();
            prop_assert_eq!(Subspace::span(f, n, &others), s);
        }

        #[test]
        fn preimage_maps_into_target(rows in 1usize..4, cols in 1usize..4, entries in random_vectors(3, 16, 16), target in random_vectors(3, 4, 3)) {
            let f = gf(3);
            let flat: Vec<u32> = entries.concat().into_iter().chain(std::iter::repeat(1)).take(rows * cols).collect();
            let m = MatrixFp::from_raw(f, rows, cols, flat);
            let tv: Vec<Vec<u32>> = target.into_iter().map(|v| v.into_iter().chain(std::iter::repeat(0)).take(rows).collect()).collect();
            let s = Subspace::span(f, rows, &tv);
            let pre = preimage(&m, &s).unwrap();
            for b in pre.basis_vectors() {
                prop_assert!(s.contains(&m.mul_vec(&b)));
            }
            prop_assert!(pre.contains_subspace(&null_space(&m)));
            // Brute force: every u with Mu in S is in the preimage.
            let total = 3usize.pow(cols as u32);
            for idx in 0..total {
                let u: Vec<u32> = (0..cols).map(|k| ((idx / 3usize.pow(k as u32)) % 3) as u32).collect();
                prop_assert_eq!(s.contains(&m.mul_vec(&u)), pre.contains(&u));
            }
        }
    }

    #[test]
    fn decompose_vector_exhaustive() {
        let f = gf(3);
        let parts = vec![
            Subspace::span(f, 4, &[vec![1, 1, 0, 0], vec![0, 2, 2, 0]]),
            Subspace::span(f, 4, &[vec![0, 0, 1, 1]]),
            Subspace::span(f, 4, &[vec![0, 0, 0, 2]]),
        ];
        let d = DirectSumDecomposition::new(parts).unwrap();
        for idx in 0..81usize {
            let x: Vec<u32> = (0..4).map(|k| ((idx / 3usize.pow(k)) % 3) as u32).collect();
            let comps = d.decompose_vector(&x);
            let mut sum = vec![0u32; 4];
            for (i, c) in comps.iter().enumerate() {
                assert!(d.parts()[i].contains(c));
                for (s, v) in sum.iter_mut().zip(c) {
                    *s = f.add(*s, *v);
                }
            }
            assert_eq!(sum, x);
        }
    }
}
