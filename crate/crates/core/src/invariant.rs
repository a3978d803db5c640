//! Invariant-subspace decompositions of the state space.
//!
//! The automatic route factors the characteristic polynomial and takes the
//! primary components `ker f_i(A)^{m_i}`; finer user-supplied splits go
//! through [`verify_decomposition`].

use crate::error::{Error, Result};
use crate::matrix::MatrixFp;
use crate::poly::{poly_eval_matrix, poly_gcd, PolyFp};
use crate::subspace::{is_invariant, null_space, DirectSumDecomposition, Subspace};

/// `det(xI - A)` by the Samuelson-Berkowitz recurrence. Division free, so it
/// is valid in every characteristic.
pub fn char_poly(a: &MatrixFp) -> Result<PolyFp> {
    if !a.is_square() {
        return Err(Error::Shape(format!(
            "characteristic polynomial of a {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    let f = a.field();
    let n = a.rows();
    // Coefficients, highest degree first, of the leading r x r block.
    let mut c: Vec<u32> = vec![1];
    for r in 0..n {
        // Toeplitz column: 1, -a_rr, -R S, -R M S, ..., -R M^{r-1} S.
        let mut t = Vec::with_capacity(r + 2);
        t.push(1);
        t.push(f.neg(a.get(r, r)));
        let mut v: Vec<u32> = (0..r).map(|i| a.get(i, r)).collect();
        for _ in 0..r {
            let rs = (0..r).fold(0u32, |acc, j| f.add(acc, f.mul(a.get(r, j), v[j])));
            t.push(f.neg(rs));
            v = (0..r)
                .map(|i| (0..r).fold(0u32, |acc, j| f.add(acc, f.mul(a.get(i, j), v[j]))))
                .collect();
        }
        // New coefficients: lower-triangular Toeplitz (r+2)x(r+1) times c.
        let next: Vec<u32> = (0..r + 2)
            .map(|i| {
                (0..=r.min(i)).fold(0u32, |acc, j| {
                    if i - j < t.len() && j < c.len() {
                        f.add(acc, f.mul(t[i - j], c[j]))
                    } else {
                        acc
                    }
                })
            })
            .collect();
        c = next;
    }
    c.reverse();
    Ok(PolyFp::from_residues(f, c))
}

/// Monic irreducible factorization `Π f_i^{m_i}` of a characteristic polynomial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharPolyFactorization {
    pub char_poly: PolyFp,
    pub factors: Vec<(PolyFp, u32)>,
}

impl CharPolyFactorization {
    pub fn of(a: &MatrixFp) -> Result<Self> {
        let char_poly = char_poly(a)?;
        let factors = factor_poly(&char_poly)?;
        Ok(Self { char_poly, factors })
    }

    pub fn product(&self) -> PolyFp {
        self.factors
            .iter()
            .fold(PolyFp::one(self.char_poly.field()), |acc, (g, m)| {
                acc.mul(&g.pow(*m as u64))
            })
    }
}

/// Square-free decomposition of a monic polynomial: pairs `(g, i)` with the
/// `g` square-free, pairwise coprime and `f = Π g^i`.
fn square_free(f: &PolyFp) -> Vec<(PolyFp, u32)> {
    let field = f.field();
    let p = field.modulus();
    let mut out = Vec::new();
    if f.degree().unwrap_or(0) == 0 {
        return out;
    }
    let d = f.derivative();
    let mut c = poly_gcd(f, &d).expect("f is nonzero");
    let mut w = f.exact_div(&c);
    let mut i = 1u32;
    while !w.is_one() {
        let y = poly_gcd(&w, &c).expect("w is nonzero");
        let z = w.exact_div(&y);
        if !z.is_one() {
            out.push((z, i));
        }
        i += 1;
        w = y;
        c = c.exact_div(&w);
    }
    if !c.is_one() {
        // c is a p-th power: its p-th root keeps every p-th coefficient.
        let root: Vec<u32> = c.coeffs().iter().step_by(p as usize).copied().collect();
        let root = PolyFp::from_residues(field, root);
        for (g, m) in square_free(&root) {
            out.push((g, m * p));
        }
    }
    out
}

/// Berlekamp splitting of a monic square-free polynomial into its monic
/// irreducible factors.
fn berlekamp(f: &PolyFp) -> Vec<PolyFp> {
    let field = f.field();
    let d = f.degree().expect("nonzero");
    if d <= 1 {
        return vec![f.clone()];
    }
    let p = field.modulus();
    // Row i of Q holds x^{ip} mod f.
    let xp = PolyFp::x(field).pow_mod(p as u64, f).expect("f nonzero");
    let mut q = MatrixFp::zeros(field, d, d);
    let mut row = PolyFp::one(field);
    for i in 0..d {
        for j in 0..d {
            q.set(i, j, row.coeff(j));
        }
        row = row.mul(&xp).rem(f).expect("f nonzero");
    }
    // v with v (Q - I) = 0, i.e. v^p = v mod f.
    let q_minus_i = q
        .sub(&MatrixFp::identity(field, d))
        .expect("same shape")
        .transpose();
    let kernel = null_space(&q_minus_i);
    let k = kernel.dim();
    if k == 1 {
        return vec![f.clone()];
    }
    let mut factors = vec![f.clone()];
    for v in kernel.basis_vectors() {
        if factors.len() == k {
            break;
        }
        let v = PolyFp::from_residues(field, v);
        if v.degree().unwrap_or(0) == 0 {
            continue;
        }
        let mut next = Vec::with_capacity(k);
        for h in factors {
            if h.degree() == Some(1) {
                next.push(h);
                continue;
            }
            let mut rest = h;
            for s in 0..p {
                if rest.is_one() {
                    break;
                }
                let shifted = v.sub(&PolyFp::constant(field, s));
                let g = poly_gcd(&rest, &shifted).expect("rest is nonzero");
                if !g.is_one() {
                    rest = rest.exact_div(&g);
                    next.push(g);
                }
            }
            debug_assert!(rest.is_one());
        }
        factors = next;
    }
    debug_assert_eq!(factors.len(), k);
    factors
}

/// Complete factorization of a monic polynomial into monic irreducibles,
/// sorted lexicographically by coefficient vector, constant term first.
pub fn factor_poly(f: &PolyFp) -> Result<Vec<(PolyFp, u32)>> {
    match f.degree() {
        None | Some(0) => {
            return Err(Error::InvalidInput(format!(
                "factorization needs degree >= 1, got {f}"
            )))
        }
        _ => {}
    }
    if !f.is_monic() {
        return Err(Error::InvalidInput(format!("{f} is not monic")));
    }
    let mut out = Vec::new();
    for (g, m) in square_free(f) {
        for irreducible in berlekamp(&g) {
            out.push((irreducible, m));
        }
    }
    out.sort_by(|a, b| a.0.lex_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(out)
}

/// Primary decomposition of `GF(p)^n` under `A`, with the factorization the
/// parts come from (part `i` belongs to `factors[i]`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimaryDecomposition {
    pub factorization: CharPolyFactorization,
    pub decomposition: DirectSumDecomposition,
}

pub fn primary_decomposition_detailed(a: &MatrixFp) -> Result<PrimaryDecomposition> {
    let factorization = CharPolyFactorization::of(a)?;
    if factorization.factors.len() < 2 {
        let (factor, multiplicity) = factorization
            .factors
            .first()
            .map(|(g, m)| (g.to_string(), *m))
            .unwrap_or_else(|| (factorization.char_poly.to_string(), 1));
        return Err(Error::NotDecomposable {
            factor,
            multiplicity,
        });
    }
    let mut parts = Vec::with_capacity(factorization.factors.len());
    for (g, m) in &factorization.factors {
        let block = poly_eval_matrix(&g.pow(*m as u64), a)?;
        parts.push(null_space(&block));
    }
    let decomposition = verify_decomposition(a, parts)?;
    Ok(PrimaryDecomposition {
        factorization,
        decomposition,
    })
}

/// `X = ⊕ ker f_i(A)^{m_i}`; errors with `NotDecomposable` when the
/// characteristic polynomial is a power of one irreducible.
pub fn primary_decomposition(a: &MatrixFp) -> Result<DirectSumDecomposition> {
    Ok(primary_decomposition_detailed(a)?.decomposition)
}

/// Checks that `parts` is a direct sum of `A`-invariant subspaces and builds
/// the change-of-basis data. Any direct sum of invariant parts is accepted,
/// including splits finer than the primary one.
pub fn verify_decomposition(a: &MatrixFp, parts: Vec<Subspace>) -> Result<DirectSumDecomposition> {
    if !a.is_square() {
        return Err(Error::Shape(format!(
            "dynamics matrix is {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if let Some(i) = parts.iter().position(|s| s.ambient_dim() != a.rows()) {
        return Err(Error::NotDirectSum(format!(
            "part {i} lives in dimension {}, expected {}",
            parts[i].ambient_dim(),
            a.rows()
        )));
    }
    let d = DirectSumDecomposition::new(parts)?;
    if let Some(part) = d.parts().iter().position(|s| !is_invariant(a, s)) {
        return Err(Error::NotInvariant { part });
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::PrimeField;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn gf(p: u64) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    fn example_a() -> MatrixFp {
        MatrixFp::from_rows(gf(3), &[[1, 1, 0], [0, 2, 0], [0, 0, 1]]).unwrap()
    }

    /// Determinant by Laplace expansion, used as an independent oracle.
    fn det_laplace(m: &[Vec<PolyFp>]) -> PolyFp {
        let n = m.len();
        let field = m[0][0].field();
        if n == 1 {
            return m[0][0].clone();
        }
        let mut acc = PolyFp::zero(field);
        for j in 0..n {
            let minor: Vec<Vec<PolyFp>> = m[1..]
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|(k, _)| *k != j)
                        .map(|(_, e)| e.clone())
                        .collect()
                })
                .collect();
            let term = m[0][j].mul(&det_laplace(&minor));
            acc = if j % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
        }
        acc
    }

    fn char_poly_oracle(a: &MatrixFp) -> PolyFp {
        let f = a.field();
        let n = a.rows();
        let m: Vec<Vec<PolyFp>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let c = f.neg(a.get(i, j));
                        if i == j {
                            PolyFp::from_residues(f, vec![c, 1])
                        } else {
                            PolyFp::constant(f, c)
                        }
                    })
                    .collect()
            })
            .collect();
        det_laplace(&m)
    }

    #[test]
    fn char_poly_examples() {
        let f3 = gf(3);
        assert_eq!(
            char_poly(&MatrixFp::zeros(f3, 3, 3)).unwrap(),
            PolyFp::new(f3, &[0, 0, 0, 1])
        );
        assert_eq!(
            char_poly(&MatrixFp::identity(f3, 2)).unwrap(),
            PolyFp::new(f3, &[1, 1, 1])
        );
        // (x - 1)^2 (x - 2) = (x + 2)^2 (x + 1).
        let expected = PolyFp::new(f3, &[2, 1])
            .pow(2)
            .mul(&PolyFp::new(f3, &[1, 1]));
        assert_eq!(char_poly(&example_a()).unwrap(), expected);
        assert!(char_poly(&MatrixFp::zeros(f3, 2, 3)).is_err());
        assert_eq!(char_poly(&MatrixFp::zeros(f3, 0, 0)).unwrap(), PolyFp::one(f3));
    }

    #[test]
    fn char_poly_matches_laplace_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let p = [2u64, 3, 5, 7][rng.gen_range(0..4)];
            let n = rng.gen_range(1..=5);
            let f = gf(p);
            let data = (0..n * n).map(|_| rng.gen_range(0..p as u32)).collect();
            let a = MatrixFp::from_raw(f, n, n, data);
            assert_eq!(char_poly(&a).unwrap(), char_poly_oracle(&a), "{a}");
        }
    }

    #[test]
    fn factor_examples() {
        let f2 = gf(2);
        let x = PolyFp::x(f2);
        assert_eq!(factor_poly(&x.pow(2)).unwrap(), vec![(x.clone(), 2)]);
        let x2p1 = PolyFp::new(f2, &[1, 0, 1]);
        assert_eq!(
            factor_poly(&x2p1).unwrap(),
            vec![(PolyFp::new(f2, &[1, 1]), 2)]
        );
        let f3 = gf(3);
        let xp1 = PolyFp::new(f3, &[1, 1]);
        let xp2 = PolyFp::new(f3, &[2, 1]);
        let g = xp2.pow(2).mul(&xp1);
        assert_eq!(factor_poly(&g).unwrap(), vec![(xp1, 1), (xp2, 2)]);
    }

    #[test]
    fn factor_rejects_bad_input() {
        let f5 = gf(5);
        assert!(factor_poly(&PolyFp::new(f5, &[1, 2])).is_err());
        assert!(factor_poly(&PolyFp::one(f5)).is_err());
        assert!(factor_poly(&PolyFp::zero(f5)).is_err());
    }

    #[test]
    fn factor_handles_pth_powers() {
        // (x^2 + x + 2)^3 (x + 1)^4 over GF(3); x^2 + x + 2 is irreducible there.
        let f3 = gf(3);
        let q = PolyFp::new(f3, &[2, 1, 1]);
        let l = PolyFp::new(f3, &[1, 1]);
        let g = q.pow(3).mul(&l.pow(4));
        assert_eq!(factor_poly(&g).unwrap(), vec![(l, 4), (q, 3)]);
        // x^4 + 1 over GF(2) is (x + 1)^4.
        let f2 = gf(2);
        assert_eq!(
            factor_poly(&PolyFp::new(f2, &[1, 0, 0, 0, 1])).unwrap(),
            vec![(PolyFp::new(f2, &[1, 1]), 4)]
        );
    }

    fn roots(g: &PolyFp) -> Vec<u32> {
        let f = g.field();
        (0..f.modulus()).filter(|&r| g.eval(f.elem(r as i64)).is_zero()).collect()
    }

    /// Irreducibility oracle for degree <= 3: no roots.
    fn irreducible_by_roots(g: &PolyFp) -> bool {
        let d = g.degree().unwrap();
        assert!(d <= 3);
        d == 1 || roots(g).is_empty()
    }

    proptest! {
        #[test]
        fn factorization_reconstructs_and_is_irreducible(pi in 0usize..3, coeffs in prop::collection::vec(0i64..7, 1..7)) {
            let f = gf([2u64, 3, 5][pi]);
            let mut c = coeffs.clone();
            c.push(1);
            let g = PolyFp::new(f, &c);
            let factors = factor_poly(&g).unwrap();
            let product = factors.iter().fold(PolyFp::one(f), |acc, (h, m)| acc.mul(&h.pow(*m as u64)));
            prop_assert_eq!(&product, &g);
            for w in factors.windows(2) {
                prop_assert!(w[0].0 != w[1].0);
            }
            for (h, _) in &factors {
                prop_assert!(h.is_monic());
                if h.degree().unwrap() <= 3 {
                    prop_assert!(irreducible_by_roots(h), "{} reducible", h);
                }
            }
            // Every root of g shows up as a linear factor.
            let linear: Vec<u32> = factors.iter().filter(|(h, _)| h.degree() == Some(1)).map(|(h, _)| f.neg(h.coeff(0))).collect();
            let mut r = roots(&g);
            let mut l = linear.clone();
            r.sort();
            l.sort();
            prop_assert_eq!(r, l);
        }
    }

    #[test]
    fn cayley_hamilton_random() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let p = [2u64, 3, 5][rng.gen_range(0..3)];
            let n = rng.gen_range(1..=5);
            let f = gf(p);
            let data = (0..n * n).map(|_| rng.gen_range(0..p as u32)).collect();
            let a = MatrixFp::from_raw(f, n, n, data);
            let cp = char_poly(&a).unwrap();
            assert!(poly_eval_matrix(&cp, &a).unwrap().is_zero());
        }
    }

    #[test]
    fn primary_decomposition_examples() {
        let f3 = gf(3);
        let diag = MatrixFp::from_rows(f3, &[[1, 0], [0, 2]]).unwrap();
        let pd = primary_decomposition_detailed(&diag).unwrap();
        let e1 = Subspace::span(f3, 2, &[vec![1, 0]]);
        let e2 = Subspace::span(f3, 2, &[vec![0, 1]]);
        // Factors sort as x + 1, x + 2; x + 2 = x - 1 owns e1.
        assert_eq!(pd.factorization.factors[0].0, PolyFp::new(f3, &[1, 1]));
        assert_eq!(pd.decomposition.parts(), &[e2, e1]);

        let pd = primary_decomposition_detailed(&example_a()).unwrap();
        let e13 = Subspace::span(f3, 3, &[vec![1, 0, 0], vec![0, 0, 1]]);
        let x2 = Subspace::span(f3, 3, &[vec![1, 1, 0]]);
        assert_eq!(pd.factorization.factors, vec![
            (PolyFp::new(f3, &[1, 1]), 1),
            (PolyFp::new(f3, &[2, 1]), 2),
        ]);
        assert_eq!(pd.decomposition.parts(), &[x2, e13]);
    }

    #[test]
    fn primary_decomposition_rejects_single_factor() {
        let f2 = gf(2);
        // Companion matrix of x^2 + x + 1, irreducible over GF(2).
        let c = MatrixFp::from_rows(f2, &[[0, 1], [1, 1]]).unwrap();
        assert!(matches!(
            primary_decomposition(&c),
            Err(Error::NotDecomposable { multiplicity: 1, .. })
        ));
        let id = MatrixFp::identity(gf(3), 3);
        assert!(matches!(
            primary_decomposition(&id),
            Err(Error::NotDecomposable { multiplicity: 3, .. })
        ));
    }

    #[test]
    fn verify_decomposition_examples() {
        let f3 = gf(3);
        let a = example_a();
        let primary = primary_decomposition(&a).unwrap();
        assert!(verify_decomposition(&a, primary.parts().to_vec()).is_ok());
        let span = |v: Vec<u32>| Subspace::span(f3, 3, &[v]);
        let finer = vec![span(vec![1, 0, 0]), span(vec![1, 1, 0]), span(vec![0, 0, 1])];
        assert!(verify_decomposition(&a, finer).is_ok());
        let bad = vec![
            span(vec![0, 1, 0]),
            Subspace::span(f3, 3, &[vec![1, 0, 0], vec![0, 0, 1]]),
        ];
        assert_eq!(verify_decomposition(&a, bad), Err(Error::NotInvariant { part: 0 }));
        let overlapping = vec![span(vec![1, 0, 0]), span(vec![1, 0, 0]), span(vec![0, 0, 1])];
        assert!(matches!(verify_decomposition(&a, overlapping), Err(Error::NotDirectSum(_))));
    }

    #[test]
    fn primary_parts_have_expected_dimensions() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let mut seen = 0;
        while seen < 100 {
            let p = [2u64, 3, 5][rng.gen_range(0..3)];
            let n = rng.gen_range(2..=5);
            let f = gf(p);
            let data = (0..n * n).map(|_| rng.gen_range(0..p as u32)).collect();
            let a = MatrixFp::from_raw(f, n, n, data);
            let Ok(pd) = primary_decomposition_detailed(&a) else { continue };
            seen += 1;
            for (i, (g, m)) in pd.factorization.factors.iter().enumerate() {
                assert_eq!(pd.decomposition.part_dim(i), *m as usize * g.degree().unwrap());
            }
            assert_eq!(pd.factorization.product(), pd.factorization.char_poly);
            assert!(verify_decomposition(&a, pd.decomposition.parts().to_vec()).is_ok());
        }
    }
}
