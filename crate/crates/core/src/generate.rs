//! Seeded random instances with a known invariant decomposition.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dp::{CostFunction, CostPolicy};
use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::matrix::MatrixFp;
use crate::scalar::{rational, Rational};
use crate::subspace::{DirectSumDecomposition, Subspace};

const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceFamily {
    /// Every column of `B` lies in some part.
    RangeForced,
    /// `A` invertible, `B` arbitrary injective.
    InvertibleA,
    /// No constraint beyond injective `B`.
    Unconstrained,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedInstance {
    pub a: MatrixFp,
    pub b: MatrixFp,
    pub decomposition: DirectSumDecomposition,
    /// Per-part cost tables indexed by canonical part coordinates.
    pub part_costs: Vec<Vec<Rational>>,
    pub cost: CostFunction<Rational>,
}

fn random_matrix<R: Rng>(rng: &mut R, field: PrimeField, rows: usize, cols: usize) -> MatrixFp {
    let data = (0..rows * cols).map(|_| rng.gen_range(0..field.modulus())).collect();
    MatrixFp::from_raw(field, rows, cols, data)
}

fn random_invertible<R: Rng>(rng: &mut R, field: PrimeField, n: usize) -> Result<MatrixFp> {
    for _ in 0..MAX_ATTEMPTS {
        let m = random_matrix(rng, field, n, n);
        if m.is_invertible() {
            return Ok(m);
        }
    }
    Err(Error::InvalidInput("no invertible matrix found".into()))
}

fn random_part_dims<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let r = rng.gen_range(2..=n);
    let mut dims = vec![1; r];
    for _ in r..n {
        let k = rng.gen_range(0..r);
        dims[k] += 1;
    }
    dims
}

/// Random instance over GF(p) with `n >= 2` states and `1 <= m <= n` inputs,
/// a strict separable cost with integer part costs in `1..=4`, and its
/// invariant decomposition.
pub fn generate<R: Rng>(rng: &mut R, family: InstanceFamily, p: u64, n: usize, m: usize) -> Result<GeneratedInstance> {
    if n < 2 || m == 0 || m > n {
        return Err(Error::InvalidInput(format!(
            "need n >= 2 and 1 <= m <= n, got n = {n}, m = {m}"
        )));
    }
    let field = PrimeField::new(p)?;
    for _ in 0..MAX_ATTEMPTS {
        let dims = random_part_dims(rng, n);
        let basis = random_invertible(rng, field, n)?;
        let mut offsets = vec![0];
        for d in &dims {
            offsets.push(offsets.last().copied().unwrap_or(0) + d);
        }
        let mut blocks = MatrixFp::zeros(field, n, n);
        for (k, &d) in dims.iter().enumerate() {
            let block = if family == InstanceFamily::InvertibleA {
                random_invertible(rng, field, d)?
            } else {
                random_matrix(rng, field, d, d)
            };
            for i in 0..d {
                for j in 0..d {
                    blocks.set(offsets[k] + i, offsets[k] + j, block.get(i, j));
                }
            }
        }
        let a = basis.mul(&blocks)?.mul(&basis.inverse()?)?;
        let b = match family {
            InstanceFamily::RangeForced => {
                let columns: Vec<Vec<u32>> = (0..m)
                    .map(|_| {
                        let k = rng.gen_range(0..dims.len());
                        let coords: Vec<u32> = (0..dims[k]).map(|_| rng.gen_range(0..field.modulus())).collect();
                        let cols: Vec<usize> = (offsets[k]..offsets[k + 1]).collect();
                        basis.select_columns(&cols).mul_vec(&coords)
                    })
                    .collect();
                MatrixFp::from_columns(field, n, &columns)
            }
            _ => random_matrix(rng, field, n, m),
        };
        if b.rank() < m {
            continue;
        }
        let parts: Vec<Subspace> = (0..dims.len())
            .map(|k| {
                let cols: Vec<usize> = (offsets[k]..offsets[k + 1]).collect();
                Subspace::column_space(&basis.select_columns(&cols))
            })
            .collect();
        let decomposition = DirectSumDecomposition::new(parts)?;
        let part_costs: Vec<Vec<Rational>> = dims
            .iter()
            .map(|&d| {
                let size = (p as usize).pow(d as u32);
                (0..size)
                    .map(|s| if s == 0 { rational(0, 1) } else { rational(rng.gen_range(1..=4), 1) })
                    .collect()
            })
            .collect();
        let cost = CostFunction::separable(&decomposition, part_costs.clone(), CostPolicy::Strict)?;
        return Ok(GeneratedInstance {
            a,
            b,
            decomposition,
            part_costs,
            cost,
        });
    }
    Err(Error::InvalidInput("could not generate an injective B".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subspace::is_invariant;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_instances_are_well_formed() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for family in [InstanceFamily::RangeForced, InstanceFamily::InvertibleA, InstanceFamily::Unconstrained] {
            for _ in 0..20 {
                let p = if rng.gen_bool(0.5) { 2 } else { 3 };
                let n = rng.gen_range(2..=4);
                let m = rng.gen_range(1..=3.min(n));
                let g = generate(&mut rng, family, p, n, m).unwrap();
                assert_eq!(g.b.rank(), m);
                for part in g.decomposition.parts() {
                    assert!(is_invariant(&g.a, part));
                }
                if family == InstanceFamily::InvertibleA {
                    assert!(g.a.is_invertible());
                }
                if family == InstanceFamily::RangeForced {
                    for col in g.b.columns() {
                        assert!(g.decomposition.parts().iter().any(|x| x.contains(&col)));
                    }
                }
            }
        }
    }

    #[test]
    fn same_seed_same_instance() {
        let a = generate(&mut ChaCha8Rng::seed_from_u64(3), InstanceFamily::Unconstrained, 3, 3, 2).unwrap();
        let b = generate(&mut ChaCha8Rng::seed_from_u64(3), InstanceFamily::Unconstrained, 3, 3, 2).unwrap();
        assert_eq!(a, b);
    }
}
