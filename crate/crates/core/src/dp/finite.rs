use rayon::prelude::*;

use super::{ArgminTable, DpInstance, Horizon, Solution, Transitions, ValueTable};
use crate::error::{Error, Result};
use crate::scalar::CostScalar;

/// Minimum of `value(u)` over all inputs, with every minimiser in index order.
pub(crate) fn min_with_argmin<C: CostScalar>(
    num_inputs: usize,
    mut value: impl FnMut(usize) -> C,
) -> (C, Vec<usize>) {
    let mut best = value(0);
    let mut set = vec![0];
    for u in 1..num_inputs {
        let v = value(u);
        if v < best {
            best = v;
            set.clear();
            set.push(u);
        } else if v == best {
            set.push(u);
        }
    }
    (best, set)
}

fn backward_step<C: CostScalar>(
    tr: &Transitions,
    g: &[C],
    next_stage: &[C],
) -> (Vec<C>, Vec<Vec<usize>>) {
    (0..g.len())
        .into_par_iter()
        .map(|x| {
            let (best, set) = min_with_argmin(tr.num_inputs(), |u| next_stage[tr.next(x, u)].clone());
            (g[x].clone() + best, set)
        })
        .unzip()
}

/// Backward recursion `J_T = g`, `J_t(x) = g(x) + min_u J_{t+1}(Ax + Bu)`.
pub fn solve_finite<C: CostScalar>(inst: &DpInstance<C>) -> Result<Solution<C>> {
    let Horizon::Finite(t_max) = *inst.horizon() else {
        return Err(Error::HorizonMismatch("solve_finite needs a finite horizon".into()));
    };
    let tr = inst.transitions();
    let g = inst.cost().table();
    let mut stages = vec![Vec::new(); t_max + 1];
    let mut sets = vec![Vec::new(); t_max];
    stages[t_max] = g.to_vec();
    for t in (0..t_max).rev() {
        let (values, argmin) = backward_step(&tr, g, &stages[t + 1]);
        stages[t] = values;
        sets[t] = argmin;
    }
    Ok(Solution {
        values: ValueTable::Finite { stages },
        argmin: ArgminTable::Finite { stages: sets },
    })
}

/// `Σ_{t=0..T} g(x_t)` along the trajectory driven by `inputs` (input indices).
pub fn evaluate_openloop<C: CostScalar>(inst: &DpInstance<C>, x0: usize, inputs: &[usize]) -> Result<C> {
    let Horizon::Finite(t_max) = *inst.horizon() else {
        return Err(Error::HorizonMismatch("open-loop evaluation needs a finite horizon".into()));
    };
    if inputs.len() != t_max {
        return Err(Error::HorizonMismatch(format!(
            "{} inputs for horizon {t_max}",
            inputs.len()
        )));
    }
    let states = inst.states();
    let input_space = inst.inputs();
    if x0 >= states.size() {
        return Err(Error::InvalidInput(format!("state index {x0} out of range")));
    }
    if let Some(&u) = inputs.iter().find(|&&u| u >= input_space.size()) {
        return Err(Error::InvalidInput(format!("input index {u} out of range")));
    }
    let g = inst.cost().table();
    let f = inst.field();
    let mut x = states.vector(x0);
    let mut total = g[x0].clone();
    for &u in inputs {
        let ax = inst.a().mul_vec(&x);
        let bu = inst.b().mul_vec(&input_space.vector(u));
        x = ax.iter().zip(&bu).map(|(&a, &b)| f.add(a, b)).collect();
        total = total + g[states.index(&x)].clone();
    }
    Ok(total)
}

/// Open-loop sequence obtained by following the first recorded argmin from `x0`.
pub fn greedy_openloop<C: CostScalar>(inst: &DpInstance<C>, argmin: &ArgminTable, x0: usize) -> Vec<usize> {
    let tr = inst.transitions();
    let mut x = x0;
    (0..argmin.num_stages())
        .map(|t| {
            let u = argmin.set(t, x)[0];
            x = tr.next(x, u);
            u
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::{CostFunction, InstanceOptions, SizeGuard};
    use crate::field::PrimeField;
    use crate::matrix::MatrixFp;
    use crate::scalar::{rational, Rational};
    use crate::subspace::null_space;

    fn r(n: i64) -> Rational {
        rational(n, 1)
    }

    fn gf3() -> PrimeField {
        PrimeField::new(3).unwrap()
    }

    // Hamming weight as a strict cost.
    fn weight_cost(p: usize, n: usize) -> CostFunction<Rational> {
        let table = (0..p.pow(n as u32))
            .map(|mut i| {
                let mut w = 0;
                for _ in 0..n {
                    w += i64::from(i % p != 0);
                    i /= p;
                }
                r(w)
            })
            .collect();
        CostFunction::new(table).unwrap()
    }

    #[test]
    fn zero_dynamics_gives_stage_cost() {
        let f = gf3();
        let a = MatrixFp::zeros(f, 2, 2);
        let b = MatrixFp::from_rows(f, &[[1], [2]]).unwrap();
        let g = weight_cost(3, 2);
        let inst = DpInstance::new(a, b, g.clone(), Horizon::finite(1).unwrap()).unwrap();
        let sol = solve_finite(&inst).unwrap();
        assert_eq!(sol.values.optimal(), g.table());
        for x in 0..9 {
            assert_eq!(sol.argmin.set(0, x), &[0]);
        }
    }

    #[test]
    fn origin_is_free_and_argmin_at_origin_lies_in_kernel() {
        let f = gf3();
        let a = MatrixFp::from_rows(f, &[[1, 1, 0], [0, 2, 0], [0, 0, 1]]).unwrap();
        let b = MatrixFp::from_rows(f, &[[1, 0], [1, 0], [0, 1]]).unwrap();
        for t in 1..=3 {
            let inst = DpInstance::new(a.clone(), b.clone(), weight_cost(3, 3), Horizon::finite(t).unwrap()).unwrap();
            let sol = solve_finite(&inst).unwrap();
            let kernel = null_space(&b);
            for s in 0..t {
                assert!(sol.values.stage(s)[0] == r(0));
                for &u in sol.argmin.set(s, 0) {
                    assert!(kernel.contains(&inst.inputs().vector(u)));
                }
            }
            for x in 1..27 {
                assert!(sol.values.optimal()[x] > r(0));
            }
        }
    }

    #[test]
    fn openloop_checks_length_and_matches_greedy() {
        let f = gf3();
        let a = MatrixFp::from_rows(f, &[[0, 1], [1, 1]]).unwrap();
        let b = MatrixFp::from_rows(f, &[[0], [1]]).unwrap();
        let inst = DpInstance::new(a, b, weight_cost(3, 2), Horizon::finite(3).unwrap()).unwrap();
        let sol = solve_finite(&inst).unwrap();
        assert!(matches!(evaluate_openloop(&inst, 0, &[0, 0]), Err(Error::HorizonMismatch(_))));
        assert_eq!(evaluate_openloop(&inst, 0, &[0, 0, 0]).unwrap(), r(0));
        for x0 in 0..9 {
            let seq = greedy_openloop(&inst, &sol.argmin, x0);
            assert_eq!(evaluate_openloop(&inst, x0, &seq).unwrap(), sol.values.optimal()[x0]);
            for u in 0..3 {
                assert!(evaluate_openloop(&inst, x0, &[u, u, u]).unwrap() >= sol.values.optimal()[x0]);
            }
        }
    }

    #[test]
    fn rejects_discounted_horizon() {
        let f = gf3();
        let inst = DpInstance::with_options(
            MatrixFp::identity(f, 1),
            MatrixFp::identity(f, 1),
            weight_cost(3, 1),
            Horizon::discounted(rational(1, 2)).unwrap(),
            InstanceOptions {
                guard: SizeGuard::UNLIMITED,
                require_injective: true,
            },
        )
        .unwrap();
        assert!(matches!(solve_finite(&inst), Err(Error::HorizonMismatch(_))));
    }
}
