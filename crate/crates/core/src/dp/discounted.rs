use rayon::prelude::*;

use super::finite::min_with_argmin;
use super::{ArgminTable, DpInstance, Horizon, Solution, Transitions, ValueTable};
use crate::error::{Error, Result};
use crate::scalar::CostScalar;

const MAX_POLICY_SWEEPS: usize = 100_000;
const MAX_VALUE_SWEEPS: usize = 10_000_000;

fn discount<C: CostScalar>(inst: &DpInstance<C>, what: &str) -> Result<C> {
    match inst.horizon() {
        Horizon::Discounted(a) => Ok(a.clone()),
        Horizon::Finite(_) => Err(Error::HorizonMismatch(format!("{what} needs a discounted horizon"))),
    }
}

/// Exact discounted cost of the closed loop `x ↦ A x + B σ(x)`.
///
/// Each trajectory of a deterministic system is a path that runs into a
/// cycle, so values are computed once per cycle in closed form and then
/// propagated back along the paths.
pub fn evaluate_stationary_policy<C: CostScalar>(inst: &DpInstance<C>, policy: &[usize]) -> Result<Vec<C>> {
    let alpha = discount(inst, "stationary policy evaluation")?;
    let n_states = inst.states().size();
    let n_inputs = inst.inputs().size();
    if policy.len() != n_states {
        return Err(Error::InvalidInput(format!(
            "policy has {} entries for {n_states} states",
            policy.len()
        )));
    }
    if let Some(&u) = policy.iter().find(|&&u| u >= n_inputs) {
        return Err(Error::InvalidInput(format!("input index {u} out of range")));
    }
    let tr = inst.transitions();
    let succ: Vec<usize> = (0..n_states).map(|x| tr.next(x, policy[x])).collect();
    Ok(evaluate_functional_graph(&succ, inst.cost().table(), &alpha))
}

pub(crate) fn evaluate_functional_graph<C: CostScalar>(succ: &[usize], g: &[C], alpha: &C) -> Vec<C> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        OnPath(usize),
        Done,
    }
    let n = succ.len();
    let mut value: Vec<Option<C>> = vec![None; n];
    let mut mark = vec![Mark::New; n];
    let mut path = Vec::new();
    for start in 0..n {
        if mark[start] != Mark::New {
            continue;
        }
        path.clear();
        let mut x = start;
        while mark[x] == Mark::New {
            mark[x] = Mark::OnPath(path.len());
            path.push(x);
            x = succ[x];
        }
        let mut tail_len = path.len();
        if let Mark::OnPath(k) = mark[x] {
            let cycle = &path[k..];
            let len = cycle.len();
            let mut weight = C::one();
            let mut sum = C::zero();
            for &c in cycle {
                sum = sum + weight.clone() * g[c].clone();
                weight = weight * alpha.clone();
            }
            // weight = α^L
            let head = sum / (C::one() - weight);
            value[cycle[0]] = Some(head.clone());
            let mut next = head;
            for &c in cycle[1..].iter().rev() {
                let v = g[c].clone() + alpha.clone() * next;
                value[c] = Some(v.clone());
                next = v;
            }
            debug_assert_eq!(cycle.len(), len);
            tail_len = k;
        }
        for &y in path[..tail_len].iter().rev() {
            let v = g[y].clone() + alpha.clone() * value[succ[y]].clone().expect("successor evaluated");
            value[y] = Some(v);
        }
        for &y in &path {
            mark[y] = Mark::Done;
        }
    }
    value.into_iter().map(|v| v.expect("all states evaluated")).collect()
}

fn q_values<'a, C: CostScalar>(tr: &'a Transitions, j: &'a [C], alpha: &'a C, x: usize) -> impl FnMut(usize) -> C + 'a {
    move |u| alpha.clone() * j[tr.next(x, u)].clone()
}

/// Exact `J^*` and stationary argmin sets by policy iteration.
///
/// Starts from the policy that is greedy on `g` and keeps the incumbent
/// action unless a strictly cheaper one exists.
pub fn solve_discounted_pi<C: CostScalar>(inst: &DpInstance<C>) -> Result<Solution<C>> {
    let alpha = discount(inst, "policy iteration")?;
    let tr = inst.transitions();
    let g = inst.cost().table();
    let n_states = g.len();
    let n_inputs = tr.num_inputs();
    let mut policy: Vec<usize> = (0..n_states)
        .into_par_iter()
        .map(|x| min_with_argmin(n_inputs, |u| g[tr.next(x, u)].clone()).1[0])
        .collect();
    for _ in 0..MAX_POLICY_SWEEPS {
        let succ: Vec<usize> = (0..n_states).map(|x| tr.next(x, policy[x])).collect();
        let j = evaluate_functional_graph(&succ, g, &alpha);
        let improved: Vec<(usize, Vec<usize>, bool)> = (0..n_states)
            .into_par_iter()
            .map(|x| {
                let (best, set) = min_with_argmin(n_inputs, q_values(&tr, &j, &alpha, x));
                let incumbent = alpha.clone() * j[tr.next(x, policy[x])].clone();
                if best < incumbent {
                    (set[0], set, true)
                } else {
                    (policy[x], set, false)
                }
            })
            .collect();
        if improved.iter().all(|(_, _, changed)| !changed) {
            return Ok(Solution {
                values: ValueTable::Stationary { values: j },
                argmin: ArgminTable::Stationary {
                    sets: improved.into_iter().map(|(_, set, _)| set).collect(),
                },
            });
        }
        policy = improved.into_iter().map(|(u, _, _)| u).collect();
    }
    Err(Error::NotConverged(MAX_POLICY_SWEEPS))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueIterationResult<C> {
    pub values: ValueTable<C>,
    pub iterations: usize,
    /// Sup-norm size of the last Bellman update.
    pub last_update: C,
    /// `α · tol / (1 − α)`, a bound on `|J_vi − J^*|_∞`.
    pub error_bound: C,
}

/// Value iteration from `J ≡ 0` until the sup-norm update is at most `tol`.
pub fn solve_discounted_vi<C: CostScalar>(inst: &DpInstance<C>, tol: C) -> Result<ValueIterationResult<C>> {
    let alpha = discount(inst, "value iteration")?;
    if tol.partial_cmp(&C::zero()) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::InvalidInput(format!(
            "tolerance {} must be positive",
            tol.to_exact_string()
        )));
    }
    let tr = inst.transitions();
    let g = inst.cost().table();
    let mut j = vec![C::zero(); g.len()];
    for iterations in 1..=MAX_VALUE_SWEEPS {
        let next: Vec<C> = (0..g.len())
            .into_par_iter()
            .map(|x| g[x].clone() + min_with_argmin(tr.num_inputs(), q_values(&tr, &j, &alpha, x)).0)
            .collect();
        let update = next
            .iter()
            .zip(&j)
            .map(|(a, b)| (a.clone() - b.clone()).abs_value())
            .fold(C::zero(), |acc, d| if d > acc { d } else { acc });
        j = next;
        if update <= tol {
            let error_bound = alpha.clone() * tol / (C::one() - alpha);
            return Ok(ValueIterationResult {
                values: ValueTable::Stationary { values: j },
                iterations,
                last_update: update,
                error_bound,
            });
        }
    }
    Err(Error::NotConverged(MAX_VALUE_SWEEPS))
}

/// `J(x) − g(x) − α min_u J(Ax + Bu)` for every state.
pub fn bellman_residual<C: CostScalar>(inst: &DpInstance<C>, values: &[C]) -> Result<Vec<C>> {
    let alpha = discount(inst, "the Bellman residual")?;
    let tr = inst.transitions();
    let g = inst.cost().table();
    if values.len() != g.len() {
        return Err(Error::InvalidInput(format!(
            "{} values for {} states",
            values.len(),
            g.len()
        )));
    }
    Ok((0..g.len())
        .into_par_iter()
        .map(|x| {
            let best = min_with_argmin(tr.num_inputs(), q_values(&tr, values, &alpha, x)).0;
            values[x].clone() - g[x].clone() - best
        })
        .collect())
}
