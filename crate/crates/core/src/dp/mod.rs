//! Exact dynamic programming on `x_{t+1} = A x_t + B u_t` over GF(p).
//!
//! States and inputs are enumerated as base-`p` integers (little endian), so
//! every table here is a dense `Vec` indexed by state or input index.

mod discounted;
mod finite;

pub use discounted::{
    bellman_residual, evaluate_stationary_policy, solve_discounted_pi, solve_discounted_vi,
    ValueIterationResult,
};
pub use finite::{evaluate_openloop, greedy_openloop, solve_finite};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::matrix::MatrixFp;
use crate::scalar::CostScalar;
use crate::subspace::DirectSumDecomposition;

/// Base-`p` little-endian index of a vector.
pub fn state_index(field: PrimeField, x: &[u32]) -> Result<usize> {
    let p = field.order();
    let mut idx = 0usize;
    for &c in x.iter().rev() {
        if c as usize >= p {
            return Err(Error::InvalidInput(format!(
                "component {c} is not a residue mod {p}"
            )));
        }
        idx = idx * p + c as usize;
    }
    Ok(idx)
}

/// Inverse of [`state_index`] for vectors of length `n`.
pub fn index_state(field: PrimeField, n: usize, idx: usize) -> Result<Vec<u32>> {
    let p = field.order();
    let size = checked_size(p, n)
        .ok_or_else(|| Error::TooLarge(format!("{p}^{n} overflows")))?;
    if idx >= size {
        return Err(Error::InvalidInput(format!(
            "index {idx} out of range for GF({p})^{n}"
        )));
    }
    Ok(digits(p, n, idx))
}

fn digits(p: usize, n: usize, mut idx: usize) -> Vec<u32> {
    let mut v = Vec::with_capacity(n);
    for _ in 0..n {
        v.push((idx % p) as u32);
        idx /= p;
    }
    v
}

fn checked_size(p: usize, n: usize) -> Option<usize> {
    p.checked_pow(u32::try_from(n).ok()?)
}

/// All of `GF(p)^dim`, enumerated by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VectorSpace {
    pub field: PrimeField,
    pub dim: usize,
}

impl VectorSpace {
    pub fn new(field: PrimeField, dim: usize) -> Self {
        Self { field, dim }
    }

    pub fn size(&self) -> usize {
        checked_size(self.field.order(), self.dim).expect("size checked at construction")
    }

    pub fn vector(&self, idx: usize) -> Vec<u32> {
        debug_assert!(idx < self.size());
        digits(self.field.order(), self.dim, idx)
    }

    pub fn index(&self, x: &[u32]) -> usize {
        debug_assert_eq!(x.len(), self.dim);
        x.iter()
            .rev()
            .fold(0usize, |acc, &c| acc * self.field.order() + c as usize)
    }
}

/// Whether `g(x) = 0` must single out the origin, or only `g(0) = 0` is required.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostPolicy {
    /// `g >= 0` and `g(x) = 0 ⇔ x = 0`.
    #[default]
    Strict,
    /// `g >= 0` and `g(0) = 0`; other zeros allowed. Needed for costs that
    /// penalise only some coordinates.
    Semidefinite,
}

/// Dense state-cost table with optional per-part tables.
#[derive(Debug, Clone, PartialEq)]
pub struct CostFunction<C> {
    table: Vec<C>,
    separable_parts: Option<Vec<Vec<C>>>,
    policy: CostPolicy,
}

impl<C: CostScalar> CostFunction<C> {
    /// Strict cost: nonnegative, zero exactly at the origin.
    pub fn new(table: Vec<C>) -> Result<Self> {
        Self::with_policy(table, CostPolicy::Strict)
    }

    pub fn new_semidefinite(table: Vec<C>) -> Result<Self> {
        Self::with_policy(table, CostPolicy::Semidefinite)
    }

    pub fn with_policy(table: Vec<C>, policy: CostPolicy) -> Result<Self> {
        validate_table(&table, policy)?;
        Ok(Self {
            table,
            separable_parts: None,
            policy,
        })
    }

    /// `g(x) = Σ_i parts[i](coords_i(x))`, where `parts[i]` is indexed by the
    /// coordinates of `ρ_i x` in the canonical basis of part `i`.
    pub fn separable(
        decomposition: &DirectSumDecomposition,
        parts: Vec<Vec<C>>,
        policy: CostPolicy,
    ) -> Result<Self> {
        let field = decomposition.field();
        if parts.len() != decomposition.len() {
            return Err(Error::InvalidCost(format!(
                "{} part tables for {} parts",
                parts.len(),
                decomposition.len()
            )));
        }
        for (i, t) in parts.iter().enumerate() {
            let want = VectorSpace::new(field, decomposition.part_dim(i)).size();
            if t.len() != want {
                return Err(Error::InvalidCost(format!(
                    "part {i} table has {} entries, expected {want}",
                    t.len()
                )));
            }
            if !t[0].is_zero() {
                return Err(Error::InvalidCost(format!(
                    "part {i} table is nonzero at the origin"
                )));
            }
        }
        let space = VectorSpace::new(field, decomposition.ambient_dim());
        let spaces: Vec<VectorSpace> = (0..decomposition.len())
            .map(|i| VectorSpace::new(field, decomposition.part_dim(i)))
            .collect();
        let table: Vec<C> = (0..space.size())
            .map(|x| {
                let coords = decomposition.all_coordinates(&space.vector(x));
                coords
                    .iter()
                    .enumerate()
                    .fold(C::zero(), |acc, (i, c)| acc + parts[i][spaces[i].index(c)].clone())
            })
            .collect();
        validate_table(&table, policy)?;
        Ok(Self {
            table,
            separable_parts: Some(parts),
            policy,
        })
    }

    /// `g(x) = Σ_i w_i [ρ_i x ≠ 0]`.
    pub fn indicator(
        decomposition: &DirectSumDecomposition,
        weights: &[C],
        policy: CostPolicy,
    ) -> Result<Self> {
        if weights.len() != decomposition.len() {
            return Err(Error::InvalidCost(format!(
                "{} weights for {} parts",
                weights.len(),
                decomposition.len()
            )));
        }
        let field = decomposition.field();
        let parts = weights
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let size = VectorSpace::new(field, decomposition.part_dim(i)).size();
                (0..size)
                    .map(|k| if k == 0 { C::zero() } else { w.clone() })
                    .collect()
            })
            .collect();
        Self::separable(decomposition, parts, policy)
    }

    pub fn table(&self) -> &[C] {
        &self.table
    }

    pub fn value(&self, state: usize) -> &C {
        &self.table[state]
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn policy(&self) -> CostPolicy {
        self.policy
    }

    pub fn separable_parts(&self) -> Option<&[Vec<C>]> {
        self.separable_parts.as_deref()
    }

    /// First state where `g(x) ≠ Σ_i g(ρ_i x)`, if any.
    pub fn separability_witness(&self, decomposition: &DirectSumDecomposition) -> Option<usize> {
        let space = VectorSpace::new(decomposition.field(), decomposition.ambient_dim());
        if self.table.len() != space.size() {
            return Some(0);
        }
        (0..space.size()).find(|&x| {
            let sum = decomposition
                .decompose_vector(&space.vector(x))
                .iter()
                .fold(C::zero(), |acc, xi| acc + self.table[space.index(xi)].clone());
            sum != self.table[x]
        })
    }
}

fn validate_table<C: CostScalar>(table: &[C], policy: CostPolicy) -> Result<()> {
    let Some(origin) = table.first() else {
        return Err(Error::InvalidCost("empty cost table".into()));
    };
    if !origin.is_zero() {
        return Err(Error::InvalidCost(format!(
            "g(0) = {} but the cost must vanish at the origin",
            origin.to_exact_string()
        )));
    }
    for (x, v) in table.iter().enumerate() {
        if *v < C::zero() {
            return Err(Error::InvalidCost(format!(
                "g(x) = {} < 0 at state index {x}",
                v.to_exact_string()
            )));
        }
        if x > 0 && policy == CostPolicy::Strict && v.is_zero() {
            return Err(Error::InvalidCost(format!(
                "g(x) = 0 at nonzero state index {x}; the cost must satisfy g(x) = 0 iff x = 0"
            )));
        }
    }
    Ok(())
}

/// `g ∈ G_s`: `g(x) = Σ_i g(ρ_i x)` for every state, checked exhaustively.
pub fn is_in_gs<C: CostScalar>(g: &CostFunction<C>, decomposition: &DirectSumDecomposition) -> bool {
    g.separability_witness(decomposition).is_none()
}

/// Finite horizon `T` (α = 1) or discount factor `α ∈ (0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Horizon<C> {
    Finite(usize),
    Discounted(C),
}

impl<C: CostScalar> Horizon<C> {
    pub fn finite(t: usize) -> Result<Self> {
        if t == 0 {
            return Err(Error::InvalidHorizon("finite horizon needs T >= 1".into()));
        }
        Ok(Self::Finite(t))
    }

    pub fn discounted(alpha: C) -> Result<Self> {
        if !(alpha > C::zero() && alpha < C::one()) {
            return Err(Error::InvalidHorizon(format!(
                "discount factor {} is outside (0, 1)",
                alpha.to_exact_string()
            )));
        }
        Ok(Self::Discounted(alpha))
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Self::Finite(_))
    }

    pub fn discount(&self) -> C {
        match self {
            Self::Finite(_) => C::one(),
            Self::Discounted(a) => a.clone(),
        }
    }
}

/// Upper bounds on table sizes accepted at instance construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeGuard {
    pub max_states: usize,
    pub max_inputs: usize,
}

impl SizeGuard {
    /// 3^6 states and 3^4 inputs.
    pub const DESK: Self = Self {
        max_states: 729,
        max_inputs: 81,
    };

    pub const UNLIMITED: Self = Self {
        max_states: usize::MAX,
        max_inputs: usize::MAX,
    };
}

impl Default for SizeGuard {
    fn default() -> Self {
        Self::DESK
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceOptions {
    pub guard: SizeGuard,
    /// Reject `B` without full column rank.
    pub require_injective: bool,
}

impl Default for InstanceOptions {
    fn default() -> Self {
        Self {
            guard: SizeGuard::DESK,
            require_injective: true,
        }
    }
}

/// One DP problem `(A, B, g, T)` or `(A, B, g, α)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DpInstance<C> {
    field: PrimeField,
    a: MatrixFp,
    b: MatrixFp,
    cost: CostFunction<C>,
    horizon: Horizon<C>,
}

impl<C: CostScalar> DpInstance<C> {
    pub fn new(a: MatrixFp, b: MatrixFp, cost: CostFunction<C>, horizon: Horizon<C>) -> Result<Self> {
        Self::with_options(a, b, cost, horizon, InstanceOptions::default())
    }

    pub fn with_options(
        a: MatrixFp,
        b: MatrixFp,
        cost: CostFunction<C>,
        horizon: Horizon<C>,
        options: InstanceOptions,
    ) -> Result<Self> {
        let field = a.field();
        if b.field() != field {
            return Err(Error::ModulusMismatch(field.modulus(), b.field().modulus()));
        }
        if !a.is_square() {
            return Err(Error::Shape(format!("A is {}x{}", a.rows(), a.cols())));
        }
        let (n, m) = (a.rows(), b.cols());
        if b.rows() != n {
            return Err(Error::Shape(format!(
                "B has {} rows but the state dimension is {n}",
                b.rows()
            )));
        }
        let p = field.order();
        let states = checked_size(p, n).filter(|&s| s <= options.guard.max_states);
        let Some(states) = states else {
            return Err(Error::TooLarge(format!(
                "{p}^{n} states exceeds the limit of {}",
                options.guard.max_states
            )));
        };
        if checked_size(p, m).filter(|&s| s <= options.guard.max_inputs).is_none() {
            return Err(Error::TooLarge(format!(
                "{p}^{m} inputs exceeds the limit of {}",
                options.guard.max_inputs
            )));
        }
        if options.require_injective {
            let rank = b.rank();
            if rank < m {
                return Err(Error::NotInjective { rank, cols: m });
            }
        }
        if cost.len() != states {
            return Err(Error::InvalidCost(format!(
                "cost table has {} entries, expected {states}",
                cost.len()
            )));
        }
        if let Horizon::Discounted(alpha) = &horizon {
            Horizon::discounted(alpha.clone())?;
        } else if let Horizon::Finite(0) = horizon {
            return Err(Error::InvalidHorizon("finite horizon needs T >= 1".into()));
        }
        Ok(Self {
            field,
            a,
            b,
            cost,
            horizon,
        })
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }

    pub fn states(&self) -> VectorSpace {
        VectorSpace::new(self.field, self.state_dim())
    }

    pub fn inputs(&self) -> VectorSpace {
        VectorSpace::new(self.field, self.input_dim())
    }

    pub fn a(&self) -> &MatrixFp {
        &self.a
    }

    pub fn b(&self) -> &MatrixFp {
        &self.b
    }

    pub fn cost(&self) -> &CostFunction<C> {
        &self.cost
    }

    pub fn horizon(&self) -> &Horizon<C> {
        &self.horizon
    }

    /// Same system and cost under another horizon.
    pub fn with_horizon(&self, horizon: Horizon<C>) -> Result<Self> {
        let mut out = self.clone();
        match &horizon {
            Horizon::Finite(t) => {
                Horizon::<C>::finite(*t)?;
            }
            Horizon::Discounted(a) => {
                Horizon::discounted(a.clone())?;
            }
        }
        out.horizon = horizon;
        Ok(out)
    }

    /// Successor table `next[x * |U| + u] = index(Ax + Bu)`.
    pub fn transitions(&self) -> Transitions {
        let states = self.states();
        let inputs = self.inputs();
        let f = self.field;
        let ax: Vec<Vec<u32>> = (0..states.size())
            .map(|x| self.a.mul_vec(&states.vector(x)))
            .collect();
        let bu: Vec<Vec<u32>> = (0..inputs.size())
            .map(|u| self.b.mul_vec(&inputs.vector(u)))
            .collect();
        let num_inputs = inputs.size();
        let next = ax
            .par_iter()
            .flat_map_iter(|axv| {
                bu.iter().map(move |buv| {
                    let v: Vec<u32> = axv.iter().zip(buv).map(|(&a, &b)| f.add(a, b)).collect();
                    states.index(&v) as u32
                })
            })
            .collect();
        Transitions { next, num_inputs }
    }
}

/// Dense successor table of a deterministic system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transitions {
    next: Vec<u32>,
    num_inputs: usize,
}

impl Transitions {
    #[inline]
    pub fn next(&self, x: usize, u: usize) -> usize {
        self.next[x * self.num_inputs + u] as usize
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_states(&self) -> usize {
        self.next.len() / self.num_inputs.max(1)
    }
}

/// Optimal cost-to-go tables.
#[derive(Debug, Clone, PartialEq)]
pub enum ValueTable<C> {
    /// `stages[t][x] = J_t^*(x)`, `t = 0..=T`.
    Finite { stages: Vec<Vec<C>> },
    /// `values[x] = J^*(x)`.
    Stationary { values: Vec<C> },
}

impl<C> ValueTable<C> {
    /// `J^* = J_0^*`.
    pub fn optimal(&self) -> &[C] {
        match self {
            Self::Finite { stages } => &stages[0],
            Self::Stationary { values } => values,
        }
    }

    /// `J_t^*`; the stationary table ignores `t`.
    pub fn stage(&self, t: usize) -> &[C] {
        match self {
            Self::Finite { stages } => &stages[t],
            Self::Stationary { values } => values,
        }
    }

    pub fn num_stages(&self) -> usize {
        match self {
            Self::Finite { stages } => stages.len(),
            Self::Stationary { .. } => 1,
        }
    }
}

/// Full sets of minimising input indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArgminTable {
    /// `stages[t][x]`, `t = 0..T`.
    Finite { stages: Vec<Vec<Vec<usize>>> },
    Stationary { sets: Vec<Vec<usize>> },
}

impl ArgminTable {
    /// Optimal inputs at state `x`, time `t` (ignored when stationary).
    pub fn set(&self, t: usize, x: usize) -> &[usize] {
        match self {
            Self::Finite { stages } => &stages[t][x],
            Self::Stationary { sets } => &sets[x],
        }
    }

    /// Number of decision stages: `T`, or 1 when stationary.
    pub fn num_stages(&self) -> usize {
        match self {
            Self::Finite { stages } => stages.len(),
            Self::Stationary { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution<C> {
    pub values: ValueTable<C>,
    pub argmin: ArgminTable,
}

/// Dispatches on the horizon: backward recursion or exact policy iteration.
pub fn solve<C: CostScalar>(inst: &DpInstance<C>) -> Result<Solution<C>> {
    match inst.horizon() {
        Horizon::Finite(_) => solve_finite(inst),
        Horizon::Discounted(_) => solve_discounted_pi(inst),
    }
}

/// A state-feedback law: `stages[t][x]` is an input index (one stage when
/// stationary).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlLaw {
    pub stages: Vec<Vec<usize>>,
}

impl ControlLaw {
    pub fn action(&self, t: usize, x: usize) -> usize {
        let stage = if self.stages.len() == 1 { 0 } else { t };
        self.stages[stage][x]
    }
}

/// Exact cost of running `law` from every initial state.
pub fn evaluate_control_law<C: CostScalar>(inst: &DpInstance<C>, law: &ControlLaw) -> Result<Vec<C>> {
    match inst.horizon() {
        Horizon::Finite(t_max) => {
            let tr = inst.transitions();
            let g = inst.cost().table();
            if law.stages.len() != *t_max && law.stages.len() != 1 {
                return Err(Error::HorizonMismatch(format!(
                    "control law has {} stages for horizon {t_max}",
                    law.stages.len()
                )));
            }
            Ok((0..inst.states().size())
                .map(|x0| {
                    let mut x = x0;
                    let mut total = g[x].clone();
                    for t in 0..*t_max {
                        x = tr.next(x, law.action(t, x));
                        total = total + g[x].clone();
                    }
                    total
                })
                .collect())
        }
        Horizon::Discounted(_) => {
            if law.stages.len() != 1 {
                return Err(Error::HorizonMismatch(
                    "discounted problems take a stationary control law".into(),
                ));
            }
            evaluate_stationary_policy(inst, &law.stages[0])
        }
    }
}
