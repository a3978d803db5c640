//! Exhaustive decision procedures for the decomposition conditions.
//!
//! A [`Checker`] solves the parent problem and both sub-problem families
//! once, then every check is a pointwise test over states (and stages),
//! reporting the first failing point as a witness.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dp::{self, evaluate_control_law, ControlLaw, CostPolicy, DpInstance, Horizon, Solution};
use crate::error::{Error, Result};
use crate::scalar::CostScalar;
use crate::subproblems::{build_bundle, complement_in_order, lift_policy, solve_bundle, Family, SubproblemBundle};
use crate::subspace::{
    is_independent, subspace_intersect, subspace_sum_all, DirectSumDecomposition, Subspace,
};

/// Which sub-problem families to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilySelection {
    Restricted,
    Projected,
    #[default]
    Both,
}

impl FamilySelection {
    fn restricted(self) -> bool {
        self != Self::Projected
    }

    fn projected(self) -> bool {
        self != Self::Restricted
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckOptions {
    /// Largest number of sub-problem action tuples enumerated per `(x, t)`.
    pub tuple_cap: u64,
    pub family: FamilySelection,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            tuple_cap: 1_000_000,
            family: FamilySelection::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

/// A parent state, by index and as a vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateRef {
    pub index: usize,
    pub vector: Vec<u32>,
}

/// A point where a check fails, sufficient to re-run the check there.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// No optimal input at `(state, t)` lies in `Σ E_i`.
    Lemma1 { state: StateRef, t: usize },
    /// No stationary optimal input at `state` lies in `Σ E_i`.
    StationarySelector { state: StateRef },
    /// `J^*(x) ≠ Σ_i J̄_i^*(ρ_i x)`.
    Def1Value {
        state: StateRef,
        parent: String,
        sum: String,
    },
    /// `J^*(x) ≠ Σ_i J_i^*(ρ_i x)` for the projected family.
    Def2Value {
        state: StateRef,
        parent: String,
        sum: String,
    },
    /// Optimal projected actions whose combined effect no optimal parent
    /// input reproduces.
    Def2Diagram {
        state: StateRef,
        t: usize,
        actions: Vec<Vec<u32>>,
        target: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HorizonSummary {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeReport {
    /// `R(B) = ⊕_i [R(B) ∩ X_i]`.
    pub holds: bool,
    pub range_dim: usize,
    pub intersection_dims: Vec<usize>,
    pub intersections_independent: bool,
    /// `U = Σ_i E_i`.
    pub u_equals_sum_e: bool,
    pub e_dims: Vec<usize>,
    pub v_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Def1Report {
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<Witness>,
    /// The lifted sub-problem selection costs exactly `Σ_i J̄_i^*` everywhere.
    pub lifted_cost_equals_sum: bool,
    /// The lifted sub-problem selection is optimal for the parent everywhere.
    pub lifted_policy_optimal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Def2Report {
    pub verdict: Verdict,
    pub value_equality: bool,
    pub diagram: Verdict,
    /// Points skipped because the tuple count exceeded the cap.
    pub inconclusive_points: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonotoneReport {
    /// `def1_by_horizon[k]` is the verdict at horizon `k + 1`.
    pub def1_by_horizon: Vec<bool>,
    pub consistent: bool,
}

/// Verdicts of the supporting propositions. `None` means not applicable to
/// this instance (for example a semidefinite cost).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropositionReport {
    /// Minimising over `E_i` equals minimising over `Σ E_j` on `X_i`.
    pub min_over_e_i: bool,
    /// Range condition agrees with `U = Σ E_i`.
    pub range_iff_u_sum: bool,
    /// `A(X) ∩ B(V) = {0}` for the greedy complement.
    pub ax_cap_bv_trivial: bool,
    /// Same for the complement built in reverse order.
    pub ax_cap_bv_trivial_alt: bool,
    /// Decomposition ⇒ `A(X) ∩ B(V) = {0}`; strict costs only.
    pub decomposition_implies_ax_cap_bv: Option<bool>,
    /// `J^*(x) = 0 ⇔ x = 0`; strict costs only.
    pub zero_value_iff_origin: Option<bool>,
    /// Optimal inputs at the origin lie in `N(B)`; strict costs only.
    pub origin_inputs_in_kernel: Option<bool>,
    /// Under the argmin-intersection condition: every `J_t^*` is separable and
    /// restricts to the sub-problem value on each part.
    pub cost_to_go_splits: Option<bool>,
    /// Argmin-intersection condition agrees with the Definition-1 verdict.
    pub lemma1_agrees_with_def1: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub horizon: HorizonSummary,
    pub cost_policy: String,
    pub a_invertible: bool,
    pub range_condition: RangeReport,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lemma1: Option<ConditionReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stationary_selector: Option<ConditionReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub def1: Option<Def1Report>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub def2: Option<Def2Report>,
    /// Projected decomposition ⇒ restricted decomposition.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hierarchy_consistent: Option<bool>,
    /// Range condition ⇒ restricted decomposition.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub range_implies_def1: Option<bool>,
    /// Invertible `A`: range condition ⇔ restricted decomposition. Absent
    /// when `A` is singular or the cost is semidefinite.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub invertible_equivalence: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub monotone: Option<MonotoneReport>,
    pub propositions: PropositionReport,
    /// Implications that failed; each one contradicts a proved result.
    pub violations: Vec<String>,
}

impl DecompositionReport {
    /// `Err(TheoremViolation)` if any implication failed.
    pub fn ensure_consistent(&self) -> Result<()> {
        if self.violations.is_empty() {
            Ok(())
        } else {
            Err(Error::TheoremViolation(self.violations.join("; ")))
        }
    }

    pub fn witnesses(&self) -> Vec<&Witness> {
        let mut out = Vec::new();
        for w in [
            self.lemma1.as_ref().and_then(|c| c.witness.as_ref()),
            self.stationary_selector.as_ref().and_then(|c| c.witness.as_ref()),
            self.def1.as_ref().and_then(|c| c.witness.as_ref()),
            self.def2.as_ref().and_then(|c| c.witness.as_ref()),
        ]
        .into_iter()
        .flatten()
        {
            out.push(w);
        }
        out
    }
}

/// Range condition and its equivalent `U = Σ E_i`.
pub fn check_range_condition<C: CostScalar>(bundle: &SubproblemBundle<C>) -> Result<RangeReport> {
    let inst = bundle.parent();
    let field = inst.field();
    let rb = Subspace::column_space(inst.b());
    let inters: Vec<Subspace> = bundle
        .decomposition()
        .parts()
        .iter()
        .map(|x| subspace_intersect(&rb, x))
        .collect::<Result<_>>()?;
    let sum = subspace_sum_all(field, inst.state_dim(), &inters)?;
    let independent = is_independent(&inters);
    Ok(RangeReport {
        holds: sum == rb && independent,
        range_dim: rb.dim(),
        intersection_dims: inters.iter().map(Subspace::dim).collect(),
        intersections_independent: independent,
        u_equals_sum_e: bundle.e_sum().is_full(),
        e_dims: bundle.e().iter().map(Subspace::dim).collect(),
        v_dim: bundle.v().dim(),
    })
}

/// `A(X) ∩ B(V) = {0}`.
pub fn ax_cap_bv_trivial<C: CostScalar>(bundle: &SubproblemBundle<C>, v: &Subspace) -> Result<bool> {
    let inst = bundle.parent();
    let ax = Subspace::column_space(inst.a());
    let bv = v.image(inst.b())?;
    Ok(subspace_intersect(&ax, &bv)?.is_zero())
}

enum DiagramPoint {
    Holds,
    Fails { actions: Vec<usize>, target: Vec<u32> },
    Inconclusive,
}

/// Solved parent and sub-problems, ready for pointwise checks.
pub struct Checker<C> {
    bundle: SubproblemBundle<C>,
    parent: Solution<C>,
    restricted: Vec<Solution<C>>,
    projected: Vec<Solution<C>>,
    /// `part_states[i][x]`: index of `ρ_i x` in part `i`.
    part_states: Vec<Vec<usize>>,
    /// State index of `Bu` per input index.
    b_images: Vec<usize>,
    in_e_sum: Vec<bool>,
}

impl<C: CostScalar> Checker<C> {
    pub fn new(inst: &DpInstance<C>, decomposition: &DirectSumDecomposition) -> Result<Self> {
        Self::from_bundle(build_bundle(inst, decomposition)?)
    }

    pub fn from_bundle(bundle: SubproblemBundle<C>) -> Result<Self> {
        let inst = bundle.parent();
        let parent = dp::solve(inst)?;
        let restricted = solve_bundle(&bundle, Family::Restricted)?;
        let projected = solve_bundle(&bundle, Family::Projected)?;
        let states = inst.states();
        let inputs = inst.inputs();
        let part_states = (0..bundle.num_parts())
            .map(|i| (0..states.size()).map(|x| bundle.part_state(i, x)).collect())
            .collect();
        let b_images = (0..inputs.size())
            .map(|u| states.index(&inst.b().mul_vec(&inputs.vector(u))))
            .collect();
        let in_e_sum = (0..inputs.size())
            .map(|u| bundle.e_sum().contains(&inputs.vector(u)))
            .collect();
        Ok(Self {
            bundle,
            parent,
            restricted,
            projected,
            part_states,
            b_images,
            in_e_sum,
        })
    }

    pub fn bundle(&self) -> &SubproblemBundle<C> {
        &self.bundle
    }

    pub fn parent_solution(&self) -> &Solution<C> {
        &self.parent
    }

    pub fn restricted_solutions(&self) -> &[Solution<C>] {
        &self.restricted
    }

    pub fn projected_solutions(&self) -> &[Solution<C>] {
        &self.projected
    }

    fn inst(&self) -> &DpInstance<C> {
        self.bundle.parent()
    }

    fn num_states(&self) -> usize {
        self.part_states[0].len()
    }

    fn state_ref(&self, x: usize) -> StateRef {
        StateRef {
            index: x,
            vector: self.inst().states().vector(x),
        }
    }

    fn resolve(&self, s: &StateRef) -> Result<usize> {
        let idx = dp::state_index(self.inst().field(), &s.vector)?;
        if s.vector.len() != self.inst().state_dim() || idx != s.index {
            return Err(Error::InvalidInput(format!(
                "witness state {:?} does not match index {}",
                s.vector, s.index
            )));
        }
        Ok(idx)
    }

    fn stages(&self) -> usize {
        self.parent.argmin.num_stages()
    }

    /// `Σ_i V_i(ρ_i x)` for sub-problem value tables at stage `t`.
    fn part_sum(&self, sols: &[Solution<C>], t: usize, x: usize) -> C {
        sols.iter()
            .enumerate()
            .fold(C::zero(), |acc, (i, s)| acc + s.values.stage(t)[self.part_states[i][x]].clone())
    }

    /// Some optimal input at `(x, t)` lies in `Σ E_i`.
    pub fn argmin_meets_e_sum(&self, x: usize, t: usize) -> bool {
        self.parent.argmin.set(t, x).iter().any(|&u| self.in_e_sum[u])
    }

    fn first_lemma1_failure(&self) -> Option<(usize, usize)> {
        (0..self.stages()).find_map(|t| {
            (0..self.num_states())
                .into_par_iter()
                .find_first(|&x| !self.argmin_meets_e_sum(x, t))
                .map(|x| (x, t))
        })
    }

    /// Value equality of the restricted family at stage `t` of the parent
    /// tables (stage 0 is the Definition-1 equality).
    fn def1_value_failure(&self, t: usize) -> Option<usize> {
        (0..self.num_states())
            .into_par_iter()
            .find_first(|&x| self.parent.values.stage(t)[x] != self.part_sum(&self.restricted, t, x))
    }

    fn def2_value_failure(&self) -> Option<usize> {
        (0..self.num_states())
            .into_par_iter()
            .find_first(|&x| self.parent.values.optimal()[x] != self.part_sum(&self.projected, 0, x))
    }

    fn projected_targets(&self, i: usize, t: usize, x: usize) -> Vec<(Vec<u32>, usize)> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for &a in self.projected[i].argmin.set(t, self.part_states[i][x]) {
            let effect = self.bundle.projected_effect(i, a);
            if seen.insert(effect.clone()) {
                out.push((effect, a));
            }
        }
        out
    }

    fn diagram_at(&self, x: usize, t: usize, cap: u64) -> DiagramPoint {
        let states = self.inst().states();
        let field = self.inst().field();
        let reachable: HashSet<usize> = self
            .parent
            .argmin
            .set(t, x)
            .iter()
            .map(|&u| self.b_images[u])
            .collect();
        let targets: Vec<Vec<(Vec<u32>, usize)>> = (0..self.bundle.num_parts())
            .map(|i| self.projected_targets(i, t, x))
            .collect();
        let count = targets
            .iter()
            .try_fold(1u64, |acc, t| acc.checked_mul(t.len() as u64));
        if count.is_none_or(|c| c > cap) {
            return DiagramPoint::Inconclusive;
        }
        let mut odometer = vec![0usize; targets.len()];
        loop {
            let mut y = vec![0u32; states.dim];
            for (i, &k) in odometer.iter().enumerate() {
                for (a, b) in y.iter_mut().zip(&targets[i][k].0) {
                    *a = field.add(*a, *b);
                }
            }
            if !reachable.contains(&states.index(&y)) {
                return DiagramPoint::Fails {
                    actions: odometer.iter().enumerate().map(|(i, &k)| targets[i][k].1).collect(),
                    target: y,
                };
            }
            let mut pos = 0;
            loop {
                if pos == odometer.len() {
                    return DiagramPoint::Holds;
                }
                odometer[pos] += 1;
                if odometer[pos] < targets[pos].len() {
                    break;
                }
                odometer[pos] = 0;
                pos += 1;
            }
        }
    }

    /// Argmin-intersection condition over every state and stage.
    pub fn check_lemma1(&self) -> ConditionReport {
        match self.first_lemma1_failure() {
            None => ConditionReport { holds: true, witness: None },
            Some((x, t)) => {
                let state = self.state_ref(x);
                let witness = if self.inst().horizon().is_finite() {
                    Witness::Lemma1 { state, t }
                } else {
                    Witness::StationarySelector { state }
                };
                ConditionReport {
                    holds: false,
                    witness: Some(witness),
                }
            }
        }
    }

    /// Definition 1: value equality plus an end-to-end evaluation of a lifted
    /// selection of sub-problem optimal inputs.
    pub fn check_def1(&self) -> Result<Def1Report> {
        let witness = self.def1_value_failure(0).map(|x| Witness::Def1Value {
            state: self.state_ref(x),
            parent: self.parent.values.optimal()[x].to_exact_string(),
            sum: self.part_sum(&self.restricted, 0, x).to_exact_string(),
        });
        let selections: Vec<ControlLaw> = self
            .restricted
            .iter()
            .map(|sol| ControlLaw {
                stages: (0..sol.argmin.num_stages())
                    .map(|t| {
                        (0..sol.values.optimal().len())
                            .map(|s| {
                                let set = sol.argmin.set(t, s);
                                set[(s + t) % set.len()]
                            })
                            .collect()
                    })
                    .collect(),
            })
            .collect();
        let law = lift_policy(&self.bundle, Family::Restricted, &selections)?;
        let costs = evaluate_control_law(self.inst(), &law)?;
        let lifted_cost_equals_sum = (0..self.num_states()).all(|x| costs[x] == self.part_sum(&self.restricted, 0, x));
        let lifted_policy_optimal = costs.iter().zip(self.parent.values.optimal()).all(|(a, b)| a == b);
        Ok(Def1Report {
            holds: witness.is_none(),
            witness,
            lifted_cost_equals_sum,
            lifted_policy_optimal,
        })
    }

    /// Definition 2: value equality and the pointwise commutative diagram.
    pub fn check_def2(&self, tuple_cap: u64) -> Def2Report {
        let value_failure = self.def2_value_failure();
        let mut inconclusive_points = 0;
        let mut diagram_witness = None;
        'outer: for t in 0..self.stages() {
            let points: Vec<(usize, DiagramPoint)> = (0..self.num_states())
                .into_par_iter()
                .map(|x| (x, self.diagram_at(x, t, tuple_cap)))
                .collect();
            for (x, point) in points {
                match point {
                    DiagramPoint::Holds => {}
                    DiagramPoint::Inconclusive => inconclusive_points += 1,
                    DiagramPoint::Fails { actions, target } => {
                        let actions = actions
                            .iter()
                            .enumerate()
                            .map(|(i, &a)| self.bundle.projected()[i].inputs().vector(a))
                            .collect();
                        diagram_witness = Some(Witness::Def2Diagram {
                            state: self.state_ref(x),
                            t,
                            actions,
                            target,
                        });
                        break 'outer;
                    }
                }
            }
        }
        let diagram = if diagram_witness.is_some() {
            Verdict::Fails
        } else if inconclusive_points > 0 {
            Verdict::Inconclusive
        } else {
            Verdict::Holds
        };
        let verdict = if value_failure.is_some() || diagram == Verdict::Fails {
            Verdict::Fails
        } else {
            diagram
        };
        let witness = value_failure
            .map(|x| Witness::Def2Value {
                state: self.state_ref(x),
                parent: self.parent.values.optimal()[x].to_exact_string(),
                sum: self.part_sum(&self.projected, 0, x).to_exact_string(),
            })
            .or(diagram_witness);
        Def2Report {
            verdict,
            value_equality: value_failure.is_none(),
            diagram,
            inconclusive_points,
            witness,
        }
    }

    /// Verdict of Definition 1 at every horizon `1..=T`, using that the
    /// stage-`t` tables of a horizon-`T` problem are the stage-0 tables of
    /// the horizon-`(T - t)` problem.
    pub fn def1_by_horizon(&self) -> Option<Vec<bool>> {
        let Horizon::Finite(t_max) = *self.inst().horizon() else {
            return None;
        };
        Some(
            (1..=t_max)
                .map(|h| self.def1_value_failure(t_max - h).is_none())
                .collect(),
        )
    }

    fn min_over_e_i_holds(&self) -> bool {
        let inst = self.inst();
        let g = inst.cost().table();
        let states = inst.states();
        let inputs = inst.inputs();
        let field = inst.field();
        let e_sum_inputs: Vec<Vec<u32>> = (0..inputs.size())
            .filter(|&u| self.in_e_sum[u])
            .map(|u| inst.b().mul_vec(&inputs.vector(u)))
            .collect();
        (0..self.bundle.num_parts()).all(|i| {
            let sub = &self.bundle.restricted()[i];
            (0..sub.states().size()).into_par_iter().all(|s| {
                let x = states.vector(self.bundle.embed_state(i, s));
                let ax = inst.a().mul_vec(&x);
                let cost_at = |bu: &[u32]| {
                    let y: Vec<u32> = ax.iter().zip(bu).map(|(&a, &b)| field.add(a, b)).collect();
                    g[states.index(&y)].clone()
                };
                let over_e_i = (0..sub.inputs().size())
                    .map(|u| cost_at(&inst.b().mul_vec(&self.bundle.lift_input(Family::Restricted, i, u))))
                    .reduce(|a, b| if b < a { b } else { a })
                    .expect("at least one input");
                let over_sum = e_sum_inputs
                    .iter()
                    .map(|bu| cost_at(bu))
                    .reduce(|a, b| if b < a { b } else { a })
                    .expect("zero input is in the sum");
                over_e_i == over_sum
            })
        })
    }

    fn cost_to_go_splits(&self) -> bool {
        let d = self.bundle.decomposition();
        let states = self.inst().states();
        (0..self.stages()).all(|t| {
            let j = self.parent.values.stage(t);
            let separable = (0..self.num_states()).into_par_iter().all(|x| {
                let sum = d
                    .decompose_vector(&states.vector(x))
                    .iter()
                    .fold(C::zero(), |acc, xi| acc + j[states.index(xi)].clone());
                sum == j[x]
            });
            let restricts = (0..self.bundle.num_parts()).all(|i| {
                let sub = self.restricted[i].values.stage(t);
                (0..sub.len()).all(|s| j[self.bundle.embed_state(i, s)] == sub[s])
            });
            separable && restricts
        })
    }

    fn zero_value_iff_origin(&self) -> bool {
        self.parent
            .values
            .optimal()
            .iter()
            .enumerate()
            .all(|(x, v)| v.is_zero() == (x == 0))
    }

    fn origin_inputs_in_kernel(&self) -> bool {
        (0..self.stages()).all(|t| self.parent.argmin.set(t, 0).iter().all(|&u| self.b_images[u] == 0))
    }

    /// Runs every check and collects any contradicted implication in
    /// `violations`.
    pub fn run(&self, options: &CheckOptions) -> Result<DecompositionReport> {
        let inst = self.inst();
        let strict = inst.cost().policy() == CostPolicy::Strict;
        let finite = inst.horizon().is_finite();
        let range = check_range_condition(&self.bundle)?;
        let a_invertible = inst.a().is_invertible();
        let mut violations = Vec::new();

        let lemma = self.check_lemma1();
        let (lemma1, stationary_selector) = if finite {
            (Some(lemma.clone()), None)
        } else {
            (None, Some(lemma.clone()))
        };

        let def1 = if options.family.restricted() {
            Some(self.check_def1()?)
        } else {
            None
        };
        let def2 = if options.family.projected() {
            Some(self.check_def2(options.tuple_cap))
        } else {
            None
        };

        if range.holds != range.u_equals_sum_e {
            violations.push("range condition disagrees with U = ΣE_i".to_string());
        }
        let reversed: Vec<usize> = (0..inst.input_dim()).rev().collect();
        let v_alt = complement_in_order(self.bundle.e_sum(), &reversed);
        let ax_bv = ax_cap_bv_trivial(&self.bundle, self.bundle.v())?;
        let ax_bv_alt = ax_cap_bv_trivial(&self.bundle, &v_alt)?;

        let mut range_implies_def1 = None;
        let mut invertible_equivalence = None;
        let mut decomposition_implies_ax_cap_bv = None;
        let mut lemma1_agrees_with_def1 = None;
        let mut monotone = None;
        if let Some(d1) = &def1 {
            let ok = !range.holds || d1.holds;
            range_implies_def1 = Some(ok);
            if !ok {
                violations.push("range condition holds but the restricted family is not a decomposition".into());
            }
            if !d1.lifted_cost_equals_sum {
                violations.push("lifted sub-problem selection does not cost the sum of sub-problem values".into());
            }
            if d1.lifted_policy_optimal != d1.holds {
                violations.push("lifted selection optimality disagrees with the value equality".into());
            }
            if strict {
                let ok = !d1.holds || (ax_bv && ax_bv_alt);
                decomposition_implies_ax_cap_bv = Some(ok);
                if !ok {
                    violations.push("restricted decomposition holds but A(X) ∩ B(V) ≠ {0}".into());
                }
                if a_invertible {
                    let ok = range.holds == d1.holds;
                    invertible_equivalence = Some(ok);
                    if !ok {
                        violations.push("A invertible but range condition and restricted decomposition disagree".into());
                    }
                }
            }
            if finite {
                let by_h = self.def1_by_horizon().expect("finite horizon");
                let consistent = by_h
                    .iter()
                    .enumerate()
                    .all(|(k, &holds)| !holds || by_h[..k].iter().all(|&b| b));
                if !consistent {
                    violations.push(format!("decomposition is not monotone in the horizon: {by_h:?}"));
                }
                lemma1_agrees_with_def1 = Some(lemma.holds == d1.holds);
                if lemma.holds != d1.holds {
                    violations.push("argmin-intersection condition disagrees with the restricted decomposition".into());
                }
                monotone = Some(MonotoneReport {
                    def1_by_horizon: by_h,
                    consistent,
                });
            } else if lemma.holds && !d1.holds {
                violations.push("stationary selector exists but the restricted family is not a decomposition".into());
            }
        }
        let hierarchy_consistent = match (&def1, &def2) {
            (Some(d1), Some(d2)) => {
                let ok = d2.verdict != Verdict::Holds || d1.holds;
                if !ok {
                    violations.push("projected family is a decomposition but the restricted family is not".into());
                }
                Some(ok)
            }
            _ => None,
        };

        let min_over_e_i = self.min_over_e_i_holds();
        if !min_over_e_i {
            violations.push("minimum over E_i differs from the minimum over ΣE_j".into());
        }
        let cost_to_go_splits = if finite && lemma.holds {
            let ok = self.cost_to_go_splits();
            if !ok {
                violations.push("cost-to-go does not split although every argmin meets ΣE_i".into());
            }
            Some(ok)
        } else {
            None
        };
        let (zero_value_iff_origin, origin_inputs_in_kernel) = if strict {
            let z = self.zero_value_iff_origin();
            let k = self.origin_inputs_in_kernel();
            if !z {
                violations.push("optimal cost vanishes away from the origin".into());
            }
            if !k {
                violations.push("an optimal input at the origin leaves N(B)".into());
            }
            (Some(z), Some(k))
        } else {
            (None, None)
        };

        Ok(DecompositionReport {
            horizon: horizon_summary(inst.horizon()),
            cost_policy: match inst.cost().policy() {
                CostPolicy::Strict => "strict".into(),
                CostPolicy::Semidefinite => "semidefinite".into(),
            },
            a_invertible,
            propositions: PropositionReport {
                min_over_e_i,
                range_iff_u_sum: range.holds == range.u_equals_sum_e,
                ax_cap_bv_trivial: ax_bv,
                ax_cap_bv_trivial_alt: ax_bv_alt,
                decomposition_implies_ax_cap_bv,
                zero_value_iff_origin,
                origin_inputs_in_kernel,
                cost_to_go_splits,
                lemma1_agrees_with_def1,
            },
            range_condition: range,
            lemma1,
            stationary_selector,
            def1,
            def2,
            hierarchy_consistent,
            range_implies_def1,
            invertible_equivalence,
            monotone,
            violations,
        })
    }

    /// Re-runs the pointwise check named by `witness`; `true` if the failure
    /// reproduces.
    pub fn verify_witness(&self, witness: &Witness) -> Result<bool> {
        Ok(match witness {
            Witness::Lemma1 { state, t } => {
                let x = self.resolve(state)?;
                if !self.inst().horizon().is_finite() || *t >= self.stages() {
                    return Ok(false);
                }
                !self.argmin_meets_e_sum(x, *t)
            }
            Witness::StationarySelector { state } => {
                let x = self.resolve(state)?;
                !self.inst().horizon().is_finite() && !self.argmin_meets_e_sum(x, 0)
            }
            Witness::Def1Value { state, parent, sum } => {
                let x = self.resolve(state)?;
                let p = self.parent.values.optimal()[x].clone();
                let s = self.part_sum(&self.restricted, 0, x);
                p != s && &p.to_exact_string() == parent && &s.to_exact_string() == sum
            }
            Witness::Def2Value { state, parent, sum } => {
                let x = self.resolve(state)?;
                let p = self.parent.values.optimal()[x].clone();
                let s = self.part_sum(&self.projected, 0, x);
                p != s && &p.to_exact_string() == parent && &s.to_exact_string() == sum
            }
            Witness::Def2Diagram { state, t, actions, target } => {
                let x = self.resolve(state)?;
                if *t >= self.stages() || actions.len() != self.bundle.num_parts() {
                    return Ok(false);
                }
                let inst = self.inst();
                let field = inst.field();
                let mut y = vec![0u32; inst.state_dim()];
                for (i, a) in actions.iter().enumerate() {
                    let sub = &self.bundle.projected()[i];
                    if a.len() != sub.input_dim() {
                        return Ok(false);
                    }
                    let a_idx = sub.inputs().index(a);
                    if !self.projected[i].argmin.set(*t, self.part_states[i][x]).contains(&a_idx) {
                        return Ok(false);
                    }
                    for (acc, b) in y.iter_mut().zip(self.bundle.projected_effect(i, a_idx)) {
                        *acc = field.add(*acc, b);
                    }
                }
                let y_idx = inst.states().index(&y);
                &y == target
                    && !self
                        .parent
                        .argmin
                        .set(*t, x)
                        .iter()
                        .any(|&u| self.b_images[u] == y_idx)
            }
        })
    }
}

fn horizon_summary<C: CostScalar>(h: &Horizon<C>) -> HorizonSummary {
    match h {
        Horizon::Finite(t) => HorizonSummary {
            kind: "finite".into(),
            t: Some(*t),
            alpha: None,
        },
        Horizon::Discounted(a) => HorizonSummary {
            kind: "discounted".into(),
            t: None,
            alpha: Some(a.to_exact_string()),
        },
    }
}

/// Builds, solves and checks; fails with `TheoremViolation` if any proved
/// implication is contradicted.
pub fn check_decomposition<C: CostScalar>(
    inst: &DpInstance<C>,
    decomposition: &DirectSumDecomposition,
    options: &CheckOptions,
) -> Result<DecompositionReport> {
    let report = Checker::new(inst, decomposition)?.run(options)?;
    report.ensure_consistent()?;
    Ok(report)
}
