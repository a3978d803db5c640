//! The two families of sub-problems induced by an invariant decomposition.
//!
//! Part `i` is re-coordinatised to `GF(p)^{dim X_i}` through the canonical
//! basis of `X_i`, so every sub-problem is an ordinary [`DpInstance`].

use rayon::prelude::*;

use crate::dp::{self, ControlLaw, CostFunction, DpInstance, InstanceOptions, SizeGuard, Solution, VectorSpace};
use crate::error::{Error, Result};
use crate::scalar::CostScalar;
use crate::subspace::{preimage, subspace_sum_all, DirectSumDecomposition, Subspace};

/// Which family of sub-problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Inputs confined to `E_i = B^{-1}(X_i)`.
    Restricted,
    /// Full input space with effect `ρ_i ∘ B`.
    Projected,
}

#[derive(Debug, Clone)]
pub struct SubproblemBundle<C> {
    parent: DpInstance<C>,
    decomposition: DirectSumDecomposition,
    e: Vec<Subspace>,
    e_sum: Subspace,
    v: Subspace,
    restricted: Vec<DpInstance<C>>,
    projected: Vec<DpInstance<C>>,
}

/// Extends a basis of `s` by standard basis vectors taken in `order`.
pub fn complement_in_order(s: &Subspace, order: &[usize]) -> Subspace {
    let field = s.field();
    let m = s.ambient_dim();
    let mut acc = s.clone();
    let mut extra = Vec::new();
    for &k in order {
        let mut e = vec![0; m];
        e[k] = 1;
        if !acc.contains(&e) {
            extra.push(e);
            let mut all = acc.basis_vectors();
            all.push(extra.last().cloned().expect("just pushed"));
            acc = Subspace::span(field, m, &all);
        }
    }
    Subspace::span(field, m, &extra)
}

/// Greedy complement: standard basis vectors in natural order.
pub fn greedy_complement(s: &Subspace) -> Subspace {
    let order: Vec<usize> = (0..s.ambient_dim()).collect();
    complement_in_order(s, &order)
}

fn sub_options() -> InstanceOptions {
    InstanceOptions {
        guard: SizeGuard::UNLIMITED,
        require_injective: false,
    }
}

/// Builds both families for `inst` over `decomposition`.
pub fn build_bundle<C: CostScalar>(
    inst: &DpInstance<C>,
    decomposition: &DirectSumDecomposition,
) -> Result<SubproblemBundle<C>> {
    let field = inst.field();
    let (n, m) = (inst.state_dim(), inst.input_dim());
    if decomposition.field() != field {
        return Err(Error::ModulusMismatch(field.modulus(), decomposition.field().modulus()));
    }
    if decomposition.ambient_dim() != n {
        return Err(Error::Shape(format!(
            "decomposition of a {}-dimensional space for a {n}-dimensional state",
            decomposition.ambient_dim()
        )));
    }
    for (i, part) in decomposition.parts().iter().enumerate() {
        if !crate::subspace::is_invariant(inst.a(), part) {
            return Err(Error::NotInvariant { part: i });
        }
    }
    if let Some(state) = inst.cost().separability_witness(decomposition) {
        return Err(Error::NotSeparableCost { state });
    }
    let e: Vec<Subspace> = decomposition
        .parts()
        .iter()
        .map(|x| preimage(inst.b(), x))
        .collect::<Result<_>>()?;
    let e_sum = subspace_sum_all(field, m, &e)?;
    let v = greedy_complement(&e_sum);

    let mut restricted = Vec::with_capacity(decomposition.len());
    let mut projected = Vec::with_capacity(decomposition.len());
    for (i, part) in decomposition.parts().iter().enumerate() {
        let a_i = decomposition.coordinate_block(i, &inst.a().mul(part.basis())?)?;
        let cost = pulled_back_cost(inst, decomposition, i)?;
        let b_restricted = decomposition.coordinate_block(i, &inst.b().mul(e[i].basis())?)?;
        let b_projected = decomposition.coordinate_block(i, inst.b())?;
        restricted.push(DpInstance::with_options(
            a_i.clone(),
            b_restricted,
            cost.clone(),
            inst.horizon().clone(),
            sub_options(),
        )?);
        projected.push(DpInstance::with_options(
            a_i,
            b_projected,
            cost,
            inst.horizon().clone(),
            sub_options(),
        )?);
    }
    Ok(SubproblemBundle {
        parent: inst.clone(),
        decomposition: decomposition.clone(),
        e,
        e_sum,
        v,
        restricted,
        projected,
    })
}

fn pulled_back_cost<C: CostScalar>(
    inst: &DpInstance<C>,
    decomposition: &DirectSumDecomposition,
    i: usize,
) -> Result<CostFunction<C>> {
    let space = VectorSpace::new(inst.field(), decomposition.part_dim(i));
    let states = inst.states();
    let table = (0..space.size())
        .map(|s| {
            let x = decomposition.embed(i, &space.vector(s));
            inst.cost().value(states.index(&x)).clone()
        })
        .collect();
    CostFunction::with_policy(table, inst.cost().policy())
}

impl<C: CostScalar> SubproblemBundle<C> {
    pub fn parent(&self) -> &DpInstance<C> {
        &self.parent
    }

    pub fn decomposition(&self) -> &DirectSumDecomposition {
        &self.decomposition
    }

    pub fn num_parts(&self) -> usize {
        self.decomposition.len()
    }

    /// `E_i = B^{-1}(X_i)`.
    pub fn e(&self) -> &[Subspace] {
        &self.e
    }

    /// `Σ_i E_i`.
    pub fn e_sum(&self) -> &Subspace {
        &self.e_sum
    }

    /// The fixed complement `V` of `Σ_i E_i` in `U`.
    pub fn v(&self) -> &Subspace {
        &self.v
    }

    pub fn family(&self, family: Family) -> &[DpInstance<C>] {
        match family {
            Family::Restricted => &self.restricted,
            Family::Projected => &self.projected,
        }
    }

    pub fn restricted(&self) -> &[DpInstance<C>] {
        &self.restricted
    }

    pub fn projected(&self) -> &[DpInstance<C>] {
        &self.projected
    }

    /// Index of `ρ_i x` in part `i`'s state space, for parent state index `x`.
    pub fn part_state(&self, i: usize, x: usize) -> usize {
        let coords = self.decomposition.coordinates(i, &self.parent.states().vector(x));
        VectorSpace::new(self.parent.field(), self.decomposition.part_dim(i)).index(&coords)
    }

    /// Parent state index of the embedding of part state `s`.
    pub fn embed_state(&self, i: usize, s: usize) -> usize {
        let space = VectorSpace::new(self.parent.field(), self.decomposition.part_dim(i));
        let x = self.decomposition.embed(i, &space.vector(s));
        self.parent.states().index(&x)
    }

    /// Parent input vector of a sub-problem input index.
    pub fn lift_input(&self, family: Family, i: usize, u: usize) -> Vec<u32> {
        let inst = &self.family(family)[i];
        let ubar = inst.inputs().vector(u);
        match family {
            Family::Restricted => self.e[i].basis().mul_vec(&ubar),
            Family::Projected => ubar,
        }
    }

    /// `ρ_i ∘ B a` as an ambient state vector, for a projected-family input.
    pub fn projected_effect(&self, i: usize, u: usize) -> Vec<u32> {
        let inst = &self.projected[i];
        let coords = inst.b().mul_vec(&inst.inputs().vector(u));
        self.decomposition.embed(i, &coords)
    }
}

/// Solves every sub-problem of one family (independently, in parallel).
pub fn solve_bundle<C: CostScalar>(bundle: &SubproblemBundle<C>, family: Family) -> Result<Vec<Solution<C>>> {
    bundle.family(family).par_iter().map(dp::solve).collect()
}

/// Control law `x ↦ Σ_i lift(selection_i(ρ_i x))` on the parent.
///
/// `selections[i]` is a control law on part `i`'s state space; all of them
/// must have the same number of stages.
pub fn lift_policy<C: CostScalar>(
    bundle: &SubproblemBundle<C>,
    family: Family,
    selections: &[ControlLaw],
) -> Result<ControlLaw> {
    if selections.len() != bundle.num_parts() {
        return Err(Error::InvalidInput(format!(
            "{} selections for {} parts",
            selections.len(),
            bundle.num_parts()
        )));
    }
    let stages = selections[0].stages.len();
    if selections.iter().any(|s| s.stages.len() != stages) {
        return Err(Error::HorizonMismatch("selections disagree on the number of stages".into()));
    }
    let field = bundle.parent.field();
    let states = bundle.parent.states();
    let inputs = bundle.parent.inputs();
    let part_states: Vec<Vec<usize>> = (0..bundle.num_parts())
        .map(|i| (0..states.size()).map(|x| bundle.part_state(i, x)).collect())
        .collect();
    let law = (0..stages)
        .map(|t| {
            (0..states.size())
                .map(|x| {
                    let mut u = vec![0u32; inputs.dim];
                    for (i, sel) in selections.iter().enumerate() {
                        let lifted = bundle.lift_input(family, i, sel.stages[t][part_states[i][x]]);
                        for (a, b) in u.iter_mut().zip(lifted) {
                            *a = field.add(*a, b);
                        }
                    }
                    inputs.index(&u)
                })
                .collect()
        })
        .collect();
    Ok(ControlLaw { stages: law })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::{CostPolicy, Horizon};
    use crate::field::PrimeField;
    use crate::matrix::MatrixFp;
    use crate::scalar::{rational, Rational};

    fn gf3() -> PrimeField {
        PrimeField::new(3).unwrap()
    }

    fn r(n: i64) -> Rational {
        rational(n, 1)
    }

    fn unit_parts(n: usize) -> DirectSumDecomposition {
        let f = gf3();
        DirectSumDecomposition::new(
            (0..n)
                .map(|i| {
                    let mut v = vec![0; n];
                    v[i] = 1;
                    Subspace::span(f, n, &[v])
                })
                .collect(),
        )
        .unwrap()
    }

    fn example3(t: usize) -> (DpInstance<Rational>, DirectSumDecomposition) {
        let f = gf3();
        let d = unit_parts(3);
        let a = MatrixFp::from_rows(f, &[[1, 0, 0], [0, 1, 0], [0, 0, 0]]).unwrap();
        let b = MatrixFp::from_rows(f, &[[1, 1], [0, 1], [0, 1]]).unwrap();
        let g = CostFunction::indicator(&d, &[r(1), r(1), r(1)], CostPolicy::Strict).unwrap();
        (DpInstance::new(a, b, g, Horizon::finite(t).unwrap()).unwrap(), d)
    }

    #[test]
    fn example3_restricted_family() {
        let (inst, d) = example3(1);
        let bundle = build_bundle(&inst, &d).unwrap();
        let f = gf3();
        assert_eq!(bundle.e()[0], Subspace::span(f, 2, &[vec![1, 0]]));
        assert!(bundle.e()[1].is_zero() && bundle.e()[2].is_zero());
        assert_eq!(bundle.v(), &Subspace::span(f, 2, &[vec![0, 1]]));
        assert_eq!(bundle.restricted()[1].input_dim(), 0);
        assert_eq!(bundle.restricted()[2].input_dim(), 0);
        assert_eq!(bundle.restricted()[1].inputs().size(), 1);

        let sols = solve_bundle(&bundle, Family::Restricted).unwrap();
        let h = [r(0), r(1), r(1)];
        for s in 0..3 {
            assert_eq!(sols[0].values.optimal()[s], h[s]);
            assert_eq!(sols[1].values.optimal()[s], r(2) * h[s].clone());
            assert_eq!(sols[2].values.optimal()[s], h[s]);
        }
    }

    #[test]
    fn example3_projected_matrices_and_values() {
        let (inst, d) = example3(1);
        let bundle = build_bundle(&inst, &d).unwrap();
        let f = gf3();
        let rows = [[1, 1], [0, 1], [0, 1]];
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(bundle.projected()[i].b(), &MatrixFp::from_rows(f, &[*row]).unwrap());
        }
        let sols = solve_bundle(&bundle, Family::Projected).unwrap();
        for sol in &sols {
            assert_eq!(sol.values.optimal(), &[r(0), r(1), r(1)]);
        }
    }

    #[test]
    fn example3_lifted_action() {
        let (inst, d) = example3(1);
        let bundle = build_bundle(&inst, &d).unwrap();
        let sols = solve_bundle(&bundle, Family::Restricted).unwrap();
        let selections: Vec<ControlLaw> = sols
            .iter()
            .map(|s| ControlLaw {
                stages: vec![(0..3).map(|x| s.argmin.set(0, x)[0]).collect()],
            })
            .collect();
        let law = lift_policy(&bundle, Family::Restricted, &selections).unwrap();
        let states = inst.states();
        let inputs = inst.inputs();
        for x in 0..27 {
            let v = states.vector(x);
            let u = inputs.vector(law.action(0, x));
            assert_eq!(u, vec![(3 - v[0]) % 3, 0]);
        }
    }

    #[test]
    fn restricted_dynamics_commute_with_embedding() {
        let f = gf3();
        let a = MatrixFp::from_rows(f, &[[1, 1, 0], [0, 2, 0], [0, 0, 1]]).unwrap();
        let b = MatrixFp::from_rows(f, &[[1, 0], [1, 1], [0, 1]]).unwrap();
        let parts = [vec![1, 0, 0], vec![1, 1, 0], vec![0, 0, 1]]
            .into_iter()
            .map(|v| Subspace::span(f, 3, &[v]))
            .collect();
        let d = DirectSumDecomposition::new(parts).unwrap();
        let g = CostFunction::indicator(&d, &[r(0), r(1), r(0)], CostPolicy::Semidefinite).unwrap();
        let inst = DpInstance::new(a.clone(), b.clone(), g, Horizon::finite(1).unwrap()).unwrap();
        let bundle = build_bundle(&inst, &d).unwrap();
        assert_eq!(bundle.e()[1], Subspace::span(f, 2, &[vec![1, 0]]));
        let sub = &bundle.restricted()[1];
        assert_eq!(sub.a(), &MatrixFp::from_rows(f, &[[2]]).unwrap());
        assert_eq!(sub.b(), &MatrixFp::from_rows(f, &[[1]]).unwrap());
        for (i, sub) in bundle.restricted().iter().enumerate() {
            for s in 0..sub.states().size() {
                for u in 0..sub.inputs().size() {
                    let next = sub.transitions().next(s, u);
                    let x = d.embed(i, &sub.states().vector(s));
                    let ax = a.mul_vec(&x);
                    let bu = b.mul_vec(&bundle.lift_input(Family::Restricted, i, u));
                    let y: Vec<u32> = ax.iter().zip(&bu).map(|(p, q)| (p + q) % 3).collect();
                    assert_eq!(bundle.embed_state(i, next), inst.states().index(&y));
                }
            }
        }
    }

    #[test]
    fn rejects_non_separable_cost() {
        let f = gf3();
        let d = unit_parts(2);
        let g = CostFunction::new((0..9).map(|k| r(i64::from(k != 0))).collect()).unwrap();
        let inst = DpInstance::new(
            MatrixFp::identity(f, 2),
            MatrixFp::identity(f, 2),
            g,
            Horizon::finite(1).unwrap(),
        )
        .unwrap();
        assert!(matches!(build_bundle(&inst, &d), Err(Error::NotSeparableCost { .. })));
    }

    #[test]
    fn complement_depends_only_on_order() {
        let f = gf3();
        let s = Subspace::span(f, 3, &[vec![1, 1, 0]]);
        let v1 = greedy_complement(&s);
        let v2 = complement_in_order(&s, &[2, 1, 0]);
        assert_eq!(v1, Subspace::span(f, 3, &[vec![1, 0, 0], vec![0, 0, 1]]));
        assert_eq!(v2, Subspace::span(f, 3, &[vec![0, 0, 1], vec![0, 1, 0]]));
    }
}
