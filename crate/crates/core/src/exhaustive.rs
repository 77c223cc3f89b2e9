//! Brute-force enumeration over small variable sets. This is the
//! independent reference used to validate cores, backend results and
//! proofs; it deliberately shares no code with the solving path.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::pb::{Assignment, Int, Objective, PbConstraint, Var};

/// Hard cap on the number of enumerated variables.
pub const VAR_GUARD: usize = 24;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExhaustiveError {
    #[error("refusing to enumerate {0} variables (guard is {VAR_GUARD})")]
    TooManyVariables(usize),
}

fn collect_vars<'a>(
    constraints: impl IntoIterator<Item = &'a PbConstraint>,
    objective: Option<&Objective>,
) -> Vec<Var> {
    let mut vars: BTreeSet<Var> = BTreeSet::new();
    for c in constraints {
        vars.extend(c.vars());
    }
    if let Some(o) = objective {
        vars.extend(o.vars());
    }
    vars.into_iter().collect()
}

fn for_each_assignment<F: FnMut(&Assignment)>(
    vars: &[Var],
    mut visit: F,
) -> Result<(), ExhaustiveError> {
    if vars.len() > VAR_GUARD {
        return Err(ExhaustiveError::TooManyVariables(vars.len()));
    }
    let max_var = vars.iter().map(|v| v.index()).max().unwrap_or(0);
    let mut assignment = Assignment::empty(max_var);
    for var in vars {
        assignment.set(*var, false);
    }
    for mask in 0u64..(1u64 << vars.len()) {
        for (bit, var) in vars.iter().enumerate() {
            assignment.set(*var, mask >> bit & 1 == 1);
        }
        visit(&assignment);
    }
    Ok(())
}

/// Whether every solution of `formula` satisfies `candidate`, decided by
/// full enumeration of the variables mentioned on either side. Variables
/// outside that set cannot affect the answer.
pub fn entailed_by_bruteforce(
    formula: &[PbConstraint],
    candidate: &PbConstraint,
) -> Result<bool, ExhaustiveError> {
    let vars = collect_vars(formula.iter().chain(std::iter::once(candidate)), None);
    let mut entailed = true;
    for_each_assignment(&vars, |a| {
        if entailed
            && formula.iter().all(|c| c.evaluate(a).unwrap())
            && !candidate.evaluate(a).unwrap()
        {
            entailed = false;
        }
    })?;
    Ok(entailed)
}

/// Exact optimum of `(constraints, objective)` by enumeration, or `None`
/// when the constraints are infeasible. The returned assignment covers the
/// enumerated variables; unmentioned variables are free.
pub fn brute_force_optimum(
    constraints: &[PbConstraint],
    objective: &Objective,
) -> Result<Option<(Int, Assignment)>, ExhaustiveError> {
    let vars = collect_vars(constraints.iter(), Some(objective));
    let mut best: Option<(Int, Assignment)> = None;
    for_each_assignment(&vars, |a| {
        if constraints.iter().all(|c| c.evaluate(a).unwrap()) {
            let cost = objective.cost(a).unwrap();
            if best.as_ref().is_none_or(|(b, _)| cost < *b) {
                best = Some((cost, a.clone()));
            }
        }
    })?;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pb::{Objective, Relation};

    fn ge(terms: &[(Int, u32)], rhs: Int) -> PbConstraint {
        let raw: Vec<_> = terms.iter().map(|&(a, v)| (a, Var::new(v).positive())).collect();
        PbConstraint::normalize(&raw, Relation::GreaterEq, rhs).unwrap().remove(0)
    }

    #[test]
    fn self_entailment() {
        let c = ge(&[(1, 1), (1, 2)], 1);
        assert!(entailed_by_bruteforce(std::slice::from_ref(&c), &c).unwrap());
    }

    #[test]
    fn entailed_through_propagation() {
        // {x >= 1, x + y >= 2} entails y >= 1: the only solution is x=y=1.
        let f = vec![ge(&[(1, 1)], 1), ge(&[(1, 1), (1, 2)], 2)];
        let c = ge(&[(1, 2)], 1);
        assert!(entailed_by_bruteforce(&f, &c).unwrap());
    }

    #[test]
    fn not_entailed_with_witness() {
        // {x + y >= 1} does not entail x >= 1: x=0, y=1 is a witness.
        let f = vec![ge(&[(1, 1), (1, 2)], 1)];
        let c = ge(&[(1, 1)], 1);
        assert!(!entailed_by_bruteforce(&f, &c).unwrap());
    }

    #[test]
    fn guard_refuses_large_inputs() {
        let terms: Vec<(Int, u32)> = (1..=25).map(|v| (1, v)).collect();
        let c = ge(&terms, 1);
        assert_eq!(
            entailed_by_bruteforce(&[], &c).unwrap_err(),
            ExhaustiveError::TooManyVariables(25)
        );
    }

    #[test]
    fn optimum_simple() {
        // minimize 2x + 3y subject to x + y >= 1
        let f = vec![ge(&[(1, 1), (1, 2)], 1)];
        let o = Objective::new(
            vec![(2, Var::new(1).positive()), (3, Var::new(2).positive())],
            0,
        )
        .unwrap();
        let (cost, a) = brute_force_optimum(&f, &o).unwrap().unwrap();
        assert_eq!(cost, 2);
        assert_eq!(a.value(Var::new(1)), Some(true));
        assert_eq!(a.value(Var::new(2)), Some(false));
    }

    #[test]
    fn optimum_infeasible() {
        let f = vec![ge(&[(1, 1)], 1), ge(&[(-1, 1)], 0)];
        let o = Objective::empty();
        assert!(brute_force_optimum(&f, &o).unwrap().is_none());
    }
}
