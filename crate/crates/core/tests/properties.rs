//! Property tests for the core invariants: normalization, evaluation,
//! parsing robustness, round-trips and oracle agreement with enumeration.

use proptest::prelude::*;

use pboihs::certify::Logger;
use pboihs::exhaustive::brute_force_optimum;
use pboihs::families::{random_feasible_instance, RandomShape};
use pboihs::opb::{parse_opb, write_opb};
use pboihs::oracle::{OracleResult, PbOracle};
use pboihs::pb::{Assignment, Int, Lit, Objective, PbConstraint, Relation, Var};

fn lit_strategy(max_var: u32) -> impl Strategy<Value = Lit> {
    (1..=max_var, any::<bool>())
        .prop_map(|(v, neg)| Lit::new(Var::new(v), neg))
}

fn raw_terms(max_var: u32, len: usize) -> impl Strategy<Value = Vec<(Int, Lit)>> {
    proptest::collection::vec(((-20i128..=20).prop_filter("nonzero", |c| *c != 0), lit_strategy(max_var)), 1..=len)
}

fn relation_strategy() -> impl Strategy<Value = Relation> {
    prop_oneof![
        Just(Relation::GreaterEq),
        Just(Relation::LessEq),
        Just(Relation::Equal)
    ]
}

fn assignments(n: u32) -> Vec<Assignment> {
    (0..(1u32 << n))
        .map(|mask| {
            Assignment::from_complete((0..n).map(|i| mask >> i & 1 == 1).collect())
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Normalization never changes which assignments satisfy a constraint,
    /// duplicate variables and all.
    #[test]
    fn normalize_preserves_satisfaction(
        terms in raw_terms(6, 8),
        relation in relation_strategy(),
        rhs in -40i128..=40,
    ) {
        let normalized = PbConstraint::normalize(&terms, relation, rhs).unwrap();
        for assignment in assignments(6) {
            let mut lhs: Int = 0;
            for &(a, l) in &terms {
                if assignment.lit_value(l).unwrap() {
                    lhs += a;
                }
            }
            let raw_holds = match relation {
                Relation::GreaterEq => lhs >= rhs,
                Relation::LessEq => lhs <= rhs,
                Relation::Equal => lhs == rhs,
            };
            let normalized_holds =
                normalized.iter().all(|c| c.evaluate(&assignment).unwrap());
            prop_assert_eq!(raw_holds, normalized_holds);
        }
    }

    /// Normalizing a normalized constraint is the identity.
    #[test]
    fn normalize_is_idempotent(
        terms in raw_terms(6, 8),
        relation in relation_strategy(),
        rhs in -40i128..=40,
    ) {
        for c in PbConstraint::normalize(&terms, relation, rhs).unwrap() {
            let again = PbConstraint::normalize(c.terms(), Relation::GreaterEq, c.degree())
                .unwrap()
                .remove(0);
            prop_assert_eq!(c.terms(), again.terms());
            prop_assert_eq!(c.degree(), again.degree());
        }
    }

    /// Cost is linear: subtracting the constant leaves exactly the sum of
    /// the weights of satisfied objective literals.
    #[test]
    fn cost_is_linear(
        terms in raw_terms(6, 6),
        constant in -50i128..=50,
    ) {
        let objective = Objective::new(terms, constant).unwrap();
        for assignment in assignments(6) {
            let cost = objective.cost(&assignment).unwrap();
            let satisfied: Int = objective
                .terms()
                .iter()
                .filter(|&&(_, l)| assignment.lit_value(l).unwrap())
                .map(|&(w, _)| w)
                .sum();
            prop_assert_eq!(cost - objective.constant(), satisfied);
        }
    }

    /// Degree-zero constraints hold under every assignment.
    #[test]
    fn degree_zero_is_always_true(terms in raw_terms(5, 6)) {
        let positive: Vec<(Int, Lit)> =
            terms.into_iter().map(|(a, l)| (a.abs().max(1), l)).collect();
        let c = PbConstraint::normalize(&positive, Relation::GreaterEq, 0).unwrap().remove(0);
        for assignment in assignments(5) {
            prop_assert!(c.evaluate(&assignment).unwrap());
        }
    }

    /// The parser returns a value or a diagnostic on any input, never a
    /// panic.
    #[test]
    fn parser_never_panics(input in any::<Vec<u8>>()) {
        let text = String::from_utf8_lossy(&input);
        let _ = parse_opb(&text);
    }

    /// Structured-looking inputs exercise deeper parser paths, still
    /// without panicking.
    #[test]
    fn parser_never_panics_on_opbish_text(
        input in "[-+*;>=<x~0-9a-z \n]{0,120}"
    ) {
        let _ = parse_opb(&input);
    }
}

/// Writing and reparsing an instance preserves the solution set and the
/// optimal cost, checked by enumeration on 100 random instances.
#[test]
fn opb_roundtrip_preserves_solutions() {
    let shape = RandomShape { max_vars: 8, max_constraints: 8, ..RandomShape::default() };
    for seed in 0..100u64 {
        let instance = random_feasible_instance(seed, &shape);
        let reparsed = parse_opb(&write_opb(&instance)).unwrap();
        let a = brute_force_optimum(&instance.constraints, &instance.objective).unwrap();
        let b = brute_force_optimum(&reparsed.constraints, &reparsed.objective).unwrap();
        assert_eq!(a.map(|x| x.0), b.map(|x| x.0), "seed {seed}");
        // Solution sets agree, not just optima: every assignment satisfies
        // either both formulas or neither.
        let n = instance.num_vars.max(reparsed.num_vars);
        if n <= 10 {
            for mask in 0..(1u32 << n) {
                let assignment = Assignment::from_complete(
                    (0..n).map(|i| mask >> i & 1 == 1).collect(),
                );
                let sat_a =
                    instance.constraints.iter().all(|c| c.evaluate(&assignment).unwrap());
                let sat_b =
                    reparsed.constraints.iter().all(|c| c.evaluate(&assignment).unwrap());
                assert_eq!(sat_a, sat_b, "seed {seed} mask {mask}");
            }
        }
    }
}

/// The oracle's satisfiability verdicts agree with enumeration, and its
/// models satisfy every constraint.
#[test]
fn oracle_agrees_with_enumeration() {
    let shape = RandomShape { max_vars: 10, max_constraints: 12, ..RandomShape::default() };
    for seed in 500..650u64 {
        let instance = pboihs::families::random_instance(seed, &shape);
        let brute = brute_force_optimum(&instance.constraints, &Objective::empty()).unwrap();
        let mut oracle = PbOracle::new(instance.num_vars);
        for c in &instance.constraints {
            oracle.add_constraint(c, Vec::new());
        }
        let mut logger = Logger::disabled(instance.num_vars);
        match oracle.solve(&[], &mut logger) {
            OracleResult::Sat(model) => {
                assert!(brute.is_some(), "seed {seed}: oracle says sat, enumeration disagrees");
                for c in &instance.constraints {
                    assert!(c.evaluate(&model).unwrap(), "seed {seed}: model violates {c}");
                }
            }
            OracleResult::Unsat(_) => {
                assert!(brute.is_none(), "seed {seed}: oracle says unsat, enumeration disagrees");
            }
        }
    }
}
