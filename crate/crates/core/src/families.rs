//! Deterministic instance generators used by the test suites and the
//! benchmark harness: small random instances for cross-checking against
//! enumeration, plus two structured families (weighted vertex cover and
//! knapsack with conflict pairs).

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::exhaustive::brute_force_optimum;
use crate::pb::{Instance, Int, Lit, Objective, PbConstraint, Relation, Var};

/// Shape limits for random instances.
#[derive(Clone, Copy, Debug)]
pub struct RandomShape {
    pub max_vars: u32,
    pub max_constraints: usize,
    pub max_coefficient: Int,
    pub max_weight: Int,
}

impl Default for RandomShape {
    fn default() -> RandomShape {
        RandomShape { max_vars: 12, max_constraints: 15, max_coefficient: 10, max_weight: 10 }
    }
}

/// A random instance within the shape limits. The objective ranges over a
/// subset of the variables so core extraction has real work to do.
pub fn random_instance(seed: u64, shape: &RandomShape) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_vars = rng.random_range(2..=shape.max_vars);
    let num_constraints = rng.random_range(1..=shape.max_constraints);

    let mut constraints = Vec::with_capacity(num_constraints);
    for _ in 0..num_constraints {
        let arity = rng.random_range(1..=(num_vars.min(4)) as usize);
        let mut vars: Vec<u32> = (1..=num_vars).collect();
        for i in 0..arity {
            let j = rng.random_range(i..vars.len());
            vars.swap(i, j);
        }
        let terms: Vec<(Int, Lit)> = vars[..arity]
            .iter()
            .map(|&v| {
                let coef = rng.random_range(1..=shape.max_coefficient);
                let var = Var::new(v);
                let lit = if rng.random_bool(0.5) { var.positive() } else { var.negative() };
                (coef, lit)
            })
            .collect();
        let max_sum: Int = terms.iter().map(|&(a, _)| a).sum();
        let rhs = rng.random_range(1..=max_sum.max(1));
        constraints
            .extend(PbConstraint::normalize(&terms, Relation::GreaterEq, rhs).unwrap());
    }

    // Roughly two thirds of the variables carry objective weight, a fifth
    // of them on the negated literal, plus a small constant term.
    let mut objective_terms = Vec::new();
    for v in 1..=num_vars {
        if rng.random_bool(0.67) {
            let w = rng.random_range(1..=shape.max_weight);
            let var = Var::new(v);
            let lit = if rng.random_bool(0.2) { var.negative() } else { var.positive() };
            objective_terms.push((w, lit));
        }
    }
    if objective_terms.is_empty() {
        objective_terms.push((rng.random_range(1..=shape.max_weight), Var::new(1).positive()));
    }
    let constant = rng.random_range(-5..=5);
    let objective = Objective::new(objective_terms, constant).unwrap();
    Instance::new(constraints, objective, num_vars)
}

/// Like [`random_instance`] but resampled until feasible (checked by
/// enumeration, so only valid within the enumeration guard).
pub fn random_feasible_instance(seed: u64, shape: &RandomShape) -> Instance {
    let mut attempt = 0u64;
    loop {
        let instance = random_instance(seed.wrapping_mul(1_000_003).wrapping_add(attempt), shape);
        if brute_force_optimum(&instance.constraints, &instance.objective)
            .expect("shape fits the enumeration guard")
            .is_some()
        {
            return instance;
        }
        attempt += 1;
    }
}

/// Minimum-weight vertex cover on a random graph: one 0-1 variable per
/// vertex, a covering constraint per edge, vertex weights to minimize.
pub fn weighted_vertex_cover(n: u32, edge_probability: f64, max_weight: Int, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut constraints = Vec::new();
    for u in 1..=n {
        for v in (u + 1)..=n {
            if rng.random_bool(edge_probability) {
                constraints.push(PbConstraint::from_normalized(
                    vec![(1, Var::new(u).positive()), (1, Var::new(v).positive())],
                    1,
                ));
            }
        }
    }
    let objective = Objective::new(
        (1..=n).map(|v| (rng.random_range(1..=max_weight), Var::new(v).positive())).collect(),
        0,
    )
    .unwrap();
    Instance::new(constraints, objective, n)
}

/// 0-1 knapsack with conflict pairs, phrased as minimization: maximizing
/// the packed profit equals minimizing the profit left behind.
pub fn knapsack_with_conflicts(n: u32, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<Int> = (0..n).map(|_| rng.random_range(1..=20)).collect();
    let profits: Vec<Int> = (0..n).map(|_| rng.random_range(1..=15)).collect();
    let capacity: Int = weights.iter().sum::<Int>() / 2;

    let mut constraints = Vec::new();
    let capacity_terms: Vec<(Int, Lit)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| (w, Var::new(i as u32 + 1).positive()))
        .collect();
    constraints.extend(
        PbConstraint::normalize(&capacity_terms, Relation::LessEq, capacity).unwrap(),
    );
    // Sparse random conflicts: picking both endpoints is forbidden.
    for u in 1..=n {
        for v in (u + 1)..=n {
            if rng.random_bool(2.0 / n as f64) {
                constraints.push(PbConstraint::from_normalized(
                    vec![(1, Var::new(u).negative()), (1, Var::new(v).negative())],
                    1,
                ));
            }
        }
    }
    // Minimize foregone profit: sum p_i (1 - x_i).
    let objective = Objective::new(
        profits
            .iter()
            .enumerate()
            .map(|(i, &p)| (p, Var::new(i as u32 + 1).negative()))
            .collect(),
        0,
    )
    .unwrap();
    Instance::new(constraints, objective, n)
}
