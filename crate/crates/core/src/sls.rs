//! # Stochastic Local Search
//!
//! Flip-based search over the accumulated core set. The engine keeps its
//! state between calls: new cores are appended and the search repairs the
//! previous solution instead of starting over. Each call runs two phases,
//! one from the previous solution and one from a heavily perturbed copy of
//! it, preferring the perturbed result on cost ties so that consecutive
//! hitting-set solutions stay diverse.
//!
//! Falsified constraints carry dynamic weights that grow at local optima,
//! with occasional smoothing of satisfied constraints. Flip selection
//! scores a variable by the weighted penalty change over all constraints
//! it occurs in plus the objective change.
//!
//! SLS never updates the lower bound and never claims optimality.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::pb::{Assignment, Int, Objective, PbConstraint, Var};

/// Tunable knobs, all deterministic given the seed.
#[derive(Clone, Debug)]
pub struct SlsConfig {
    /// Fraction of variables flipped for the phase-2 restart.
    pub perturbation_ratio: f64,
    /// Flips per phase are `multiplier * n` unless overridden per call.
    pub flip_budget_multiplier: usize,
    /// Probability of smoothing satisfied-constraint weights at a local
    /// optimum instead of bumping falsified ones.
    pub smoothing_probability: f64,
    /// Scale of the objective term in the flip score.
    pub soft_weight_factor: Int,
    /// Candidate sample size once the variable count exceeds
    /// `bms_threshold`.
    pub bms_sample: usize,
    pub bms_threshold: usize,
    pub seed: u64,
}

impl Default for SlsConfig {
    fn default() -> SlsConfig {
        SlsConfig {
            perturbation_ratio: 0.3,
            flip_budget_multiplier: 10,
            smoothing_probability: 0.3,
            soft_weight_factor: 1,
            bms_sample: 50,
            bms_threshold: 1000,
            seed: 0,
        }
    }
}

/// Work samples for the skip heuristic: deterministic operation counts
/// rather than wall-clock time, so runs with a fixed seed replay exactly.
#[derive(Clone, Copy, Debug, Default)]
struct WorkMean {
    samples: u64,
    total: u64,
}

impl WorkMean {
    fn record(&mut self, work: u64) {
        self.samples += 1;
        self.total += work;
    }
}

pub struct SlsState {
    config: SlsConfig,
    /// Search domain: the objective variables, sorted by index.
    vars: Vec<Var>,
    /// Objective cost change per domain slot when the variable turns true:
    /// positive when the positive literal costs, negative when the negated
    /// literal costs.
    cost_delta_when_true: Vec<Int>,
    objective_constant: Int,
    constraints: Vec<PbConstraint>,
    weights: Vec<Int>,
    /// Per domain slot: (constraint index, coefficient signed by polarity;
    /// positive when the positive literal occurs).
    occ: Vec<Vec<(usize, Int)>>,
    var_slot: Vec<Option<usize>>,
    current: Vec<bool>,
    best: Option<(Vec<bool>, Int)>,
    rng: ChaCha8Rng,
    sls_work: WorkMean,
    optimizer_work: WorkMean,
    pub flips: u64,
}

impl SlsState {
    pub fn new(objective: &Objective, config: SlsConfig) -> SlsState {
        let vars: Vec<Var> = objective.vars().collect();
        let max_var = objective.max_var() as usize;
        let mut var_slot = vec![None; max_var];
        let mut cost_delta = Vec::with_capacity(vars.len());
        for (slot, &(w, l)) in objective.terms().iter().enumerate() {
            var_slot[l.var().offset()] = Some(slot);
            cost_delta.push(if l.is_negated() { -w } else { w });
        }
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let n = vars.len();
        SlsState {
            config,
            vars,
            cost_delta_when_true: cost_delta,
            objective_constant: objective.constant(),
            constraints: Vec::new(),
            weights: Vec::new(),
            occ: vec![Vec::new(); n],
            var_slot,
            // Cost-free start: every objective literal false.
            current: objective.terms().iter().map(|&(_, l)| l.is_negated()).collect(),
            best: None,
            rng,
            sls_work: WorkMean::default(),
            optimizer_work: WorkMean::default(),
            flips: 0,
        }
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Appends newly extracted cores. The previous best solution is kept
    /// only if it still satisfies everything.
    pub fn add_cores<'a>(&mut self, cores: impl IntoIterator<Item = &'a PbConstraint>) {
        for core in cores {
            let ci = self.constraints.len();
            for &(a, l) in core.terms() {
                let slot = self.var_slot[l.var().offset()]
                    .expect("cores mention only objective variables");
                self.occ[slot].push((ci, if l.is_negated() { -a } else { a }));
            }
            self.constraints.push(core.clone());
            self.weights.push(1);
        }
        if let Some((best, _)) = &self.best {
            let assignment = self.to_assignment(best);
            let ok = self.constraints.iter().all(|c| c.evaluate(&assignment).unwrap_or(false));
            if !ok {
                self.best = None;
            }
        }
    }

    pub fn record_sls_work(&mut self, work: u64) {
        self.sls_work.record(work);
    }

    pub fn record_optimizer_work(&mut self, work: u64) {
        self.optimizer_work.record(work);
    }

    /// Skip heuristic: once at least three samples of each are in, SLS is
    /// skipped whenever the optimizer's mean cost per call is no larger
    /// than the SLS mean.
    pub fn use_sls(&self) -> bool {
        if self.sls_work.samples < 3 || self.optimizer_work.samples < 3 {
            return true;
        }
        // mean_opt <= mean_sls, cross-multiplied to stay exact
        let opt = self.optimizer_work;
        let sls = self.sls_work;
        !(opt.total as u128 * sls.samples as u128 <= sls.total as u128 * opt.samples as u128)
    }

    fn to_assignment(&self, values: &[bool]) -> Assignment {
        let mut a = Assignment::empty(self.var_slot.len() as u32);
        for (slot, var) in self.vars.iter().enumerate() {
            a.set(*var, values[slot]);
        }
        a
    }

    fn cost_of(&self, values: &[bool]) -> Int {
        let mut cost = self.objective_constant;
        for (slot, &d) in self.cost_delta_when_true.iter().enumerate() {
            if d > 0 && values[slot] {
                cost += d;
            } else if d < 0 && !values[slot] {
                cost -= d;
            }
        }
        cost
    }

    fn lhs_values(&self, values: &[bool]) -> Vec<Int> {
        self.constraints
            .iter()
            .map(|c| {
                c.terms()
                    .iter()
                    .map(|&(a, l)| {
                        let slot = self.var_slot[l.var().offset()].unwrap();
                        if l.apply(values[slot]) {
                            a
                        } else {
                            0
                        }
                    })
                    .sum()
            })
            .collect()
    }

    /// Penalty-and-cost score of flipping the variable in `slot`; higher is
    /// more attractive.
    fn flip_score(&self, slot: usize, values: &[bool], lhs: &[Int]) -> Int {
        let mut score: Int = 0;
        for &(ci, signed) in &self.occ[slot] {
            let d = self.constraints[ci].degree();
            let before = lhs[ci];
            // literal currently true exactly when its polarity matches
            let delta = if (signed > 0) == values[slot] { -signed.abs() } else { signed.abs() };
            let after = before + delta;
            let pen_before = (d - before).max(0);
            let pen_after = (d - after).max(0);
            score += self.weights[ci] * (pen_before - pen_after);
        }
        let d = self.cost_delta_when_true[slot];
        let cost_delta = if values[slot] { -d } else { d };
        score - self.config.soft_weight_factor * cost_delta
    }

    /// Score of flipping a variable in the current assignment.
    pub fn score(&self, var: Var) -> Int {
        match self.var_slot.get(var.offset()).copied().flatten() {
            Some(slot) => {
                let lhs = self.lhs_values(&self.current);
                self.flip_score(slot, &self.current, &lhs)
            }
            None => 0,
        }
    }

    /// Flips exactly `k` distinct variables chosen uniformly. Exposed so
    /// the exact perturbation distance is testable.
    pub fn perturb(&mut self, values: &mut [bool], k: usize) {
        let n = values.len();
        let k = k.min(n);
        let mut order: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = self.rng.random_range(i..n);
            order.swap(i, j);
            values[order[i]] = !values[order[i]];
        }
    }

    /// Two-phase search. Returns the better feasible solution found, or
    /// nothing when both phases fail to reach feasibility within budget.
    /// The default budget is `flip_budget_multiplier * n` flips per phase.
    pub fn search(&mut self, ub: Int, flip_budget: Option<usize>) -> Option<Assignment> {
        let n = self.vars.len();
        if self.constraints.is_empty() {
            // Vacuous constraints: the cost-free assignment is optimal.
            let values: Vec<bool> = self.cost_delta_when_true.iter().map(|&d| d < 0).collect();
            self.current = values.clone();
            return Some(self.to_assignment(&values));
        }
        if n == 0 {
            return None;
        }
        let budget = flip_budget.unwrap_or(self.config.flip_budget_multiplier * n);

        let start1 = self.current.clone();
        let phase1 = self.run_phase(start1, budget, ub);

        let mut start2 = self.current.clone();
        let k = (self.config.perturbation_ratio * n as f64).ceil() as usize;
        self.perturb(&mut start2, k);
        let phase2 = self.run_phase(start2, budget, ub);

        // Prefer lower cost; phase 2 wins ties for diversification.
        let chosen = match (phase1, phase2) {
            (Some((v1, c1)), Some((v2, c2))) => {
                if c1 < c2 {
                    Some((v1, c1))
                } else {
                    Some((v2, c2))
                }
            }
            (one, two) => one.or(two),
        };
        let (values, cost) = chosen?;
        if self.best.as_ref().is_none_or(|(_, b)| cost < *b) {
            self.best = Some((values.clone(), cost));
        }
        self.current = values.clone();
        Some(self.to_assignment(&values))
    }

    fn run_phase(
        &mut self,
        mut values: Vec<bool>,
        budget: usize,
        ub: Int,
    ) -> Option<(Vec<bool>, Int)> {
        let mut lhs = self.lhs_values(&values);
        let mut best: Option<(Vec<bool>, Int)> = None;
        let mut candidates: Vec<usize> = Vec::new();

        for _ in 0..budget {
            let falsified: Vec<usize> = (0..self.constraints.len())
                .filter(|&ci| lhs[ci] < self.constraints[ci].degree())
                .collect();
            if falsified.is_empty() {
                let cost = self.cost_of(&values);
                if best.as_ref().is_none_or(|(_, b)| cost < *b) {
                    best = Some((values.clone(), cost));
                }
            }

            candidates.clear();
            if falsified.is_empty() {
                // Feasible: consider flips that could lower the cost.
                for (slot, &value) in values.iter().enumerate() {
                    let d = self.cost_delta_when_true[slot];
                    if (d > 0 && value) || (d < 0 && !value) {
                        candidates.push(slot);
                    }
                }
                if candidates.is_empty() {
                    break; // cost-free and feasible, nothing to improve
                }
            } else {
                for &ci in &falsified {
                    for &(_, l) in self.constraints[ci].terms() {
                        let slot = self.var_slot[l.var().offset()].unwrap();
                        if !candidates.contains(&slot) {
                            candidates.push(slot);
                        }
                    }
                }
            }

            // Best-from-multiple-selections on very large domains.
            if values.len() > self.config.bms_threshold
                && candidates.len() > self.config.bms_sample
            {
                for i in 0..self.config.bms_sample {
                    let j = self.rng.random_range(i..candidates.len());
                    candidates.swap(i, j);
                }
                candidates.truncate(self.config.bms_sample);
            }

            let mut best_score = Int::MIN;
            let mut top: Vec<usize> = Vec::new();
            for &slot in &candidates {
                let s = self.flip_score(slot, &values, &lhs);
                if s > best_score {
                    best_score = s;
                    top.clear();
                    top.push(slot);
                } else if s == best_score {
                    top.push(slot);
                }
            }

            let slot = if best_score > 0 {
                top[self.rng.random_range(0..top.len())]
            } else {
                // Local optimum: stop if already improving on the incumbent,
                // otherwise adapt weights and take a randomized step.
                if falsified.is_empty() && best.as_ref().is_some_and(|(_, c)| *c < ub) {
                    break;
                }
                if self.rng.random_range(0.0..1.0) < self.config.smoothing_probability {
                    for (ci, weight) in self.weights.iter_mut().enumerate() {
                        if lhs[ci] >= self.constraints[ci].degree() && *weight > 1 {
                            *weight -= 1;
                        }
                    }
                } else {
                    for &ci in &falsified {
                        self.weights[ci] += 1;
                    }
                }
                if falsified.is_empty() {
                    candidates[self.rng.random_range(0..candidates.len())]
                } else {
                    let ci = falsified[self.rng.random_range(0..falsified.len())];
                    let terms = self.constraints[ci].terms();
                    let (_, l) = terms[self.rng.random_range(0..terms.len())];
                    self.var_slot[l.var().offset()].unwrap()
                }
            };

            // Apply the flip and update the cached left-hand sides.
            values[slot] = !values[slot];
            self.flips += 1;
            for &(ci, signed) in &self.occ[slot] {
                if (signed > 0) == values[slot] {
                    lhs[ci] += signed.abs();
                } else {
                    lhs[ci] -= signed.abs();
                }
            }
        }

        // A final check catches a solution reached on the very last flip.
        if (0..self.constraints.len()).all(|ci| lhs[ci] >= self.constraints[ci].degree()) {
            let cost = self.cost_of(&values);
            if best.as_ref().is_none_or(|(_, b)| cost < *b) {
                best = Some((values, cost));
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pb::{Lit, Relation};

    fn xl(i: u32) -> Lit {
        Var::new(i).positive()
    }

    fn ge(terms: &[(Int, Lit)], rhs: Int) -> PbConstraint {
        PbConstraint::normalize(terms, Relation::GreaterEq, rhs).unwrap().remove(0)
    }

    fn unit_objective(n: u32) -> Objective {
        Objective::new((1..=n).map(|i| (1, xl(i))).collect(), 0).unwrap()
    }

    #[test]
    fn use_sls_defaults_on_without_samples() {
        let state = SlsState::new(&unit_objective(2), SlsConfig::default());
        assert!(state.use_sls());
    }

    #[test]
    fn use_sls_follows_mean_costs() {
        let mut state = SlsState::new(&unit_objective(2), SlsConfig::default());
        for _ in 0..3 {
            state.record_sls_work(50);
            state.record_optimizer_work(5);
        }
        assert!(!state.use_sls(), "cheap optimizer calls make SLS pointless");
        let mut state = SlsState::new(&unit_objective(2), SlsConfig::default());
        for _ in 0..3 {
            state.record_sls_work(50);
            state.record_optimizer_work(500);
        }
        assert!(state.use_sls(), "expensive optimizer calls justify SLS");
    }

    #[test]
    fn finds_cheap_solution_on_single_clause() {
        let mut state = SlsState::new(&unit_objective(2), SlsConfig::default());
        state.add_cores([ge(&[(1, xl(1)), (1, xl(2))], 1)].iter());
        let solution = state.search(10, None).expect("feasible within budget");
        let cost: Int = unit_objective(2).cost(&solution).unwrap();
        assert_eq!(cost, 1, "exactly one of the two unit-cost variables");
        for c in &state.constraints {
            assert!(c.evaluate(&solution).unwrap());
        }
    }

    #[test]
    fn empty_core_set_returns_cost_free_assignment() {
        let objective = Objective::new(vec![(2, xl(1)), (3, xl(2))], 7).unwrap();
        let mut state = SlsState::new(&objective, SlsConfig::default());
        let solution = state.search(100, None).unwrap();
        assert_eq!(objective.cost(&solution).unwrap(), 7);
    }

    #[test]
    fn zero_budget_with_infeasible_start_returns_nothing() {
        let mut state = SlsState::new(&unit_objective(2), SlsConfig::default());
        state.add_cores([ge(&[(1, xl(1)), (1, xl(2))], 2)].iter());
        // The cost-free start violates the core; zero flips cannot fix it.
        assert!(state.search(10, Some(0)).is_none());
    }

    #[test]
    fn score_signs_match_intuition() {
        let objective = Objective::new(vec![(1, xl(1)), (3, xl(2)), (1, xl(3))], 0).unwrap();
        let mut state = SlsState::new(&objective, SlsConfig::default());
        state.add_cores([ge(&[(1, xl(1))], 1)].iter());
        // x1 at 0 falsifies the unit core; with weight 2 the repair
        // outweighs its unit cost.
        state.weights[0] = 2;
        assert!(state.score(Var::new(1)) > 0);
        // x2 appears in no constraint; flipping it on just costs 3.
        assert_eq!(state.score(Var::new(2)), -3);
        // A variable outside the domain scores zero.
        assert_eq!(state.score(Var::new(9)), 0);
    }

    #[test]
    fn perturbation_flips_exactly_k_variables() {
        let mut state = SlsState::new(&unit_objective(10), SlsConfig::default());
        let original = vec![false; 10];
        for k in [1usize, 3, 10] {
            let mut values = original.clone();
            state.perturb(&mut values, k);
            let distance = values.iter().zip(&original).filter(|(a, b)| a != b).count();
            assert_eq!(distance, k);
        }
    }

    #[test]
    fn incremental_recall_is_deterministic() {
        let run = || {
            let objective = unit_objective(4);
            let mut state =
                SlsState::new(&objective, SlsConfig { seed: 7, ..Default::default() });
            state.add_cores([ge(&[(1, xl(1)), (1, xl(2))], 1)].iter());
            let first = state.search(10, None).map(|a| objective.cost(&a).unwrap());
            state.add_cores([ge(&[(1, xl(3)), (1, xl(4))], 1)].iter());
            let second = state.search(10, None).map(|a| objective.cost(&a).unwrap());
            (first, second, state.flips)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn solutions_always_satisfy_all_cores() {
        let objective =
            Objective::new(vec![(2, xl(1)), (1, xl(2)), (3, xl(3)), (1, xl(4))], 0).unwrap();
        let mut state = SlsState::new(&objective, SlsConfig { seed: 3, ..Default::default() });
        state.add_cores(
            [
                ge(&[(1, xl(1)), (1, xl(2))], 1),
                ge(&[(2, xl(2)), (1, xl(3)), (1, xl(4))], 2),
                ge(&[(1, xl(1)), (1, xl(4))], 1),
            ]
            .iter(),
        );
        if let Some(solution) = state.search(100, None) {
            for c in &state.constraints {
                assert!(c.evaluate(&solution).unwrap());
            }
        }
    }
}
