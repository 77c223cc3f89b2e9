//! Core-guided optimization over the accumulated core set, in the OLL
//! style: assume every literal of the reformulated objective false, and on
//! each core subtract its minimum weight from the core literals, introduce
//! counting variables for the overflow and push the lower bound up by that
//! weight. A satisfying answer under all assumptions is optimal.
//!
//! The state is incremental across calls: the reformulated objective, the
//! counting constraints and the oracle with everything it learned are kept,
//! and new cores simply join the constraint database.
//!
//! When logging, every reformulation extends a running proof constraint
//! relating the original and reformulated objectives, so the final lower
//! bound comes out of the proof as an explicit constraint.

use crate::certify::{ConstraintId, CpOp, Logger, ReifyDir};
use crate::oracle::{Budget, OracleResult, PbOracle};
use crate::pb::{Assignment, Int, Lit, Objective, PbConstraint};

use super::sis::{derive_bound_from_refuted_sic, project_objective, sis_loop};
use super::MinimizeOutcome;

/// Snapshot of the objective reformulation: the optimal cost of the core
/// set under `reformulated_objective` plus `lb_increment` equals the
/// optimal cost under the original objective.
#[derive(Clone, Debug)]
pub struct ReformulationState {
    pub reformulated_objective: Objective,
    pub auxiliary_constraints: Vec<PbConstraint>,
    pub lb_increment: Int,
    /// How many cores of the run's core set were present when the snapshot
    /// was taken (cores only ever grow).
    pub kore_len: usize,
}

pub(super) struct CgState {
    oracle: PbOracle,
    synced_cores: usize,
    /// The reformulated objective; its constant mirrors the original.
    oref: Vec<(Int, Lit)>,
    aux: Vec<PbConstraint>,
    lb_increment: Int,
    /// Proof id of the running constraint `original - reformulated >=
    /// lb_increment`.
    invariant_proof: Option<ConstraintId>,
    /// Global solution-improving constraint, reified on a fresh guard.
    /// Disabled for the rest of the run once a core mixes it with
    /// reformulation assumptions.
    use_global_sic: bool,
    active_sic: Option<(Lit, Int, Option<ConstraintId>, PbConstraint)>,
    pub(super) reformulations: u64,
}

impl CgState {
    pub(super) fn new(objective: &Objective, num_vars: u32) -> CgState {
        CgState {
            oracle: PbOracle::new(num_vars),
            synced_cores: 0,
            oref: objective.terms().to_vec(),
            aux: Vec::new(),
            lb_increment: 0,
            invariant_proof: None,
            use_global_sic: true,
            active_sic: None,
            reformulations: 0,
        }
    }

    pub(super) fn snapshot(&self, objective: &Objective) -> ReformulationState {
        ReformulationState {
            reformulated_objective: Objective::new(self.oref.clone(), objective.constant())
                .expect("reformulated weights stay in range"),
            auxiliary_constraints: self.aux.clone(),
            lb_increment: self.lb_increment,
            kore_len: self.synced_cores,
        }
    }

    fn sync(&mut self, kore: &[PbConstraint]) {
        for c in &kore[self.synced_cores..] {
            self.oracle.add_constraint(c, Vec::new());
        }
        self.synced_cores = kore.len();
    }

    fn reformulated_objective(&self, objective: &Objective) -> Objective {
        Objective::new(self.oref.clone(), objective.constant())
            .expect("reformulated weights stay in range")
    }

    /// Distinct weights of the reformulated objective, decreasing.
    fn strata(&self) -> Vec<Int> {
        let mut weights: Vec<Int> = self.oref.iter().map(|&(w, _)| w).collect();
        weights.sort_unstable_by(|a, b| b.cmp(a));
        weights.dedup();
        weights
    }

    /// Assumptions for the active strata plus hardening plus the global
    /// improving constraint guard. Deterministic order: variables
    /// ascending, guard last.
    fn assumptions(
        &self,
        threshold: Option<Int>,
        gap: Option<Int>,
        stratification: bool,
    ) -> Vec<Lit> {
        let mut lits: Vec<Lit> = self
            .oref
            .iter()
            .filter(|&&(w, _)| {
                let in_stratum = !stratification || threshold.is_none_or(|t| w >= t);
                let hardened = gap.is_some_and(|g| w > g);
                in_stratum || hardened
            })
            .map(|&(_, l)| !l)
            .collect();
        lits.sort_unstable_by_key(|l| l.var());
        lits.dedup();
        if let Some((guard, _, _, _)) = &self.active_sic {
            if self.use_global_sic {
                lits.push(*guard);
            }
        }
        lits
    }

    fn ensure_global_sic(&mut self, objective: &Objective, ub: Int, logger: &mut Logger) {
        if !self.use_global_sic {
            return;
        }
        let stale = match &self.active_sic {
            Some((_, bound, _, _)) => *bound != ub,
            None => true,
        };
        if !stale {
            return;
        }
        let (guard, sic, fwd, bwd) = logger.log_reified_sic(objective, ub);
        let mut reified = crate::certify::reification_constraint(guard, ReifyDir::Forward, &sic);
        if let Some(id) = fwd {
            reified.set_id(id);
        }
        self.oracle.add_constraint(&reified, Vec::new());
        self.active_sic = Some((guard.positive(), ub, bwd, sic));
    }

    /// One OLL reformulation step for `core` with minimum weight `w_min`:
    /// subtract the weight from every core literal, add counting variables
    /// `o_j` reified as `o_j <= (sum core >= j)` for j = 2..=|core|, extend
    /// the objective with them and raise the increment.
    fn reformulate(&mut self, core: &PbConstraint, logger: &mut Logger) {
        self.reformulations += 1;
        let core_lits: Vec<Lit> = core.terms().iter().map(|&(_, l)| l).collect();
        let w_min = core_lits
            .iter()
            .map(|l| {
                self.oref
                    .iter()
                    .find(|&&(_, ol)| ol == *l)
                    .map(|&(w, _)| w)
                    .expect("core literals carry reformulated weight")
            })
            .min()
            .expect("cores are non-empty");
        debug_assert!(w_min > 0);
        for (w, l) in self.oref.iter_mut() {
            if core_lits.contains(l) {
                *w -= w_min;
            }
        }
        self.oref.retain(|&(w, _)| w > 0);

        let n = core_lits.len();
        let mut forward_ids: Vec<Option<ConstraintId>> = Vec::new();
        for j in 2..=n {
            let counter = logger.register_fresh_var("count");
            let at_least_j = PbConstraint::from_normalized(
                core_lits.iter().map(|&l| (1, l)).collect(),
                j as Int,
            );
            let (fwd, bwd) = logger.log_reify(counter, ReifyDir::Both, &at_least_j);
            forward_ids.push(fwd);
            let mut backward =
                crate::certify::reification_constraint(counter, ReifyDir::Backward, &at_least_j);
            if let Some(id) = bwd {
                backward.set_id(id);
            }
            self.oracle.add_constraint(&backward, Vec::new());
            self.aux.push(backward);
            self.oref.push((w_min, counter.positive()));
        }
        self.oref.sort_unstable_by_key(|&(_, l)| l.var());
        self.lb_increment += w_min;

        // Proof side: chain the core with the forward reifications into the
        // counting constraint `sum core + sum ~o_j >= |core|`, then fold it
        // into the running objective-relation constraint.
        if logger.enabled() {
            let mut g = core.id();
            for (j, fwd) in (2..=n).zip(forward_ids) {
                g = match (g, fwd) {
                    (Some(prev), Some(fwd)) => logger.log_cutting_planes(&[
                        CpOp::Push(prev),
                        CpOp::Multiply(j as Int - 1),
                        CpOp::Push(fwd),
                        CpOp::Add,
                        CpOp::Divide(j as Int),
                    ]),
                    _ => None,
                };
            }
            self.invariant_proof = match (self.invariant_proof, g) {
                (None, Some(g)) => {
                    logger.log_cutting_planes(&[CpOp::Push(g), CpOp::Multiply(w_min)])
                }
                (Some(d), Some(g)) => logger.log_cutting_planes(&[
                    CpOp::Push(d),
                    CpOp::Push(g),
                    CpOp::Multiply(w_min),
                    CpOp::Add,
                ]),
                _ => None,
            };
        }
    }

    /// Lower-bound constraint for the fully processed reformulation:
    /// the invariant constraint plus weighted literal axioms eliminates the
    /// reformulated terms, leaving `sum w_i l_i >= lb_increment`.
    fn derive_final_bound(&mut self, logger: &mut Logger) -> Option<ConstraintId> {
        let d = self.invariant_proof?;
        let mut ops = vec![CpOp::Push(d)];
        for &(w, l) in &self.oref {
            ops.push(CpOp::PushLiteralAxiom(l));
            ops.push(CpOp::Multiply(w));
            ops.push(CpOp::Add);
        }
        logger.log_cutting_planes(&ops)
    }

    /// The OLL loop, optionally budgeted in reformulation steps (the
    /// core-boosted front phase). Exhausting `reformulation_budget` returns
    /// control to the caller, which switches strategy.
    #[allow(clippy::too_many_arguments)]
    pub(super) fn minimize(
        &mut self,
        kore: &[PbConstraint],
        objective: &Objective,
        incumbent: (&Assignment, Int),
        lb_global: Option<Int>,
        ub: Int,
        require_opt: bool,
        stratification: bool,
        reformulation_budget: Option<u64>,
        oracle_budget: &Budget,
        logger: &mut Logger,
        mut trace: Option<&mut Vec<ReformulationState>>,
    ) -> CgOutcome {
        self.sync(kore);
        self.ensure_global_sic(objective, ub, logger);
        let gap = lb_global.map(|lb| ub - lb);
        let mut threshold: Option<Int> = if stratification {
            self.strata().first().copied()
        } else {
            None
        };
        let mut reformulations_this_call: u64 = 0;

        loop {
            if reformulation_budget.is_some_and(|b| reformulations_this_call >= b) {
                return CgOutcome::BudgetExhausted;
            }
            let assumptions = self.assumptions(threshold, gap, stratification);
            match self.oracle.solve_bounded(&assumptions, oracle_budget, logger) {
                None => return CgOutcome::OracleExhausted,
                Some(OracleResult::Sat(model)) => {
                    let solution = project_objective(&model, objective);
                    let cost = objective.cost(&solution).expect("projection is complete");
                    let next = threshold.and_then(|t| {
                        self.strata().into_iter().find(|&w| w < t)
                    });
                    match next {
                        Some(t) if stratification => {
                            // Stratum closed; an improving intermediate
                            // model can end the call early.
                            if cost < ub && !require_opt {
                                return CgOutcome::Done(MinimizeOutcome {
                                    solution,
                                    cost,
                                    proved_optimal: false,
                                    exhausted: false,
                                    lb_proof: None,
                                });
                            }
                            threshold = Some(t);
                        }
                        _ => {
                            // Every reformulated literal was assumed false:
                            // the model is optimal for the core set.
                            debug_assert_eq!(
                                cost,
                                self.lb_increment + objective.constant(),
                                "zero-valued reformulated objective pins the cost"
                            );
                            let lb_proof = self.derive_final_bound(logger);
                            return CgOutcome::Done(MinimizeOutcome {
                                solution,
                                cost,
                                proved_optimal: true,
                                exhausted: false,
                                lb_proof,
                            });
                        }
                    }
                }
                Some(OracleResult::Unsat(core)) => {
                    let lits: Vec<Lit> =
                        core.constraint().terms().iter().map(|&(_, l)| l).collect();
                    let sic_guard = self.active_sic.as_ref().map(|(g, _, _, _)| *g);
                    if let Some(guard) = sic_guard {
                        if lits.contains(&!guard) {
                            if lits.len() == 1 {
                                // The improving constraint alone is refuted:
                                // nothing beats the incumbent, which is
                                // therefore optimal for the core set.
                                let (_, _, bwd, sic) =
                                    self.active_sic.as_ref().expect("guard came from here");
                                let lb_proof = derive_bound_from_refuted_sic(
                                    logger,
                                    &sic.clone(),
                                    *bwd,
                                    core.constraint().id(),
                                );
                                return CgOutcome::Done(MinimizeOutcome {
                                    solution: incumbent.0.clone(),
                                    cost: incumbent.1,
                                    proved_optimal: true,
                                    exhausted: false,
                                    lb_proof,
                                });
                            }
                            // Mixed core: retry without the global bound so
                            // reformulation sees pure cores.
                            self.use_global_sic = false;
                            continue;
                        }
                    }
                    if lits.is_empty() {
                        // The core set itself became infeasible, which the
                        // incumbent's existence rules out.
                        unreachable!("core set is satisfied by the incumbent");
                    }
                    self.reformulate(core.constraint(), logger);
                    reformulations_this_call += 1;
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(self.snapshot(objective));
                    }
                    // The threshold keeps its value across reformulations;
                    // active literals are those with weight at or above it,
                    // whether or not the weight value still occurs.
                }
            }
        }
    }

    /// Core-boosted search: a budgeted OLL front phase, then
    /// solution-improving search on the reformulated problem.
    #[allow(clippy::too_many_arguments)]
    pub(super) fn minimize_core_boosted(
        &mut self,
        kore: &[PbConstraint],
        objective: &Objective,
        incumbent: (&Assignment, Int),
        lb_global: Option<Int>,
        ub: Int,
        require_opt: bool,
        stratification: bool,
        cb_budget: u64,
        oracle_budget: &Budget,
        logger: &mut Logger,
        trace: Option<&mut Vec<ReformulationState>>,
    ) -> CgOutcome {
        match self.minimize(
            kore,
            objective,
            incumbent,
            lb_global,
            ub,
            require_opt,
            stratification,
            Some(cb_budget),
            oracle_budget,
            logger,
            trace,
        ) {
            CgOutcome::BudgetExhausted => {}
            done => return done,
        }
        // Switch phase: solution-improving search over the reformulated
        // instance. The running invariant constraint carries the proof of
        // the increment between the two objectives.
        let mut constraints: Vec<PbConstraint> =
            Vec::with_capacity(self.synced_cores + self.aux.len());
        constraints.extend_from_slice(&kore[..self.synced_cores]);
        constraints.extend_from_slice(&self.aux);
        let local = self.reformulated_objective(objective);
        let out = sis_loop(
            &constraints,
            &local,
            objective,
            incumbent,
            ub,
            self.lb_increment,
            self.invariant_proof,
            require_opt,
            oracle_budget,
            logger,
        );
        if out.exhausted {
            CgOutcome::OracleExhausted
        } else {
            CgOutcome::Done(out)
        }
    }
}

pub(super) enum CgOutcome {
    Done(MinimizeOutcome),
    /// The reformulation budget of the core-boosted front phase ran out.
    BudgetExhausted,
    /// The oracle effort budget ran out.
    OracleExhausted,
}
