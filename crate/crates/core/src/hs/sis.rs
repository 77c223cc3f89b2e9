//! Solution-improving search over a core set: repeated decision queries
//! under a strict cost-improvement constraint until unsatisfiability proves
//! the last solution optimal.
//!
//! Two flavors. The plain one adds the improvement constraint as a hard
//! constraint and rebuilds the oracle on every bound tightening; the proof
//! still sees the constraint in reified form, so everything learned from it
//! is logged under the guard variable. The reified flavor adds the guarded
//! constraint itself and assumes the guard, which lets one oracle instance
//! survive across calls with all learned clauses intact.

use crate::certify::{ConstraintId, CpOp, Logger, ReifyDir};
use crate::oracle::{Budget, OracleResult, PbOracle};
use crate::pb::{Assignment, Int, Objective, PbConstraint, Var};

use super::MinimizeOutcome;

/// Projection of a full model onto the objective variables.
pub(super) fn project_objective(model: &Assignment, objective: &Objective) -> Assignment {
    model.project(objective.vars())
}

/// Turns the refutation of a solution-improving constraint into an explicit
/// lower-bound constraint: from the clause `~r` (id `not_r`) and the
/// backward reification `r <= (objective < bound)` (id `bwd`), addition
/// yields `sum w_i l_i >= bound - constant`.
pub(super) fn derive_bound_from_refuted_sic(
    logger: &mut Logger,
    sic: &PbConstraint,
    bwd: Option<ConstraintId>,
    not_r: Option<ConstraintId>,
) -> Option<ConstraintId> {
    let bwd = bwd?;
    let not_r = not_r?;
    let k = sic.coeff_sum() - sic.degree() + 1;
    if k <= 0 {
        // The improvement constraint was contradictory outright; the
        // backward reification is already the trivial bound.
        return logger.log_cutting_planes(&[CpOp::Push(bwd)]);
    }
    logger.log_cutting_planes(&[
        CpOp::Push(not_r),
        CpOp::Multiply(k),
        CpOp::Push(bwd),
        CpOp::Add,
    ])
}

/// The solution-improving loop. `constraints` is the core set (possibly
/// with reformulation constraints appended), `local_objective` the
/// objective the improvement constraint ranges over, and `true_objective`
/// the one costs are reported in. `offset` is the proven gap between the
/// two (`true >= local + offset` pointwise, with equality reachable), and
/// `base_lb_proof` the proof id of that gap constraint when logging.
///
/// With `require_opt` false the first improving solution is returned as
/// soon as it is found.
#[allow(clippy::too_many_arguments)]
pub(super) fn sis_loop(
    constraints: &[PbConstraint],
    local_objective: &Objective,
    true_objective: &Objective,
    incumbent: (&Assignment, Int),
    ub: Int,
    offset: Int,
    base_lb_proof: Option<ConstraintId>,
    require_opt: bool,
    budget: &Budget,
    logger: &mut Logger,
) -> MinimizeOutcome {
    let mut ub_c = ub;
    let mut best: Option<(Assignment, Int)> = None;

    loop {
        // Rebuild with the tightened hard bound. The proof keeps the bound
        // reified, so solver and proof deliberately disagree here.
        let (guard, sic, _fwd, bwd) = logger.log_reified_sic(local_objective, ub_c - offset);
        let mut oracle = PbOracle::new(local_objective.max_var().max(true_objective.max_var()));
        for c in constraints {
            oracle.add_constraint(c, Vec::new());
        }
        oracle.add_constraint(&sic, vec![guard.positive()]);

        match oracle.solve_bounded(&[], budget, logger) {
            None => {
                // Budget exhausted. An improving solution found earlier is
                // still a valid non-optimal answer.
                return match best {
                    Some((solution, cost)) => MinimizeOutcome {
                        solution,
                        cost,
                        proved_optimal: false,
                        exhausted: false,
                        lb_proof: None,
                    },
                    None => MinimizeOutcome {
                        solution: incumbent.0.clone(),
                        cost: incumbent.1,
                        proved_optimal: false,
                        exhausted: true,
                        lb_proof: None,
                    },
                };
            }
            Some(OracleResult::Sat(model)) => {
                let solution = project_objective(&model, true_objective);
                let cost = true_objective.cost(&solution).expect("projection is complete");
                debug_assert!(cost < ub_c);
                best = Some((solution.clone(), cost));
                ub_c = cost;
                if !require_opt {
                    return MinimizeOutcome {
                        solution,
                        cost,
                        proved_optimal: false,
                        exhausted: false,
                        lb_proof: None,
                    };
                }
            }
            Some(OracleResult::Unsat(_)) => {
                // No solution beats ub_c, so the last one found (or the
                // incumbent) is optimal at exactly ub_c.
                let local_bound =
                    derive_bound_from_refuted_sic(logger, &sic, bwd, oracle.root_conflict_proof_id());
                let lb_proof = match (base_lb_proof, local_bound) {
                    (Some(base), Some(local)) => logger.log_cutting_planes(&[
                        CpOp::Push(base),
                        CpOp::Push(local),
                        CpOp::Add,
                    ]),
                    (None, local) => local,
                    _ => None,
                };
                let (solution, cost) = best.unwrap_or_else(|| (incumbent.0.clone(), incumbent.1));
                debug_assert_eq!(cost, ub_c);
                return MinimizeOutcome {
                    solution,
                    cost,
                    proved_optimal: true,
                    exhausted: false,
                    lb_proof,
                };
            }
        }
    }
}

/// Incremental solution-improving search: the oracle survives across calls
/// and every bound lives behind a fresh assumed guard variable.
pub(super) struct ReifiedSisState {
    oracle: PbOracle,
    synced_cores: usize,
    /// Guard, bound and backward-reification id of the active constraint.
    active: Option<(Var, Int, Option<ConstraintId>, PbConstraint)>,
}

impl ReifiedSisState {
    pub(super) fn new(num_vars: u32) -> ReifiedSisState {
        ReifiedSisState {
            oracle: PbOracle::new(num_vars),
            synced_cores: 0,
            active: None,
        }
    }

    fn sync(&mut self, kore: &[PbConstraint]) {
        for c in &kore[self.synced_cores..] {
            self.oracle.add_constraint(c, Vec::new());
        }
        self.synced_cores = kore.len();
    }

    #[allow(clippy::too_many_arguments)]
    pub(super) fn minimize(
        &mut self,
        kore: &[PbConstraint],
        objective: &Objective,
        incumbent: (&Assignment, Int),
        ub: Int,
        require_opt: bool,
        budget: &Budget,
        logger: &mut Logger,
    ) -> MinimizeOutcome {
        self.sync(kore);
        let mut ub_c = ub;
        let mut best: Option<(Assignment, Int)> = None;

        loop {
            let needs_new = match &self.active {
                Some((_, bound, _, _)) => *bound != ub_c,
                None => true,
            };
            if needs_new {
                let (guard, sic, fwd, bwd) = logger.log_reified_sic(objective, ub_c);
                let mut reified =
                    crate::certify::reification_constraint(guard, ReifyDir::Forward, &sic);
                if let Some(id) = fwd {
                    reified.set_id(id);
                }
                self.oracle.add_constraint(&reified, Vec::new());
                self.active = Some((guard, ub_c, bwd, sic));
            }
            let (guard, _, bwd, sic) = self.active.as_ref().expect("just ensured").clone();

            match self.oracle.solve_bounded(&[guard.positive()], budget, logger) {
                None => {
                    return match best {
                        Some((solution, cost)) => MinimizeOutcome {
                            solution,
                            cost,
                            proved_optimal: false,
                            exhausted: false,
                            lb_proof: None,
                        },
                        None => MinimizeOutcome {
                            solution: incumbent.0.clone(),
                            cost: incumbent.1,
                            proved_optimal: false,
                            exhausted: true,
                            lb_proof: None,
                        },
                    };
                }
                Some(OracleResult::Sat(model)) => {
                    let solution = project_objective(&model, objective);
                    let cost = objective.cost(&solution).expect("projection is complete");
                    debug_assert!(cost < ub_c);
                    best = Some((solution.clone(), cost));
                    ub_c = cost;
                    if !require_opt {
                        return MinimizeOutcome {
                            solution,
                            cost,
                            proved_optimal: false,
                            exhausted: false,
                            lb_proof: None,
                        };
                    }
                }
                Some(OracleResult::Unsat(core)) => {
                    debug_assert!(
                        core.constraint().terms().len() <= 1,
                        "core under a single assumption mentions at most the guard"
                    );
                    let lb_proof = derive_bound_from_refuted_sic(
                        logger,
                        &sic,
                        bwd,
                        core.constraint().id().or(self.oracle.root_conflict_proof_id()),
                    );
                    let (solution, cost) =
                        best.unwrap_or_else(|| (incumbent.0.clone(), incumbent.1));
                    debug_assert_eq!(cost, ub_c);
                    return MinimizeOutcome {
                        solution,
                        cost,
                        proved_optimal: true,
                        exhausted: false,
                        lb_proof,
                    };
                }
            }
        }
    }
}
