//! # Hitting Set Component
//!
//! All ways of computing (improving or optimal) solutions over the
//! accumulated core set: solution-improving search, its incremental reified
//! variant, core-guided reformulation, core-boosted search, stochastic
//! local search, and the hybrid schemes that decide when a certified
//! (proof-producing) optimizer must confirm a result produced by a cheaper
//! uncertified one.

mod cg;
mod sis;

pub use cg::ReformulationState;

use crate::certify::{ConstraintId, Logger};
use crate::oracle::Budget;
use crate::pb::{Assignment, Int, Objective, PbConstraint};
use crate::sls::{SlsConfig, SlsState};

use cg::{CgOutcome, CgState};
use sis::{sis_loop, ReifiedSisState};

/// Which optimizer instantiates the minimize step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackendKind {
    /// Solution-improving search with hard bounds and oracle rebuilds.
    Sis,
    /// Solution-improving search with reified bounds, fully incremental.
    SisReified,
    /// Core-guided objective reformulation.
    Cg,
    /// Core-boosted: budgeted core-guided phase, then solution-improving.
    Cb,
    /// Stochastic local search in the inexact slot of a hybrid. Invalid as
    /// a standalone backend: it can never prove optimality.
    SlsOnly,
}

/// When a certified optimizer must confirm uncertified results.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HybridMode {
    None,
    /// Certify only results that would close the gap (`lb = ub`).
    OptLb,
    /// Certify every lower-bound refinement.
    AllLb,
    /// Route calls that must produce an optimum to the certified backend a
    /// priori; uncertified calls never update the lower bound.
    ForceLb,
}

#[derive(Clone, Debug)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub hybrid: HybridMode,
    /// Reformulation steps of the core-guided phase per core-boosted call.
    pub cb_core_guided_iteration_budget: u64,
    pub stratification: bool,
    pub proof_logging: bool,
    /// Conflict budget per oracle call in the uncertified hybrid slot.
    pub inexact_conflict_budget: u64,
    /// Iterations without lower-bound movement before the optimal-solution
    /// heuristic demands an optimal call.
    pub opt_stagnation_limit: u64,
}

impl Default for BackendConfig {
    fn default() -> BackendConfig {
        BackendConfig {
            kind: BackendKind::Cb,
            hybrid: HybridMode::None,
            cb_core_guided_iteration_budget: 100,
            stratification: true,
            proof_logging: false,
            inexact_conflict_budget: 4_000,
            opt_stagnation_limit: 1_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HsStatus {
    /// Strictly cheaper than the upper bound, optimality unknown.
    Improved,
    /// Optimal for the current core set; the lower bound moves to its cost.
    Optimal,
}

/// Result of one hitting-set call.
#[derive(Clone, Debug)]
pub struct HsResult {
    /// Solution over the objective variables.
    pub solution: Assignment,
    pub status: HsStatus,
    /// New lower bound: the solution cost when optimal, the input bound
    /// otherwise (`None` encodes unbounded).
    pub lower_bound_out: Option<Int>,
    /// Proof id of the derived lower-bound constraint, when certified.
    pub lb_proof: Option<ConstraintId>,
}

/// Internal contract of the minimize implementations: either an improving
/// solution, or an optimality claim, or an admission that the effort budget
/// ran out without finding anything.
#[derive(Clone, Debug)]
pub(crate) struct MinimizeOutcome {
    pub solution: Assignment,
    pub cost: Int,
    pub proved_optimal: bool,
    pub exhausted: bool,
    pub lb_proof: Option<ConstraintId>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct HsStats {
    pub sls_calls: u64,
    pub sls_improvements: u64,
    pub certified_minimize_calls: u64,
    pub inexact_minimize_calls: u64,
    /// Uncertified optimality claims contradicted by the certified backend.
    pub discrepancies: u64,
    pub cg_reformulations: u64,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("an SLS-only backend cannot prove optimality; combine it with a hybrid mode")]
    SlsOnlyWithoutHybrid,
}

/// The hitting-set solver: owns the accumulated core set, the incremental
/// backend states, the SLS engine and the timing/work statistics feeding
/// the scheduling heuristics.
pub struct HsSolver {
    cfg: BackendConfig,
    interrupt: Option<std::sync::Arc<std::sync::atomic::AtomicBool>>,
    objective: Objective,
    kore: Vec<PbConstraint>,
    incumbent: Option<(Assignment, Int)>,
    sls: Option<SlsState>,
    sls_synced: usize,
    certified_sis_reified: Option<ReifiedSisState>,
    certified_cg: Option<CgState>,
    inexact_sis_reified: Option<ReifiedSisState>,
    inexact_cg: Option<CgState>,
    /// Fresh-variable registry for the uncertified side, separate from the
    /// proof registry (uncertified derivations never enter the proof).
    inexact_logger: Logger,
    num_vars: u32,
    zero_cores_last_extract: bool,
    iterations_since_lb_change: u64,
    deadline: Option<std::time::Instant>,
    pub stats: HsStats,
    /// When set, every core-guided reformulation appends a snapshot here.
    pub reformulation_trace: Option<Vec<ReformulationState>>,
}

impl HsSolver {
    pub fn new(
        objective: Objective,
        num_vars: u32,
        cfg: BackendConfig,
        sls: Option<SlsConfig>,
    ) -> Result<HsSolver, ConfigError> {
        if cfg.kind == BackendKind::SlsOnly && cfg.hybrid == HybridMode::None {
            return Err(ConfigError::SlsOnlyWithoutHybrid);
        }
        let sls_state = sls.map(|cfg| SlsState::new(&objective, cfg));
        Ok(HsSolver {
            cfg,
            interrupt: None,
            objective,
            kore: Vec::new(),
            incumbent: None,
            sls: sls_state,
            sls_synced: 0,
            certified_sis_reified: None,
            certified_cg: None,
            inexact_sis_reified: None,
            inexact_cg: None,
            inexact_logger: Logger::disabled(num_vars),
            num_vars,
            zero_cores_last_extract: false,
            iterations_since_lb_change: 0,
            deadline: None,
            stats: HsStats::default(),
            reformulation_trace: None,
        })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.cfg
    }

    pub fn kore(&self) -> &[PbConstraint] {
        &self.kore
    }

    pub fn set_deadline(&mut self, deadline: Option<std::time::Instant>) {
        self.deadline = deadline;
    }

    pub fn set_interrupt(&mut self, flag: Option<std::sync::Arc<std::sync::atomic::AtomicBool>>) {
        self.interrupt = flag;
    }

    /// Extends the core set. Constraints must range over objective
    /// variables only.
    pub fn add_cores(&mut self, cores: impl IntoIterator<Item = PbConstraint>) {
        for c in cores {
            debug_assert!(c.vars().all(|v| self.objective.contains_var(v)));
            self.kore.push(c);
        }
    }

    /// Records the incumbent (best known full-instance solution), projected
    /// onto the objective variables. Its cost is the current upper bound.
    pub fn set_incumbent(&mut self, projection: Assignment, cost: Int) {
        self.incumbent = Some((projection, cost));
    }

    /// Feedback from the last core extraction, driving the
    /// optimal-solution heuristic.
    pub fn note_extraction(&mut self, new_cores: usize, lb_changed: bool) {
        self.zero_cores_last_extract = new_cores == 0;
        if lb_changed {
            self.iterations_since_lb_change = 0;
        } else {
            self.iterations_since_lb_change += 1;
        }
    }

    /// Demand an optimal answer when the last extraction produced no new
    /// cores or the lower bound has stagnated for too long.
    pub fn optimal_sol_heuristic(&self) -> bool {
        self.zero_cores_last_extract
            || self.iterations_since_lb_change >= self.cfg.opt_stagnation_limit
    }

    fn unlimited_budget(&self) -> Budget {
        Budget { max_conflicts: None, deadline: self.deadline, interrupt: self.interrupt.clone() }
    }

    fn inexact_budget(&self) -> Budget {
        Budget {
            max_conflicts: Some(self.cfg.inexact_conflict_budget),
            deadline: self.deadline,
            interrupt: self.interrupt.clone(),
        }
    }

    /// The hitting-set step: optionally consult SLS, decide whether an
    /// optimal answer is required, run the configured minimize
    /// instantiation, and map its outcome onto the improving/optimal
    /// result contract.
    pub fn solve_hs(
        &mut self,
        lb: Option<Int>,
        ub: Int,
        force_opt: bool,
        logger: &mut Logger,
    ) -> HsResult {
        debug_assert!(lb.is_none_or(|lb| lb <= ub));
        // Stochastic local search first: a strictly improving feasible
        // solution short-circuits the optimizer entirely.
        if let Some(sls) = &mut self.sls {
            if sls.use_sls() {
                for c in &self.kore[self.sls_synced..] {
                    sls.add_cores(std::iter::once(c));
                }
                self.sls_synced = self.kore.len();
                let flips_before = sls.flips;
                let found = sls.search(ub, None);
                let work = sls.flips - flips_before;
                sls.record_sls_work(work.max(1));
                self.stats.sls_calls += 1;
                if let Some(solution) = found {
                    debug_assert!(
                        self.kore.iter().all(|c| c.evaluate(&solution).unwrap_or(false)),
                        "local search returned an infeasible assignment"
                    );
                    let cost = self
                        .objective
                        .cost(&solution)
                        .expect("SLS covers all objective variables");
                    if cost < ub {
                        self.stats.sls_improvements += 1;
                        return HsResult {
                            solution,
                            status: HsStatus::Improved,
                            lower_bound_out: lb,
                            lb_proof: None,
                        };
                    }
                }
            }
        }

        let require_opt = force_opt || self.optimal_sol_heuristic();
        let out = self.dispatch(require_opt, lb, ub, logger);
        if out.exhausted {
            // Only a deadline or interrupt cuts a top-level minimize short;
            // the caller is about to stop as well.
            return HsResult {
                solution: out.solution,
                status: HsStatus::Improved,
                lower_bound_out: lb,
                lb_proof: None,
            };
        }

        // The general contract: the lower bound moves to the solution cost
        // exactly when the cost reached the upper bound or an optimal
        // answer was demanded.
        if out.cost == ub || require_opt {
            debug_assert!(out.proved_optimal);
            HsResult {
                solution: out.solution,
                status: HsStatus::Optimal,
                lower_bound_out: Some(out.cost),
                lb_proof: out.lb_proof,
            }
        } else {
            debug_assert!(out.cost < ub);
            HsResult {
                solution: out.solution,
                status: HsStatus::Improved,
                lower_bound_out: lb,
                lb_proof: None,
            }
        }
    }

    /// Routes a minimize request through the hybrid policy.
    fn dispatch(
        &mut self,
        require_opt: bool,
        lb: Option<Int>,
        ub: Int,
        logger: &mut Logger,
    ) -> MinimizeOutcome {
        match self.cfg.hybrid {
            HybridMode::None => self.run_certified(self.cfg.kind, require_opt, lb, ub, logger),
            HybridMode::OptLb | HybridMode::AllLb => {
                let inexact = self.run_inexact(require_opt, lb, ub);
                if inexact.exhausted {
                    // No usable claim; fall through to the certified side
                    // under the original requirement.
                    return self.run_certified(
                        self.certified_kind(),
                        require_opt,
                        lb,
                        ub,
                        logger,
                    );
                }
                if !inexact.proved_optimal {
                    debug_assert!(inexact.cost < ub);
                    return inexact;
                }
                // An optimality claim. Closing the gap always needs the
                // certified backend; in the all-bounds mode every claim
                // does.
                let must_certify =
                    self.cfg.hybrid == HybridMode::AllLb || inexact.cost == ub;
                if !must_certify {
                    return inexact;
                }
                let certified =
                    self.run_certified(self.certified_kind(), true, lb, ub, logger);
                if certified.cost != inexact.cost {
                    self.stats.discrepancies += 1;
                    log::warn!(
                        "uncertified backend claimed optimum {} but certified search found {}",
                        inexact.cost,
                        certified.cost
                    );
                }
                certified
            }
            HybridMode::ForceLb => {
                if require_opt {
                    return self.run_certified(self.certified_kind(), true, lb, ub, logger);
                }
                let inexact = self.run_inexact(false, lb, ub);
                if !inexact.exhausted && inexact.cost < ub {
                    // Optimality claims without a proof are discarded here;
                    // only the improving solution is kept.
                    return MinimizeOutcome { proved_optimal: false, lb_proof: None, ..inexact };
                }
                // The gap-closing branch is disabled for uncertified calls:
                // a result at the upper bound is re-derived by the
                // certified backend instead.
                let certified = self.run_certified(self.certified_kind(), true, lb, ub, logger);
                if inexact.proved_optimal && certified.cost != inexact.cost {
                    self.stats.discrepancies += 1;
                    log::warn!(
                        "uncertified backend claimed optimum {} but certified search found {}",
                        inexact.cost,
                        certified.cost
                    );
                }
                certified
            }
        }
    }

    /// The certified slot of a hybrid. SLS cannot fill it; core-boosted
    /// search stands in when SLS occupies the config.
    fn certified_kind(&self) -> BackendKind {
        match self.cfg.kind {
            BackendKind::SlsOnly => BackendKind::Cb,
            kind => kind,
        }
    }

    fn incumbent_pair(&self) -> (&Assignment, Int) {
        let (a, c) = self.incumbent.as_ref().expect("incumbent set before minimize");
        (a, *c)
    }

    fn run_certified(
        &mut self,
        kind: BackendKind,
        require_opt: bool,
        lb: Option<Int>,
        ub: Int,
        logger: &mut Logger,
    ) -> MinimizeOutcome {
        self.stats.certified_minimize_calls += 1;
        let budget = self.unlimited_budget();
        let out = self.run_backend(kind, require_opt, lb, ub, &budget, true, logger);
        if let Some(sls) = &mut self.sls {
            sls.record_optimizer_work(1);
        }
        out
    }

    fn run_inexact(&mut self, require_opt: bool, lb: Option<Int>, ub: Int) -> MinimizeOutcome {
        self.stats.inexact_minimize_calls += 1;
        if self.cfg.kind == BackendKind::SlsOnly {
            return self.run_sls_minimize(ub);
        }
        let kind = self.cfg.kind;
        let budget = self.inexact_budget();
        let mut scratch_logger = std::mem::replace(&mut self.inexact_logger, Logger::disabled(0));
        let out = self.run_backend(kind, require_opt, lb, ub, &budget, false, &mut scratch_logger);
        self.inexact_logger = scratch_logger;
        out
    }

    /// SLS as the whole inexact optimizer: a feasible improving solution
    /// counts, anything else is an exhausted call.
    fn run_sls_minimize(&mut self, ub: Int) -> MinimizeOutcome {
        let (incumbent, inc_cost) = {
            let (a, c) = self.incumbent_pair();
            (a.clone(), c)
        };
        let Some(sls) = &mut self.sls else {
            return MinimizeOutcome {
                solution: incumbent,
                cost: inc_cost,
                proved_optimal: false,
                exhausted: true,
                lb_proof: None,
            };
        };
        for c in &self.kore[self.sls_synced..] {
            sls.add_cores(std::iter::once(c));
        }
        self.sls_synced = self.kore.len();
        let found = sls.search(ub, None);
        if let Some(solution) = found {
            let cost = self.objective.cost(&solution).expect("complete over objective");
            if cost < ub {
                return MinimizeOutcome {
                    solution,
                    cost,
                    proved_optimal: false,
                    exhausted: false,
                    lb_proof: None,
                };
            }
        }
        MinimizeOutcome {
            solution: incumbent,
            cost: inc_cost,
            proved_optimal: false,
            exhausted: true,
            lb_proof: None,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn run_backend(
        &mut self,
        kind: BackendKind,
        require_opt: bool,
        lb: Option<Int>,
        ub: Int,
        budget: &Budget,
        certified: bool,
        logger: &mut Logger,
    ) -> MinimizeOutcome {
        let (incumbent, inc_cost) = {
            let (a, c) = self.incumbent_pair();
            (a.clone(), c)
        };
        match kind {
            BackendKind::Sis => sis_loop(
                &self.kore,
                &self.objective,
                &self.objective,
                (&incumbent, inc_cost),
                ub,
                0,
                None,
                require_opt,
                budget,
                logger,
            ),
            BackendKind::SisReified => {
                let state = if certified {
                    self.certified_sis_reified
                        .get_or_insert_with(|| ReifiedSisState::new(self.num_vars))
                } else {
                    self.inexact_sis_reified
                        .get_or_insert_with(|| ReifiedSisState::new(self.num_vars))
                };
                state.minimize(
                    &self.kore,
                    &self.objective,
                    (&incumbent, inc_cost),
                    ub,
                    require_opt,
                    budget,
                    logger,
                )
            }
            BackendKind::Cg | BackendKind::Cb => {
                let cb_budget = self.cfg.cb_core_guided_iteration_budget;
                let stratification = self.cfg.stratification;
                let objective = self.objective.clone();
                let kore = std::mem::take(&mut self.kore);
                let state = if certified {
                    self.certified_cg.get_or_insert_with(|| CgState::new(&objective, self.num_vars))
                } else {
                    self.inexact_cg.get_or_insert_with(|| CgState::new(&objective, self.num_vars))
                };
                let reforms_before = state.reformulations;
                let trace = if certified { self.reformulation_trace.as_mut() } else { None };
                let outcome = if kind == BackendKind::Cg {
                    state.minimize(
                        &kore,
                        &objective,
                        (&incumbent, inc_cost),
                        lb,
                        ub,
                        require_opt,
                        stratification,
                        None,
                        budget,
                        logger,
                        trace,
                    )
                } else {
                    state.minimize_core_boosted(
                        &kore,
                        &objective,
                        (&incumbent, inc_cost),
                        lb,
                        ub,
                        require_opt,
                        stratification,
                        cb_budget,
                        budget,
                        logger,
                        trace,
                    )
                };
                let reforms = state.reformulations - reforms_before;
                self.kore = kore;
                if certified {
                    self.stats.cg_reformulations += reforms;
                }
                match outcome {
                    CgOutcome::Done(out) => out,
                    CgOutcome::OracleExhausted => MinimizeOutcome {
                        solution: incumbent,
                        cost: inc_cost,
                        proved_optimal: false,
                        exhausted: true,
                        lb_proof: None,
                    },
                    CgOutcome::BudgetExhausted => {
                        unreachable!("pure core-guided search has no reformulation budget")
                    }
                }
            }
            BackendKind::SlsOnly => unreachable!("SLS never fills the certified slot"),
        }
    }

    /// Current reformulation snapshot of the certified core-guided state.
    pub fn reformulation_state(&self) -> Option<ReformulationState> {
        self.certified_cg.as_ref().map(|s| s.snapshot(&self.objective))
    }
}
