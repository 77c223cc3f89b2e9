//! # PB Decision Oracle
//!
//! An assumption-based conflict-driven decision procedure for normalized
//! pseudo-Boolean constraints. Propagation is counter-based: every
//! constraint tracks the coefficient sum of its non-falsified literals and
//! forces a literal as soon as its coefficient exceeds the remaining slack.
//! Conflict analysis resolves to the first unique implication point and
//! learns clauses; under assumptions, a failed assumption is explained as a
//! clausal core (an at-least-one constraint over negations of the
//! responsible assumptions).
//!
//! Branching is deterministic: pending assumptions first in their given
//! order, then the unassigned variable of lowest index with phase false.
//! Restarts follow a Luby sequence with unit 64 conflicts. Learned clauses
//! and the trail persist across calls, so one oracle instance serves a
//! whole run incrementally.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use crate::certify::{ConstraintId, Logger};
use crate::pb::{Assignment, Core, Int, Lit, Objective, PbConstraint, Var};

/// Outcome of a decision query.
#[derive(Clone, Debug)]
pub enum OracleResult {
    /// A complete assignment satisfying all constraints and all remaining
    /// assumptions.
    Sat(Assignment),
    /// A core violated by the assumption set it was extracted under. An
    /// empty core means the constraint database itself is infeasible.
    Unsat(Core),
}

/// Result of one weight-aware core extraction phase: the cores found plus
/// the satisfying assignment that ended the phase.
#[derive(Clone, Debug)]
pub struct ExtractCoresResult {
    pub new_cores: Vec<Core>,
    pub witness: Assignment,
}

/// Outcome of a budget-limited core extraction.
pub enum ExtractOutcome {
    Done(ExtractCoresResult),
    /// Budget ran out; the cores found so far are still valid.
    OutOfBudget(Vec<Core>),
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum OracleError {
    /// The formula itself is infeasible, independent of assumptions.
    #[error("constraint database is infeasible")]
    Infeasible,
}

/// Effort limits for a single call. An empty budget never exhausts.
#[derive(Clone, Default)]
pub struct Budget {
    pub max_conflicts: Option<u64>,
    pub deadline: Option<Instant>,
    /// External stop request (signal handlers and the like).
    pub interrupt: Option<Arc<AtomicBool>>,
}

impl Budget {
    pub fn unlimited() -> Budget {
        Budget::default()
    }

    pub fn with_conflicts(max: u64) -> Budget {
        Budget { max_conflicts: Some(max), ..Budget::default() }
    }

    fn conflicts_exhausted(&self, used: u64) -> bool {
        self.max_conflicts.is_some_and(|m| used >= m)
    }

    fn deadline_passed(&self) -> bool {
        self.interrupt.as_ref().is_some_and(|f| f.load(Ordering::Relaxed))
            || self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

/// Monotonically shrinking assumption set used during core extraction.
/// Kept sorted by variable index; one literal per variable.
#[derive(Clone, Debug, Default)]
pub struct AssumptionSet {
    lits: Vec<Lit>,
}

impl AssumptionSet {
    pub fn from_sorted(lits: Vec<Lit>) -> AssumptionSet {
        debug_assert!(lits.windows(2).all(|w| w[0].var() < w[1].var()));
        AssumptionSet { lits }
    }

    pub fn literals(&self) -> &[Lit] {
        &self.lits
    }

    pub fn len(&self) -> usize {
        self.lits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lits.is_empty()
    }

    /// Removes every assumption whose negation appears in `lits`.
    fn relax(&mut self, lits: &[Lit]) {
        self.lits.retain(|a| !lits.contains(&!*a));
    }
}

#[derive(Default, Clone, Copy, Debug)]
pub struct OracleStats {
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
    pub restarts: u64,
}

impl OracleStats {
    /// Deterministic work measure used by scheduling heuristics.
    pub fn work(&self) -> u64 {
        self.propagations + 8 * self.conflicts + self.decisions
    }
}

const NO_REASON: u32 = u32::MAX;

struct Entry {
    terms: Vec<(Int, Lit)>,
    degree: Int,
    /// Coefficient sum over literals that are currently not false.
    watched_sum: Int,
    coeff_sum: Int,
    max_coef: Int,
    /// Proof-side guard literals: the proof holds this constraint only in
    /// reified form, so everything learned from it is logged widened by the
    /// guard negations.
    guards: Vec<Lit>,
}

pub struct PbOracle {
    entries: Vec<Entry>,
    /// For each literal code, the constraints containing that literal
    /// together with the term index (for coefficient lookup).
    occ: Vec<Vec<(u32, u32)>>,
    values: Vec<Option<bool>>,
    reason: Vec<u32>,
    level: Vec<u32>,
    pos: Vec<u32>,
    trail: Vec<Lit>,
    trail_lim: Vec<u32>,
    qhead: usize,
    num_assigned: usize,
    root_conflict: bool,
    /// Proof id of the clause logged for a root-level conflict.
    root_conflict_id: Option<ConstraintId>,
    seen: Vec<bool>,
    pub stats: OracleStats,
}

impl PbOracle {
    pub fn new(num_vars: u32) -> PbOracle {
        let mut oracle = PbOracle {
            entries: Vec::new(),
            occ: Vec::new(),
            values: Vec::new(),
            reason: Vec::new(),
            level: Vec::new(),
            pos: Vec::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            num_assigned: 0,
            root_conflict: false,
            root_conflict_id: None,
            seen: Vec::new(),
            stats: OracleStats::default(),
        };
        oracle.ensure_vars(num_vars);
        oracle
    }

    pub fn num_vars(&self) -> u32 {
        self.values.len() as u32
    }

    pub fn ensure_vars(&mut self, num_vars: u32) {
        let n = num_vars as usize;
        if n <= self.values.len() {
            return;
        }
        self.values.resize(n, None);
        self.reason.resize(n, NO_REASON);
        self.level.resize(n, 0);
        self.pos.resize(n, 0);
        self.seen.resize(n, false);
        self.occ.resize(2 * n, Vec::new());
    }

    pub fn is_root_conflicting(&self) -> bool {
        self.root_conflict
    }

    fn value_lit(&self, lit: Lit) -> Option<bool> {
        self.values[lit.var().offset()].map(|v| lit.apply(v))
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    /// Adds a normalized constraint. The solver backtracks to the root
    /// first, so incremental additions are always safe. Trivial constraints
    /// are dropped; a contradictory one marks the database infeasible.
    pub fn add_constraint(&mut self, constraint: &PbConstraint, guards: Vec<Lit>) {
        self.backtrack(0);
        self.ensure_vars(constraint.max_var());
        for &g in &guards {
            self.ensure_vars(g.var().index());
        }
        if constraint.is_trivial() {
            return;
        }
        let idx = self.entries.len() as u32;
        let mut watched_sum: Int = 0;
        for (ti, &(a, l)) in constraint.terms().iter().enumerate() {
            if self.value_lit(l) != Some(false) {
                watched_sum += a;
            }
            self.occ[l.code()].push((idx, ti as u32));
        }
        self.entries.push(Entry {
            terms: constraint.terms().to_vec(),
            degree: constraint.degree(),
            watched_sum,
            coeff_sum: constraint.coeff_sum(),
            max_coef: constraint.terms().iter().map(|&(a, _)| a).max().unwrap_or(0),
            guards,
        });
        // Propagate anything the new constraint forces at the root.
        let slack = watched_sum - constraint.degree();
        if slack < 0 {
            self.root_conflict = true;
            return;
        }
        for ti in 0..self.entries[idx as usize].terms.len() {
            let (a, l) = self.entries[idx as usize].terms[ti];
            if a > slack && self.value_lit(l).is_none() {
                self.enqueue(l, idx);
            }
        }
    }

    /// Assigns `lit` true with the given reason, updating the watched sums
    /// of every constraint containing the falsified opposite literal.
    fn enqueue(&mut self, lit: Lit, reason: u32) {
        debug_assert!(self.value_lit(lit).is_none());
        let var = lit.var();
        self.values[var.offset()] = Some(!lit.is_negated());
        self.reason[var.offset()] = reason;
        self.level[var.offset()] = self.decision_level();
        self.pos[var.offset()] = self.trail.len() as u32;
        self.trail.push(lit);
        self.num_assigned += 1;
        let falsified = (!lit).code();
        for k in 0..self.occ[falsified].len() {
            let (ci, ti) = self.occ[falsified][k];
            let coef = self.entries[ci as usize].terms[ti as usize].0;
            self.entries[ci as usize].watched_sum -= coef;
        }
    }

    fn backtrack(&mut self, target_level: u32) {
        while self.decision_level() > target_level {
            let limit = self.trail_lim.pop().unwrap() as usize;
            while self.trail.len() > limit {
                let lit = self.trail.pop().unwrap();
                let var = lit.var();
                self.values[var.offset()] = None;
                self.reason[var.offset()] = NO_REASON;
                self.num_assigned -= 1;
                let falsified = (!lit).code();
                for k in 0..self.occ[falsified].len() {
                    let (ci, ti) = self.occ[falsified][k];
                    let coef = self.entries[ci as usize].terms[ti as usize].0;
                    self.entries[ci as usize].watched_sum += coef;
                }
            }
            self.qhead = self.qhead.min(self.trail.len());
        }
    }

    /// Processes pending assignments to fixpoint. Returns the index of a
    /// violated constraint on conflict.
    fn propagate(&mut self) -> Option<u32> {
        while self.qhead < self.trail.len() {
            let lit = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let falsified = (!lit).code();
            for k in 0..self.occ[falsified].len() {
                let (ci, _) = self.occ[falsified][k];
                let entry = &self.entries[ci as usize];
                let slack = entry.watched_sum - entry.degree;
                if slack < 0 {
                    return Some(ci);
                }
                if entry.max_coef <= slack {
                    continue;
                }
                for ti in 0..self.entries[ci as usize].terms.len() {
                    let (a, l) = self.entries[ci as usize].terms[ti];
                    if a > slack && self.value_lit(l).is_none() {
                        self.enqueue(l, ci);
                    }
                }
            }
        }
        None
    }

    /// Smallest sufficient set of falsified literals of a constraint
    /// (positions strictly below `cutoff`) that explains a conflict
    /// (`excluded` none) or the propagation of `excluded`: the clause
    /// `excluded or subset` is entailed by the constraint. Greedy on large
    /// coefficients, with assignment order breaking ties deterministically.
    fn reason_subset(&self, entry_idx: u32, excluded: Option<Lit>, cutoff: u32) -> Vec<Lit> {
        let entry = &self.entries[entry_idx as usize];
        let excluded_coef = excluded.map_or(0, |p| {
            entry.terms.iter().find(|&&(_, l)| l == p).map_or(0, |&(a, _)| a)
        });
        let target = entry.coeff_sum - excluded_coef - entry.degree;
        let mut falsified: Vec<(Int, u32, Lit)> = entry
            .terms
            .iter()
            .filter(|&&(_, l)| {
                Some(l) != excluded
                    && self.value_lit(l) == Some(false)
                    && self.pos[l.var().offset()] < cutoff
            })
            .map(|&(a, l)| (a, self.pos[l.var().offset()], l))
            .collect();
        falsified.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut out = Vec::new();
        let mut sum: Int = 0;
        for (a, _, l) in falsified {
            if sum > target {
                break;
            }
            sum += a;
            out.push(l);
        }
        debug_assert!(sum > target, "falsified mass must explain the implication");
        out
    }

    /// A learned literal is redundant when the reason of its (true)
    /// negation resolves entirely into the clause and root facts.
    fn literal_redundant(&mut self, lit: Lit, guards: &mut Vec<Lit>) -> bool {
        let var = lit.var();
        let reason = self.reason[var.offset()];
        if reason == NO_REASON {
            return false;
        }
        let cutoff = self.pos[var.offset()];
        let subset = self.reason_subset(reason, Some(!lit), cutoff);
        let redundant = subset
            .iter()
            .all(|x| self.level[x.var().offset()] == 0 || self.seen[x.var().offset()]);
        if redundant {
            for &g in &self.entries[reason as usize].guards {
                if !guards.contains(&g) {
                    guards.push(g);
                }
            }
        }
        redundant
    }

    /// First-UIP conflict analysis. Returns the learned clause (asserting
    /// literal first), the backjump level, and the union of proof guards of
    /// every constraint resolved over.
    fn analyze(&mut self, conflict: u32) -> (Vec<Lit>, u32, Vec<Lit>) {
        let current = self.decision_level();
        let mut learned: Vec<Lit> = Vec::new();
        let mut guards: Vec<Lit> = Vec::new();
        let mut path_count: u32 = 0;
        let mut idx = self.trail.len();
        let mut resolved: Option<Lit> = None;
        let mut entry_idx = conflict;

        loop {
            for k in 0..self.entries[entry_idx as usize].guards.len() {
                let g = self.entries[entry_idx as usize].guards[k];
                if !guards.contains(&g) {
                    guards.push(g);
                }
            }
            let cutoff = match resolved {
                Some(p) => self.pos[p.var().offset()],
                None => u32::MAX,
            };
            for l in self.reason_subset(entry_idx, resolved, cutoff) {
                let var = l.var();
                debug_assert_eq!(self.value_lit(l), Some(false));
                if !self.seen[var.offset()] && self.level[var.offset()] > 0 {
                    self.seen[var.offset()] = true;
                    if self.level[var.offset()] == current {
                        path_count += 1;
                    } else {
                        learned.push(l);
                    }
                }
            }
            // Walk back to the next marked literal on the trail.
            loop {
                idx -= 1;
                if self.seen[self.trail[idx].var().offset()] {
                    break;
                }
            }
            let p = self.trail[idx];
            self.seen[p.var().offset()] = false;
            path_count -= 1;
            if path_count == 0 {
                learned.insert(0, !p);
                break;
            }
            resolved = Some(p);
            entry_idx = self.reason[p.var().offset()];
            debug_assert_ne!(entry_idx, NO_REASON);
        }

        // Clause minimization: literals whose reasons stay inside the
        // clause add nothing. The asserting literal's variable counts as
        // inside for this purpose.
        self.seen[learned[0].var().offset()] = true;
        let mut kept = vec![learned[0]];
        for &l in &learned[1..] {
            if !self.literal_redundant(l, &mut guards) {
                kept.push(l);
            }
        }
        for &l in &learned {
            self.seen[l.var().offset()] = false;
        }
        let learned = kept;

        let backjump = learned[1..]
            .iter()
            .map(|l| self.level[l.var().offset()])
            .max()
            .unwrap_or(0);
        (learned, backjump, guards)
    }

    /// Explains a failed assumption: walks the implication graph back to
    /// planted assumptions and returns the clause over their negations,
    /// together with the proof guards of the reasons used.
    fn analyze_final(&mut self, failed: Lit) -> (Vec<Lit>, Vec<Lit>) {
        let mut out = vec![!failed];
        let mut guards: Vec<Lit> = Vec::new();
        self.seen[failed.var().offset()] = true;
        for idx in (0..self.trail.len()).rev() {
            let q = self.trail[idx];
            let var = q.var();
            if !self.seen[var.offset()] {
                continue;
            }
            self.seen[var.offset()] = false;
            let reason = self.reason[var.offset()];
            if reason == NO_REASON {
                debug_assert!(self.level[var.offset()] > 0);
                out.push(!q);
                continue;
            }
            let q_pos = self.pos[var.offset()];
            for k in 0..self.entries[reason as usize].guards.len() {
                let g = self.entries[reason as usize].guards[k];
                if !guards.contains(&g) {
                    guards.push(g);
                }
            }
            for l in self.reason_subset(reason, Some(q), q_pos) {
                if self.level[l.var().offset()] > 0 {
                    self.seen[l.var().offset()] = true;
                }
            }
        }
        self.seen[failed.var().offset()] = false;
        // Deduplicate: the failed assumption may also be reachable as a
        // decision through the reason walk.
        out.dedup();
        (out, guards)
    }

    /// Union of guard literals over the whole database. A root conflict is
    /// logged as a clause over their negations (the empty clause when no
    /// constraint is guarded).
    fn all_guards(&self) -> Vec<Lit> {
        let mut guards: Vec<Lit> = Vec::new();
        for e in &self.entries {
            for &g in &e.guards {
                if !guards.contains(&g) {
                    guards.push(g);
                }
            }
        }
        guards
    }

    fn log_root_conflict(&mut self, logger: &mut Logger) {
        if self.root_conflict_id.is_none() {
            let guards = self.all_guards();
            self.root_conflict_id = logger.log_rup_clause(&[], &guards);
        }
    }

    /// Proof id of the clause recorded for the root conflict, when logging.
    pub fn root_conflict_proof_id(&self) -> Option<ConstraintId> {
        self.root_conflict_id
    }

    fn lowest_unassigned(&self) -> Option<Var> {
        self.values.iter().position(|v| v.is_none()).map(|off| Var::new(off as u32 + 1))
    }

    fn model(&self) -> Assignment {
        Assignment::from_complete(
            self.values.iter().map(|v| v.expect("model requires a full assignment")).collect(),
        )
    }

    fn unsat_root_result(&mut self, logger: &mut Logger) -> OracleResult {
        self.log_root_conflict(logger);
        let mut empty = PbConstraint::from_normalized(Vec::new(), 1);
        if let Some(id) = self.root_conflict_id {
            empty.set_id(id);
        }
        OracleResult::Unsat(Core::new(empty))
    }

    /// Complete decision procedure: never gives up.
    pub fn solve(&mut self, assumptions: &[Lit], logger: &mut Logger) -> OracleResult {
        self.solve_bounded(assumptions, &Budget::unlimited(), logger)
            .expect("unlimited budget cannot exhaust")
    }

    /// Decision procedure with an effort budget; `None` when it exhausts.
    pub fn solve_bounded(
        &mut self,
        assumptions: &[Lit],
        budget: &Budget,
        logger: &mut Logger,
    ) -> Option<OracleResult> {
        for a in assumptions {
            self.ensure_vars(a.var().index());
        }
        if self.root_conflict {
            return Some(self.unsat_root_result(logger));
        }
        self.backtrack(0);
        let mut conflicts_this_call: u64 = 0;
        let mut conflicts_since_restart: u64 = 0;
        let mut restart_threshold = 64 * luby(self.stats.restarts);

        loop {
            if let Some(conflict) = self.propagate() {
                self.stats.conflicts += 1;
                conflicts_this_call += 1;
                conflicts_since_restart += 1;
                if self.decision_level() == 0 {
                    self.root_conflict = true;
                    return Some(self.unsat_root_result(logger));
                }
                let (learned, backjump, guards) = self.analyze(conflict);
                self.backtrack(backjump);
                let proof_id = logger.log_rup_clause(&learned, &guards);
                let mut clause = PbConstraint::clause(learned.iter().copied());
                if let Some(id) = proof_id {
                    clause.set_id(id);
                }
                let idx = self.entries.len() as u32;
                self.add_learned(clause, guards);
                self.enqueue(learned[0], idx);

                if budget.conflicts_exhausted(conflicts_this_call)
                    || (conflicts_this_call.is_multiple_of(32) && budget.deadline_passed())
                {
                    self.backtrack(0);
                    return None;
                }
                if conflicts_since_restart >= restart_threshold {
                    self.stats.restarts += 1;
                    conflicts_since_restart = 0;
                    restart_threshold = 64 * luby(self.stats.restarts);
                    self.backtrack(0);
                }
            } else if (self.decision_level() as usize) < assumptions.len() {
                let a = assumptions[self.decision_level() as usize];
                match self.value_lit(a) {
                    Some(true) => {
                        // Dummy level keeps levels aligned with assumptions.
                        self.trail_lim.push(self.trail.len() as u32);
                    }
                    Some(false) => {
                        let (core_lits, guards) = self.analyze_final(a);
                        let proof_id = logger.log_rup_clause(&core_lits, &guards);
                        let mut core = PbConstraint::clause(core_lits);
                        if let Some(id) = proof_id {
                            core.set_id(id);
                        }
                        self.backtrack(0);
                        return Some(OracleResult::Unsat(Core::new(core)));
                    }
                    None => {
                        self.stats.decisions += 1;
                        self.trail_lim.push(self.trail.len() as u32);
                        self.enqueue(a, NO_REASON);
                    }
                }
            } else if self.num_assigned == self.values.len() {
                let model = self.model();
                self.backtrack(0);
                return Some(OracleResult::Sat(model));
            } else {
                let var = self.lowest_unassigned().expect("some variable is unassigned");
                self.stats.decisions += 1;
                if self.stats.decisions.is_multiple_of(1024) && budget.deadline_passed() {
                    self.backtrack(0);
                    return None;
                }
                self.trail_lim.push(self.trail.len() as u32);
                self.enqueue(var.negative(), NO_REASON);
            }
        }
    }

    fn add_learned(&mut self, clause: PbConstraint, guards: Vec<Lit>) {
        let idx = self.entries.len() as u32;
        let mut watched_sum: Int = 0;
        for (ti, &(a, l)) in clause.terms().iter().enumerate() {
            if self.value_lit(l) != Some(false) {
                watched_sum += a;
            }
            self.occ[l.code()].push((idx, ti as u32));
        }
        self.entries.push(Entry {
            terms: clause.terms().to_vec(),
            degree: clause.degree(),
            watched_sum,
            coeff_sum: clause.coeff_sum(),
            max_coef: 1,
            guards,
        });
    }
}

/// Luby restart sequence: 1, 1, 2, 1, 1, 2, 4, ... for `i = 0, 1, 2, ...`.
fn luby(i: u64) -> u64 {
    let mut size: u64 = 1;
    let mut seq: u32 = 0;
    while size < i + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    let mut x = i;
    while size - 1 != x {
        size = (size - 1) / 2;
        seq -= 1;
        x %= size;
    }
    1u64 << seq
}

/// Weight-aware core extraction. Assumptions start from the hitting-set
/// solution's objective-literal values; each core subtracts its minimum
/// residual weight from its literals, and every literal whose residual hits
/// zero leaves the assumption set. At least one assumption is removed per
/// core, so the phase terminates with a satisfying witness.
pub fn extract_cores(
    oracle: &mut PbOracle,
    gamma: &Assignment,
    objective: &Objective,
    logger: &mut Logger,
) -> Result<ExtractCoresResult, OracleError> {
    match extract_cores_bounded(oracle, gamma, objective, &Budget::unlimited(), logger)? {
        ExtractOutcome::Done(result) => Ok(result),
        ExtractOutcome::OutOfBudget(_) => unreachable!("unlimited budget cannot exhaust"),
    }
}

pub fn extract_cores_bounded(
    oracle: &mut PbOracle,
    gamma: &Assignment,
    objective: &Objective,
    budget: &Budget,
    logger: &mut Logger,
) -> Result<ExtractOutcome, OracleError> {
    // Assume each objective variable at its value under gamma; variables
    // gamma leaves open default to the cost-free polarity.
    let mut assumptions = AssumptionSet::from_sorted(
        objective
            .terms()
            .iter()
            .map(|&(_, l)| if gamma.lit_value(l) == Some(true) { l } else { !l })
            .collect(),
    );
    let mut residual: Vec<Int> = objective.terms().iter().map(|&(w, _)| w).collect();
    let mut cores: Vec<Core> = Vec::new();

    loop {
        let result = match oracle.solve_bounded(assumptions.literals(), budget, logger) {
            Some(r) => r,
            None => return Ok(ExtractOutcome::OutOfBudget(cores)),
        };
        match result {
            OracleResult::Sat(witness) => {
                return Ok(ExtractOutcome::Done(ExtractCoresResult { new_cores: cores, witness }))
            }
            OracleResult::Unsat(core) => {
                let lits: Vec<Lit> = core.constraint().terms().iter().map(|&(_, l)| l).collect();
                if lits.is_empty() {
                    return Err(OracleError::Infeasible);
                }
                // Residual class of a core literal: objective literals carry
                // their remaining weight; negations of objective literals are
                // free to flip and count as zero.
                let class = |l: Lit| -> Option<usize> {
                    objective
                        .terms()
                        .binary_search_by_key(&l.var(), |&(_, ol)| ol.var())
                        .ok()
                        .filter(|&i| objective.terms()[i].1 == l)
                };
                let w_min = lits
                    .iter()
                    .map(|&l| class(l).map_or(0, |i| residual[i]))
                    .min()
                    .expect("core is non-empty");
                let mut drop: Vec<Lit> = Vec::new();
                for &l in &lits {
                    match class(l) {
                        Some(i) => {
                            residual[i] -= w_min;
                            if residual[i] == 0 {
                                drop.push(l);
                            }
                        }
                        None => drop.push(l),
                    }
                }
                debug_assert!(!drop.is_empty(), "weight-aware relaxation must make progress");
                assumptions.relax(&drop);
                cores.push(core);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exhaustive::entailed_by_bruteforce;
    use crate::pb::Relation;

    fn xl(i: u32) -> Lit {
        Var::new(i).positive()
    }

    fn nxl(i: u32) -> Lit {
        Var::new(i).negative()
    }

    fn ge(terms: &[(Int, Lit)], rhs: Int) -> PbConstraint {
        PbConstraint::normalize(terms, Relation::GreaterEq, rhs).unwrap().remove(0)
    }

    fn oracle_with(constraints: &[PbConstraint], num_vars: u32) -> PbOracle {
        let mut o = PbOracle::new(num_vars);
        for c in constraints {
            o.add_constraint(c, Vec::new());
        }
        o
    }

    #[test]
    fn contradicting_assumptions_yield_the_constraint_core() {
        let c = ge(&[(1, xl(1)), (1, xl(2))], 1);
        let mut oracle = oracle_with(std::slice::from_ref(&c), 2);
        let mut log = Logger::disabled(2);
        match oracle.solve(&[nxl(1), nxl(2)], &mut log) {
            OracleResult::Unsat(core) => {
                assert_eq!(core.constraint().terms(), c.terms());
                assert_eq!(core.constraint().degree(), 1);
            }
            OracleResult::Sat(_) => panic!("must be unsat under ~x1, ~x2"),
        }
    }

    #[test]
    fn single_assumption_leaves_a_unique_completion() {
        let c = ge(&[(1, xl(1)), (1, xl(2))], 1);
        let mut oracle = oracle_with(&[c], 2);
        let mut log = Logger::disabled(2);
        match oracle.solve(&[nxl(1)], &mut log) {
            OracleResult::Sat(model) => {
                assert_eq!(model.value(Var::new(1)), Some(false));
                assert_eq!(model.value(Var::new(2)), Some(true));
            }
            OracleResult::Unsat(_) => panic!("satisfiable under ~x1"),
        }
    }

    #[test]
    fn globally_infeasible_returns_empty_core() {
        let f = [ge(&[(1, xl(1))], 1), ge(&[(1, nxl(1))], 1)];
        let mut oracle = oracle_with(&f, 1);
        let mut log = Logger::disabled(1);
        match oracle.solve(&[], &mut log) {
            OracleResult::Unsat(core) => {
                assert!(core.constraint().terms().is_empty());
                assert_eq!(core.constraint().degree(), 1);
            }
            OracleResult::Sat(_) => panic!("x and ~x cannot both hold"),
        }
    }

    #[test]
    fn solves_with_pb_propagation() {
        // 3x1 + 2x2 + 1x3 >= 3 with ~x1 assumed forces x2 and x3.
        let c = ge(&[(3, xl(1)), (2, xl(2)), (1, xl(3))], 3);
        let mut oracle = oracle_with(&[c], 3);
        let mut log = Logger::disabled(3);
        match oracle.solve(&[nxl(1)], &mut log) {
            OracleResult::Sat(m) => {
                assert_eq!(m.value(Var::new(2)), Some(true));
                assert_eq!(m.value(Var::new(3)), Some(true));
            }
            OracleResult::Unsat(_) => panic!("satisfiable"),
        }
    }

    #[test]
    fn extract_cores_on_single_constraint() {
        let c = ge(&[(1, xl(1)), (1, xl(2))], 1);
        let objective = Objective::new(vec![(1, xl(1)), (1, xl(2))], 0).unwrap();
        let mut oracle = oracle_with(std::slice::from_ref(&c), 2);
        let mut log = Logger::disabled(2);
        let gamma = Assignment::from_complete(vec![false, false]);
        let out = extract_cores(&mut oracle, &gamma, &objective, &mut log).unwrap();
        assert_eq!(out.new_cores.len(), 1);
        assert_eq!(out.new_cores[0].constraint().terms(), c.terms());
        assert!(c.evaluate(&out.witness).unwrap());
        assert_eq!(objective.cost(&out.witness).unwrap(), 1);
    }

    #[test]
    fn extract_cores_with_shared_variable_relaxes_to_sat() {
        // After the core {x1, x2} relaxes both assumptions, the second
        // constraint is satisfiable through x1, so one core suffices.
        let f = [ge(&[(1, xl(1)), (1, xl(2))], 1), ge(&[(1, xl(1)), (1, xl(3))], 1)];
        let objective = Objective::new(vec![(1, xl(1)), (1, xl(2)), (1, xl(3))], 0).unwrap();
        let mut oracle = oracle_with(&f, 3);
        let mut log = Logger::disabled(3);
        let gamma = Assignment::from_complete(vec![false, false, false]);
        let out = extract_cores(&mut oracle, &gamma, &objective, &mut log).unwrap();
        assert_eq!(out.new_cores.len(), 1);
        for c in &f {
            assert!(c.evaluate(&out.witness).unwrap());
        }
        for core in &out.new_cores {
            assert!(entailed_by_bruteforce(&f, core.constraint()).unwrap());
        }
    }

    #[test]
    fn extract_cores_covers_disjoint_constraints_in_one_call() {
        let f = [ge(&[(1, xl(1)), (1, xl(2))], 1), ge(&[(1, xl(3)), (1, xl(4))], 1)];
        let objective =
            Objective::new(vec![(1, xl(1)), (1, xl(2)), (1, xl(3)), (1, xl(4))], 0).unwrap();
        let mut oracle = oracle_with(&f, 4);
        let mut log = Logger::disabled(4);
        let gamma = Assignment::from_complete(vec![false; 4]);
        let out = extract_cores(&mut oracle, &gamma, &objective, &mut log).unwrap();
        assert_eq!(out.new_cores.len(), 2);
        for core in &out.new_cores {
            assert!(entailed_by_bruteforce(&f, core.constraint()).unwrap());
            assert!(core.is_over_objective_vars(&objective));
        }
        assert_eq!(objective.cost(&out.witness).unwrap(), 2);
    }

    #[test]
    fn extract_cores_returns_witness_immediately_when_gamma_extends() {
        let f = [ge(&[(1, xl(1)), (1, xl(2))], 1)];
        let objective = Objective::new(vec![(1, xl(1)), (1, xl(2))], 0).unwrap();
        let mut oracle = oracle_with(&f, 2);
        let mut log = Logger::disabled(2);
        let gamma = Assignment::from_complete(vec![true, false]);
        let out = extract_cores(&mut oracle, &gamma, &objective, &mut log).unwrap();
        assert!(out.new_cores.is_empty());
        assert_eq!(objective.cost(&out.witness).unwrap(), 1);
    }

    #[test]
    fn weighted_core_extraction_respects_residuals() {
        // Cost 5 on x1, cost 1 on x2. The shared core {x1, x2} has minimum
        // residual 1, so only x2 leaves the assumptions and a second core
        // over x1 alone is still found in the same call.
        let f = [ge(&[(1, xl(1)), (1, xl(2))], 1), ge(&[(1, xl(1))], 1)];
        let objective = Objective::new(vec![(5, xl(1)), (1, xl(2))], 0).unwrap();
        let mut oracle = oracle_with(&f, 2);
        let mut log = Logger::disabled(2);
        let gamma = Assignment::from_complete(vec![false, false]);
        let out = extract_cores(&mut oracle, &gamma, &objective, &mut log).unwrap();
        for core in &out.new_cores {
            assert!(entailed_by_bruteforce(&f, core.constraint()).unwrap());
        }
        assert!(f.iter().all(|c| c.evaluate(&out.witness).unwrap()));
    }

    #[test]
    fn incremental_reuse_stays_sound() {
        let mut oracle = oracle_with(&[ge(&[(1, xl(1)), (1, xl(2))], 1)], 2);
        let mut log = Logger::disabled(2);
        assert!(matches!(oracle.solve(&[], &mut log), OracleResult::Sat(_)));
        oracle.add_constraint(&ge(&[(1, nxl(1))], 1), Vec::new());
        match oracle.solve(&[], &mut log) {
            OracleResult::Sat(m) => {
                assert_eq!(m.value(Var::new(1)), Some(false));
                assert_eq!(m.value(Var::new(2)), Some(true));
            }
            OracleResult::Unsat(_) => panic!("still satisfiable"),
        }
        oracle.add_constraint(&ge(&[(1, nxl(2))], 1), Vec::new());
        assert!(matches!(oracle.solve(&[], &mut log), OracleResult::Unsat(_)));
        assert!(oracle.is_root_conflicting());
    }

    #[test]
    fn luby_sequence_prefix() {
        let expected = [1u64, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8];
        let got: Vec<u64> = (0..15).map(luby).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn budget_limits_effort() {
        // An unsatisfiable 2-variable instance needs more than one conflict
        // under lowest-index branching; a one-conflict budget must give up.
        let f = [
            ge(&[(1, xl(1)), (1, xl(2))], 1),
            ge(&[(1, nxl(1)), (1, xl(2))], 1),
            ge(&[(1, xl(1)), (1, nxl(2))], 1),
            ge(&[(1, nxl(1)), (1, nxl(2))], 1),
        ];
        let mut oracle = oracle_with(&f, 2);
        let mut log = Logger::disabled(2);
        let out = oracle.solve_bounded(&[], &Budget::with_conflicts(1), &mut log);
        assert!(out.is_none());
    }
}
