//! Streaming proof emission plus the shared fresh-variable registry.
//!
//! All components of a run (the core-extraction oracle and every backend)
//! draw fresh variables from the one registry here and append their
//! derivations to the one stream, so constraint ids and variable names are
//! globally consistent. With logging disabled every log operation is a
//! no-op that allocates nothing; the variable registry stays active either
//! way because backends need fresh variables regardless of certification.

use std::collections::BTreeSet;
use std::io::{self, Write};

use crate::pb::{Assignment, ConstraintId, Instance, Int, Lit, Objective, PbConstraint, Var};

use super::{write_constraint_body, CpOp, Derivation, ReifyDir};

pub struct Logger {
    sink: Option<Box<dyn Write + Send>>,
    next_id: u64,
    next_var: u32,
    best_logged_cost: Option<Int>,
    /// Id of the objective-bound constraint implied by the best logged
    /// solution (`O <= cost - 1`), used for final contradictions.
    last_solution_bound: Option<ConstraintId>,
    io_error: Option<io::Error>,
    buf: String,
}

impl Logger {
    /// A logger that records nothing but still issues fresh variables
    /// above `num_vars`.
    pub fn disabled(num_vars: u32) -> Logger {
        Logger {
            sink: None,
            next_id: 0,
            next_var: num_vars + 1,
            best_logged_cost: None,
            last_solution_bound: None,
            io_error: None,
            buf: String::new(),
        }
    }

    /// A logger streaming to `sink`. Writes the proof header; input
    /// constraints implicitly receive ids `1..=m` in instance order.
    pub fn new(instance: &Instance, mut sink: Box<dyn Write + Send>) -> io::Result<Logger> {
        writeln!(sink, "p ihsproof 1")?;
        writeln!(sink, "f {}", instance.constraints.len())?;
        Ok(Logger {
            sink: Some(sink),
            next_id: instance.constraints.len() as u64,
            next_var: instance.num_vars + 1,
            best_logged_cost: None,
            last_solution_bound: None,
            io_error: None,
            buf: String::new(),
        })
    }

    pub fn enabled(&self) -> bool {
        self.sink.is_some()
    }

    /// First write error encountered, if any. Logging keeps the run going;
    /// the driver surfaces this at the end.
    pub fn io_error(&self) -> Option<&io::Error> {
        self.io_error.as_ref()
    }

    /// Issues a variable unused by the instance and by every prior proof
    /// step. The hint only aids debugging output and has no semantics.
    pub fn register_fresh_var(&mut self, _hint: &str) -> Var {
        let var = Var::new(self.next_var);
        self.next_var += 1;
        var
    }

    pub fn last_solution_bound(&self) -> Option<ConstraintId> {
        self.last_solution_bound
    }

    pub fn best_logged_cost(&self) -> Option<Int> {
        self.best_logged_cost
    }

    fn emit(&mut self) -> Option<()> {
        let sink = self.sink.as_mut()?;
        if self.io_error.is_none() {
            if let Err(e) = sink.write_all(self.buf.as_bytes()) {
                self.io_error = Some(e);
            }
        }
        self.buf.clear();
        Some(())
    }

    fn fresh_id(&mut self) -> ConstraintId {
        self.next_id += 1;
        ConstraintId(self.next_id)
    }

    /// Logs a clause derivable by reverse unit propagation. `guards` are
    /// literals the solver-side derivation implicitly assumed true (from
    /// constraints that exist only in guarded form in the proof); their
    /// negations widen the logged clause.
    pub fn log_rup_clause(
        &mut self,
        clause_lits: &[Lit],
        guards: &[Lit],
    ) -> Option<ConstraintId> {
        self.sink.as_ref()?;
        let mut lits: BTreeSet<Lit> = clause_lits.iter().copied().collect();
        for &g in guards {
            lits.insert(!g);
        }
        debug_assert!(
            lits.iter().map(|l| l.var()).collect::<BTreeSet<_>>().len() == lits.len(),
            "guard literal collides with clause literal"
        );
        let clause = PbConstraint::clause(lits);
        self.log_rup_constraint(&clause)
    }

    /// Logs an arbitrary constraint as a RUP step.
    pub fn log_rup_constraint(&mut self, constraint: &PbConstraint) -> Option<ConstraintId> {
        self.sink.as_ref()?;
        self.buf.push_str("rup ");
        write_constraint_body(&mut self.buf, constraint);
        self.buf.push_str(" ;\n");
        self.emit()?;
        Some(self.fresh_id())
    }

    /// Logs a cutting-planes derivation and returns the id of the result.
    pub fn log_cutting_planes(&mut self, ops: &[CpOp]) -> Option<ConstraintId> {
        self.sink.as_ref()?;
        self.buf.push_str("pol");
        for op in ops {
            match op {
                CpOp::Push(id) => self.buf.push_str(&format!(" {id}")),
                CpOp::PushLiteralAxiom(l) => self.buf.push_str(&format!(" {l}")),
                CpOp::Add => self.buf.push_str(" +"),
                CpOp::Multiply(k) => self.buf.push_str(&format!(" {k} *")),
                CpOp::Divide(k) => self.buf.push_str(&format!(" {k} d")),
                CpOp::Saturate => self.buf.push_str(" s"),
            }
        }
        self.buf.push('\n');
        self.emit()?;
        Some(self.fresh_id())
    }

    /// Registers a core in the proof. Seeded cores alias their input
    /// constraint through a trivial multiply-by-one derivation; extracted
    /// clausal cores are justified by reverse unit propagation.
    pub fn log_core(
        &mut self,
        core: &PbConstraint,
        derivation: Derivation,
    ) -> Option<ConstraintId> {
        match derivation {
            Derivation::Rup => self.log_rup_constraint(core),
            Derivation::CuttingPlanes(ops) => self.log_cutting_planes(&ops),
        }
    }

    /// Logs the reification `var <dir> constraint` and returns the ids of
    /// the emitted directions (forward, backward).
    pub fn log_reify(
        &mut self,
        var: Var,
        dir: ReifyDir,
        constraint: &PbConstraint,
    ) -> (Option<ConstraintId>, Option<ConstraintId>) {
        if self.sink.is_none() {
            return (None, None);
        }
        let dir_text = match dir {
            ReifyDir::Forward => "=>",
            ReifyDir::Backward => "<=",
            ReifyDir::Both => "<=>",
        };
        self.buf.push_str(&format!("red {var} {dir_text} "));
        write_constraint_body(&mut self.buf, constraint);
        self.buf.push_str(" ;\n");
        self.emit();
        match dir {
            ReifyDir::Forward => (Some(self.fresh_id()), None),
            ReifyDir::Backward => (None, Some(self.fresh_id())),
            ReifyDir::Both => {
                let fwd = self.fresh_id();
                let bwd = self.fresh_id();
                (Some(fwd), Some(bwd))
            }
        }
    }

    /// Reifies the solution-improving constraint `objective < bound` on a
    /// fresh variable `r`, in both directions: the forward direction guards
    /// solver-side uses of the bound, the backward direction turns the
    /// eventual refutation of `r` into an explicit lower-bound constraint.
    ///
    /// The fresh variable is registered even when logging is disabled so
    /// solver behavior does not depend on certification.
    pub fn log_reified_sic(
        &mut self,
        objective: &Objective,
        bound: Int,
    ) -> (Var, PbConstraint, Option<ConstraintId>, Option<ConstraintId>) {
        let r = self.register_fresh_var("sic");
        let sic = sic_constraint(objective, bound);
        let (fwd, bwd) = self.log_reify(r, ReifyDir::Both, &sic);
        (r, sic, fwd, bwd)
    }

    /// Logs a full solution with its claimed cost. Returns the id of the
    /// implied objective-bound constraint `objective <= cost - 1`.
    pub fn log_solution(
        &mut self,
        assignment: &Assignment,
        cost: Int,
        num_vars: u32,
    ) -> Option<ConstraintId> {
        self.sink.as_ref()?;
        debug_assert!(self.best_logged_cost.is_none_or(|b| cost < b));
        self.buf.push_str(&format!("soli {cost}"));
        for i in 1..=num_vars {
            let var = Var::new(i);
            match assignment.value(var) {
                Some(true) => self.buf.push_str(&format!(" {var}")),
                Some(false) | None => self.buf.push_str(&format!(" ~{var}")),
            }
        }
        self.buf.push_str(" ;\n");
        self.emit()?;
        let id = self.fresh_id();
        self.best_logged_cost = Some(cost);
        self.last_solution_bound = Some(id);
        Some(id)
    }

    pub fn log_conclusion(&mut self, conclusion: super::Conclusion) {
        if self.sink.is_none() {
            return;
        }
        match conclusion {
            super::Conclusion::Optimal(cost) => {
                self.buf.push_str(&format!("conc optimal {cost}\n"))
            }
            super::Conclusion::Infeasible => self.buf.push_str("conc infeasible\n"),
        }
        self.emit();
        if let Some(sink) = self.sink.as_mut() {
            let _ = sink.flush();
        }
    }

    pub fn log_comment(&mut self, text: &str) {
        if self.sink.is_none() {
            return;
        }
        self.buf.push_str("* ");
        self.buf.push_str(text);
        self.buf.push('\n');
        self.emit();
    }

    pub fn flush(&mut self) {
        if let Some(sink) = self.sink.as_mut() {
            if let Err(e) = sink.flush() {
                if self.io_error.is_none() {
                    self.io_error = Some(e);
                }
            }
        }
    }
}

/// The solution-improving constraint `objective < bound` in normal form:
/// `sum w_i ~l_i >= sum w_i - (bound - constant - 1)`.
pub(crate) fn sic_constraint(objective: &Objective, bound: Int) -> PbConstraint {
    PbConstraint::normalize(
        objective.terms(),
        crate::pb::Relation::LessEq,
        bound - objective.constant() - 1,
    )
    .expect("objective bound arithmetic stays in range")
    .remove(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_vars_are_sequential_and_distinct() {
        let mut log = Logger::disabled(5);
        let a = log.register_fresh_var("a");
        let b = log.register_fresh_var("b");
        assert_eq!(a, Var::new(6));
        assert_eq!(b, Var::new(7));
        assert_ne!(a, b);
    }

    #[test]
    fn disabled_logger_returns_no_ids() {
        let mut log = Logger::disabled(2);
        assert!(log.log_rup_clause(&[Var::new(1).positive()], &[]).is_none());
        assert!(log.log_cutting_planes(&[CpOp::Push(ConstraintId(1))]).is_none());
        let (r, _, fwd, bwd) =
            log.log_reified_sic(&Objective::new(vec![(1, Var::new(1).positive())], 0).unwrap(), 1);
        assert_eq!(r, Var::new(3));
        assert!(fwd.is_none() && bwd.is_none());
    }

    #[test]
    fn sic_normal_form_examples() {
        // O = x + y, bound 2: r => (~x + ~y >= 1)
        let o = Objective::new(
            vec![(1, Var::new(1).positive()), (1, Var::new(2).positive())],
            0,
        )
        .unwrap();
        let sic = sic_constraint(&o, 2);
        assert_eq!(sic.terms(), &[(1, Var::new(1).negative()), (1, Var::new(2).negative())]);
        assert_eq!(sic.degree(), 1);

        // O = 3x, bound 3: 3x <= 2 forces x = 0 (3 ~x >= 1, same as ~x >= 1)
        let o = Objective::new(vec![(3, Var::new(1).positive())], 0).unwrap();
        let sic = sic_constraint(&o, 3);
        assert_eq!(sic.terms(), &[(3, Var::new(1).negative())]);
        assert_eq!(sic.degree(), 1);
        let mut a = Assignment::empty(1);
        a.set(Var::new(1), true);
        assert!(!sic.evaluate(&a).unwrap());
        a.set(Var::new(1), false);
        assert!(sic.evaluate(&a).unwrap());

        // bound at or below the constant: no improvement possible
        let o = Objective::new(vec![(2, Var::new(1).positive())], 5).unwrap();
        let sic = sic_constraint(&o, 5);
        assert!(sic.is_contradictory());
    }
}
