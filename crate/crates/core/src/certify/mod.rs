//! # Certification
//!
//! Proof logging for whole solver runs in a cutting-planes based text
//! format, plus an independent checker that replays every step with exact
//! arithmetic. The logger side streams steps as they happen; the checker
//! side holds all derived constraints and validates them one by one.
//!
//! ## Proof format
//!
//! ```text
//! p ihsproof 1
//! f <m>                            input constraints get ids 1..=m
//! pol <expr>                       postfix cutting planes, one new id
//! rup <constraint> ;               reverse-unit-propagation step, one new id
//! red <var> <dir> <constraint> ;   reification of a fresh variable;
//!                                  dir is => / <= / <=> (one id per direction)
//! soli <cost> <lits...> ;          full solution; also introduces the
//!                                  objective-bound constraint (one new id)
//! conc optimal <cost>
//! conc infeasible
//! * comment
//! ```
//!
//! `pol` expressions are postfix: a bare integer pushes the constraint with
//! that id, `x3`/`~x3` pushes the literal axiom `l >= 0`, `+` adds the two
//! top constraints, `<k> *` multiplies the top constraint by the positive
//! constant `k`, `<k> d` divides it by `k` rounding everything up, and `s`
//! saturates coefficients at the degree.

mod checker;
mod logger;

pub use checker::{check, check_text, parse_proof, CheckError, CheckVerdict};
pub use logger::Logger;

pub use crate::pb::ConstraintId;
use crate::pb::{Int, Lit, PbConstraint, Var};

/// Direction of a reification step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReifyDir {
    /// `x => C`: if x is true the constraint holds.
    Forward,
    /// `x <= C` read as `x` is implied by `C`: if the constraint holds, x is true.
    Backward,
    /// Both directions; the forward constraint gets the smaller id.
    Both,
}

/// One operation of a postfix cutting-planes expression.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CpOp {
    Push(ConstraintId),
    PushLiteralAxiom(Lit),
    Add,
    Multiply(Int),
    Divide(Int),
    Saturate,
}

/// Justification accepted by [`Logger::log_core`].
#[derive(Clone, Debug)]
pub enum Derivation {
    Rup,
    CuttingPlanes(Vec<CpOp>),
}

/// Final claim of a proof.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Conclusion {
    Optimal(Int),
    Infeasible,
}

/// A parsed proof step.
#[derive(Clone, Debug)]
pub enum ProofStep {
    CuttingPlanes(Vec<CpOp>),
    Rup(PbConstraint),
    Reify {
        var: Var,
        dir: ReifyDir,
        constraint: PbConstraint,
    },
    LogSolution {
        literals: Vec<Lit>,
        cost: Int,
    },
    Conclude(Conclusion),
}

/// An in-memory proof: the declared input-constraint count plus the
/// append-only step list. Steps only ever reference earlier ids.
#[derive(Clone, Debug)]
pub struct ProofLog {
    pub input_constraints: usize,
    pub steps: Vec<ProofStep>,
}

/// Renders a constraint the way both the logger and the proof parser
/// expect it: `+a1 l1 +a2 l2 >= d`.
fn write_constraint_body(out: &mut String, c: &PbConstraint) {
    for &(a, l) in c.terms() {
        out.push_str(&format!("+{a} {l} "));
    }
    out.push_str(&format!(">= {}", c.degree()));
}

/// The reification constraints of `var <dir> c` in normalized form.
///
/// For `C = sum a_i l_i >= d`, the forward constraint is
/// `d ~x + sum a_i l_i >= d` and the backward constraint is
/// `(sum a_i - d + 1) x + sum a_i ~l_i >= sum a_i - d + 1`. Degenerate cases
/// (trivial or contradictory `C`) collapse to trivial constraints or unit
/// forcings, handled by normalization.
pub fn reification_constraint(var: Var, dir: ReifyDir, c: &PbConstraint) -> PbConstraint {
    match dir {
        ReifyDir::Forward => {
            let mut terms: Vec<(Int, Lit)> = vec![(c.degree(), var.negative())];
            terms.extend(c.terms().iter().copied());
            PbConstraint::normalize(&terms, crate::pb::Relation::GreaterEq, c.degree())
                .expect("reification arithmetic stays in range")
                .remove(0)
        }
        ReifyDir::Backward => {
            let k = c.coeff_sum() - c.degree() + 1;
            if k <= 0 {
                // C is contradictory, so `C implies x` is vacuous.
                return PbConstraint::from_normalized(Vec::new(), 0);
            }
            let mut terms: Vec<(Int, Lit)> = vec![(k, var.positive())];
            terms.extend(c.terms().iter().map(|&(a, l)| (a, !l)));
            PbConstraint::from_normalized(terms, k)
        }
        ReifyDir::Both => unreachable!("expand Both into two directions first"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pb::{Assignment, Var};

    fn xl(i: u32) -> Lit {
        Var::new(i).positive()
    }

    #[test]
    fn reification_formulas_link_var_and_constraint() {
        // C = 2 x1 + 3 x2 >= 3, x = x9
        let c = PbConstraint::from_normalized(vec![(2, xl(1)), (3, xl(2))], 3);
        let fwd = reification_constraint(Var::new(9), ReifyDir::Forward, &c);
        let bwd = reification_constraint(Var::new(9), ReifyDir::Backward, &c);
        // Under every assignment: fwd holds iff (x -> C), bwd iff (C -> x).
        for bits in 0..8u32 {
            let mut a = Assignment::empty(9);
            a.set(Var::new(1), bits & 1 != 0);
            a.set(Var::new(2), bits & 2 != 0);
            a.set(Var::new(9), bits & 4 != 0);
            let c_holds = c.evaluate(&a).unwrap();
            let x = a.value(Var::new(9)).unwrap();
            assert_eq!(fwd.evaluate(&a).unwrap(), !x || c_holds);
            assert_eq!(bwd.evaluate(&a).unwrap(), !c_holds || x);
        }
    }

    #[test]
    fn reification_of_contradictory_constraint() {
        // C = empty >= 1 is contradictory: forward forces ~x, backward is trivial.
        let c = PbConstraint::from_normalized(Vec::new(), 1);
        let fwd = reification_constraint(Var::new(3), ReifyDir::Forward, &c);
        assert_eq!(fwd.terms(), &[(1, Var::new(3).negative())]);
        assert_eq!(fwd.degree(), 1);
        let bwd = reification_constraint(Var::new(3), ReifyDir::Backward, &c);
        assert!(bwd.is_trivial());
    }
}
