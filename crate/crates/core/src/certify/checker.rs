//! Independent proof checking. The checker parses the textual proof format
//! and replays each step with exact arithmetic: cutting-planes expressions
//! are evaluated on a stack machine, RUP steps by reverse unit propagation
//! over everything derived so far, reifications after a freshness check,
//! and logged solutions by full evaluation against the input constraints.
//!
//! The propagation engine here is written from scratch and shares nothing
//! with the solving path; a bug in the solver cannot hide in its checker.

use std::collections::BTreeSet;
use std::fmt;

use crate::pb::{Assignment, ConstraintId, Instance, Int, Lit, PbConstraint, Relation, Var};

use super::{reification_constraint, Conclusion, CpOp, ProofLog, ProofStep, ReifyDir};

/// Successful check outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckVerdict {
    /// Proof establishes this optimal cost, witnessed by a logged solution.
    Optimal(Int),
    /// Proof establishes that the instance has no solutions.
    Infeasible,
}

/// Rejection: the first failing step (1-based; 0 means the preamble) and
/// the reason.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckError {
    pub step: usize,
    pub reason: String,
}

impl fmt::Display for CheckError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "proof step {}: {}", self.step, self.reason)
    }
}

impl std::error::Error for CheckError {}

fn reject(step: usize, reason: impl Into<String>) -> CheckError {
    CheckError { step, reason: reason.into() }
}

/// Parses the textual proof format into a [`ProofLog`].
pub fn parse_proof(text: &str) -> Result<ProofLog, CheckError> {
    let mut steps = Vec::new();
    let mut input_constraints: Option<usize> = None;
    let mut saw_header = false;

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('*') {
            continue;
        }
        let mut words = line.split_ascii_whitespace();
        let keyword = words.next().unwrap();
        let err = |reason: String| reject(0, format!("line {}: {reason}", lineno + 1));
        match keyword {
            "p" => {
                if words.next() != Some("ihsproof") {
                    return Err(err("expected `p ihsproof 1` header".into()));
                }
                saw_header = true;
            }
            "f" => {
                let m = words
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| err("`f` expects the input constraint count".into()))?;
                input_constraints = Some(m);
            }
            "pol" => {
                steps.push(ProofStep::CuttingPlanes(parse_pol(words).map_err(err)?));
            }
            "rup" => {
                let c = parse_constraint_words(words).map_err(err)?;
                steps.push(ProofStep::Rup(c));
            }
            "red" => {
                let var_word = words.next().ok_or_else(|| err("`red` expects a variable".into()))?;
                let var = parse_var(var_word).map_err(err)?;
                let dir = match words.next() {
                    Some("=>") => ReifyDir::Forward,
                    Some("<=") => ReifyDir::Backward,
                    Some("<=>") => ReifyDir::Both,
                    other => return Err(err(format!("bad reification direction {other:?}"))),
                };
                let c = parse_constraint_words(words).map_err(err)?;
                steps.push(ProofStep::Reify { var, dir, constraint: c });
            }
            "soli" => {
                let cost = words
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| err("`soli` expects a cost".into()))?;
                let mut literals = Vec::new();
                for w in words {
                    if w == ";" {
                        break;
                    }
                    literals.push(parse_lit(w).map_err(&err)?);
                }
                steps.push(ProofStep::LogSolution { literals, cost });
            }
            "conc" => match words.next() {
                Some("optimal") => {
                    let cost = words
                        .next()
                        .and_then(|w| w.parse().ok())
                        .ok_or_else(|| err("`conc optimal` expects a cost".into()))?;
                    steps.push(ProofStep::Conclude(Conclusion::Optimal(cost)));
                }
                Some("infeasible") => steps.push(ProofStep::Conclude(Conclusion::Infeasible)),
                other => return Err(err(format!("bad conclusion {other:?}"))),
            },
            other => return Err(err(format!("unknown proof keyword `{other}`"))),
        }
    }

    if !saw_header {
        return Err(reject(0, "missing `p ihsproof 1` header"));
    }
    let input_constraints =
        input_constraints.ok_or_else(|| reject(0, "missing `f <m>` line"))?;
    Ok(ProofLog { input_constraints, steps })
}

fn parse_var(word: &str) -> Result<Var, String> {
    let digits = word.strip_prefix('x').ok_or_else(|| format!("bad variable `{word}`"))?;
    let index: u32 = digits.parse().map_err(|_| format!("bad variable `{word}`"))?;
    if index == 0 {
        return Err("variable index 0 is not allowed".into());
    }
    Ok(Var::new(index))
}

fn parse_lit(word: &str) -> Result<Lit, String> {
    if let Some(rest) = word.strip_prefix('~') {
        Ok(parse_var(rest)?.negative())
    } else {
        Ok(parse_var(word)?.positive())
    }
}

/// Parses `+a1 l1 +a2 l2 >= d [;]` from a word iterator.
fn parse_constraint_words<'a>(
    words: impl Iterator<Item = &'a str>,
) -> Result<PbConstraint, String> {
    let mut terms: Vec<(Int, Lit)> = Vec::new();
    let mut words = words.peekable();
    loop {
        match words.next() {
            Some(">=") => break,
            Some(coef_word) => {
                let coef: Int = coef_word
                    .parse()
                    .map_err(|_| format!("bad coefficient `{coef_word}`"))?;
                let lit_word =
                    words.next().ok_or_else(|| "missing literal after coefficient".to_string())?;
                terms.push((coef, parse_lit(lit_word)?));
            }
            None => return Err("constraint is missing `>=`".into()),
        }
    }
    let degree_word = words.next().ok_or_else(|| "missing degree".to_string())?;
    let degree: Int =
        degree_word.parse().map_err(|_| format!("bad degree `{degree_word}`"))?;
    PbConstraint::normalize(&terms, Relation::GreaterEq, degree)
        .map(|mut v| v.remove(0))
        .map_err(|e| e.to_string())
}

/// Parses a postfix cutting-planes expression. A number directly followed
/// by `*` or `d` is that operator's scalar; any other number pushes the
/// constraint with that id.
fn parse_pol<'a>(words: impl Iterator<Item = &'a str>) -> Result<Vec<CpOp>, String> {
    let mut ops = Vec::new();
    let mut pending_number: Option<Int> = None;
    for w in words {
        match w {
            "+" => {
                if let Some(n) = pending_number.take() {
                    ops.push(number_as_push(n)?);
                }
                ops.push(CpOp::Add);
            }
            "s" => {
                if let Some(n) = pending_number.take() {
                    ops.push(number_as_push(n)?);
                }
                ops.push(CpOp::Saturate);
            }
            "*" => {
                let k = pending_number
                    .take()
                    .ok_or_else(|| "`*` needs a preceding scalar".to_string())?;
                ops.push(CpOp::Multiply(k));
            }
            "d" => {
                let k = pending_number
                    .take()
                    .ok_or_else(|| "`d` needs a preceding scalar".to_string())?;
                ops.push(CpOp::Divide(k));
            }
            _ if w.starts_with('x') || w.starts_with('~') => {
                if let Some(n) = pending_number.take() {
                    ops.push(number_as_push(n)?);
                }
                ops.push(CpOp::PushLiteralAxiom(parse_lit(w)?));
            }
            _ => {
                if let Some(n) = pending_number.take() {
                    ops.push(number_as_push(n)?);
                }
                pending_number =
                    Some(w.parse().map_err(|_| format!("bad pol token `{w}`"))?);
            }
        }
    }
    if let Some(n) = pending_number.take() {
        ops.push(number_as_push(n)?);
    }
    Ok(ops)
}

fn number_as_push(n: Int) -> Result<CpOp, String> {
    if n <= 0 {
        return Err(format!("constraint id {n} out of range"));
    }
    u64::try_from(n).map(|id| CpOp::Push(ConstraintId(id))).map_err(|_| "id overflow".into())
}

struct CheckState {
    /// All constraints by id; slot `i` holds id `i + 1`.
    constraints: Vec<PbConstraint>,
    /// Variables seen anywhere so far; reified variables must avoid these.
    seen_vars: BTreeSet<Var>,
    /// Whether some derived constraint is contradictory.
    contradiction: bool,
    best_solution_cost: Option<Int>,
}

impl CheckState {
    fn lookup(&self, id: ConstraintId, step: usize) -> Result<&PbConstraint, CheckError> {
        if id.0 == 0 || id.0 as usize > self.constraints.len() {
            return Err(reject(step, format!("reference to unknown constraint id {id}")));
        }
        Ok(&self.constraints[id.0 as usize - 1])
    }

    fn push_constraint(&mut self, c: PbConstraint) {
        if c.is_contradictory() {
            self.contradiction = true;
        }
        self.seen_vars.extend(c.vars());
        self.constraints.push(c);
    }
}

/// Adds two normalized constraints; opposite literals cancel into the
/// degree, which is clamped at zero.
fn cp_add(a: &PbConstraint, b: &PbConstraint, step: usize) -> Result<PbConstraint, CheckError> {
    let mut raw: Vec<(Int, Lit)> = Vec::with_capacity(a.terms().len() + b.terms().len());
    raw.extend(a.terms().iter().copied());
    raw.extend(b.terms().iter().copied());
    let degree = a
        .degree()
        .checked_add(b.degree())
        .ok_or_else(|| reject(step, "degree overflow in addition"))?;
    PbConstraint::normalize(&raw, Relation::GreaterEq, degree)
        .map(|mut v| v.remove(0))
        .map_err(|e| reject(step, format!("addition failed: {e}")))
}

fn cp_multiply(c: &PbConstraint, k: Int, step: usize) -> Result<PbConstraint, CheckError> {
    if k <= 0 {
        return Err(reject(step, format!("multiplication by non-positive constant {k}")));
    }
    let overflow = || reject(step, "overflow in multiplication");
    let terms = c
        .terms()
        .iter()
        .map(|&(a, l)| a.checked_mul(k).map(|a| (a, l)).ok_or_else(overflow))
        .collect::<Result<Vec<_>, _>>()?;
    let degree = c.degree().checked_mul(k).ok_or_else(overflow)?;
    // Re-check representability of the coefficient sum.
    let mut sum: Int = 0;
    for &(a, _) in &terms {
        sum = sum.checked_add(a).ok_or_else(overflow)?;
    }
    Ok(PbConstraint::from_normalized(terms, degree))
}

fn cp_divide(c: &PbConstraint, k: Int, step: usize) -> Result<PbConstraint, CheckError> {
    if k <= 0 {
        return Err(reject(step, format!("division by non-positive constant {k}")));
    }
    let ceil_div = |a: Int| (a + k - 1) / k;
    let terms: Vec<(Int, Lit)> =
        c.terms().iter().map(|&(a, l)| (ceil_div(a), l)).collect();
    Ok(PbConstraint::from_normalized(terms, ceil_div(c.degree())))
}

fn cp_saturate(c: &PbConstraint) -> PbConstraint {
    let d = c.degree();
    let terms: Vec<(Int, Lit)> = c
        .terms()
        .iter()
        .filter_map(|&(a, l)| {
            let a = a.min(d);
            (a > 0).then_some((a, l))
        })
        .collect();
    PbConstraint::from_normalized(terms, d)
}

fn eval_cutting_planes(
    state: &CheckState,
    ops: &[CpOp],
    step: usize,
) -> Result<PbConstraint, CheckError> {
    let mut stack: Vec<PbConstraint> = Vec::new();
    for op in ops {
        match op {
            CpOp::Push(id) => stack.push(state.lookup(*id, step)?.clone()),
            CpOp::PushLiteralAxiom(l) => {
                stack.push(PbConstraint::from_normalized(vec![(1, *l)], 0))
            }
            CpOp::Add => {
                let b = stack.pop().ok_or_else(|| reject(step, "stack underflow"))?;
                let a = stack.pop().ok_or_else(|| reject(step, "stack underflow"))?;
                stack.push(cp_add(&a, &b, step)?);
            }
            CpOp::Multiply(k) => {
                let a = stack.pop().ok_or_else(|| reject(step, "stack underflow"))?;
                stack.push(cp_multiply(&a, *k, step)?);
            }
            CpOp::Divide(k) => {
                let a = stack.pop().ok_or_else(|| reject(step, "stack underflow"))?;
                stack.push(cp_divide(&a, *k, step)?);
            }
            CpOp::Saturate => {
                let a = stack.pop().ok_or_else(|| reject(step, "stack underflow"))?;
                stack.push(cp_saturate(&a));
            }
        }
    }
    if stack.len() != 1 {
        return Err(reject(step, format!("expression leaves {} values on the stack", stack.len())));
    }
    Ok(stack.pop().unwrap())
}

/// Reverse unit propagation: assert the negation of `goal` and propagate
/// over `constraints` until fixpoint. Returns true when a conflict arises,
/// which certifies the goal.
fn rup_succeeds(constraints: &[PbConstraint], goal: &PbConstraint) -> bool {
    let negation = goal.negation();
    let max_var = constraints
        .iter()
        .map(|c| c.max_var())
        .chain(std::iter::once(negation.max_var()))
        .max()
        .unwrap_or(0);
    let mut values: Vec<Option<bool>> = vec![None; max_var as usize];

    let all: Vec<&PbConstraint> =
        constraints.iter().chain(std::iter::once(&negation)).collect();
    loop {
        let mut changed = false;
        for c in &all {
            // slack: how much the maximum achievable left-hand side exceeds
            // the degree, given current falsifications.
            let mut slack = -c.degree();
            for &(a, l) in c.terms() {
                let falsified = values[l.var().offset()].is_some_and(|v| !l.apply(v));
                if !falsified {
                    slack += a;
                }
            }
            if slack < 0 {
                return true;
            }
            for &(a, l) in c.terms() {
                if a > slack && values[l.var().offset()].is_none() {
                    values[l.var().offset()] = Some(!l.is_negated());
                    changed = true;
                }
            }
        }
        if !changed {
            return false;
        }
    }
}

/// Replays a proof against an instance. Accepts with the concluded verdict
/// or rejects at the first failing step.
pub fn check(instance: &Instance, proof: &ProofLog) -> Result<CheckVerdict, CheckError> {
    if proof.input_constraints != instance.constraints.len() {
        return Err(reject(
            0,
            format!(
                "proof declares {} input constraints, instance has {}",
                proof.input_constraints,
                instance.constraints.len()
            ),
        ));
    }
    let mut state = CheckState {
        constraints: Vec::with_capacity(instance.constraints.len() + proof.steps.len()),
        seen_vars: (1..=instance.num_vars).map(Var::new).collect(),
        contradiction: false,
        best_solution_cost: None,
    };
    for c in &instance.constraints {
        state.push_constraint(c.clone());
    }
    let mut verdict: Option<CheckVerdict> = None;
    for (idx, step) in proof.steps.iter().enumerate() {
        let step_no = idx + 1;
        if verdict.is_some() {
            return Err(reject(step_no, "step after conclusion"));
        }
        match step {
            ProofStep::CuttingPlanes(ops) => {
                let c = eval_cutting_planes(&state, ops, step_no)?;
                state.push_constraint(c);
            }
            ProofStep::Rup(c) => {
                if !rup_succeeds(&state.constraints, c) {
                    return Err(reject(
                        step_no,
                        format!("constraint is not reverse-unit-propagation derivable: {c}"),
                    ));
                }
                state.push_constraint(c.clone());
            }
            ProofStep::Reify { var, dir, constraint } => {
                if state.seen_vars.contains(var) {
                    return Err(reject(
                        step_no,
                        format!("reification variable {var} is not fresh"),
                    ));
                }
                match dir {
                    ReifyDir::Forward | ReifyDir::Backward => {
                        let c = reification_constraint(*var, *dir, constraint);
                        state.seen_vars.insert(*var);
                        state.push_constraint(c);
                    }
                    ReifyDir::Both => {
                        let fwd = reification_constraint(*var, ReifyDir::Forward, constraint);
                        let bwd = reification_constraint(*var, ReifyDir::Backward, constraint);
                        state.seen_vars.insert(*var);
                        state.push_constraint(fwd);
                        state.push_constraint(bwd);
                    }
                }
            }
            ProofStep::LogSolution { literals, cost } => {
                let mut assignment = Assignment::empty(instance.num_vars);
                for l in literals {
                    if l.var().index() > instance.num_vars {
                        return Err(reject(
                            step_no,
                            format!("solution assigns {} outside the instance", l.var()),
                        ));
                    }
                    assignment.set(l.var(), !l.is_negated());
                }
                if !assignment.is_complete_for(instance.num_vars) {
                    return Err(reject(step_no, "solution does not assign every variable"));
                }
                for (ci, c) in instance.constraints.iter().enumerate() {
                    if !c.evaluate(&assignment).unwrap() {
                        return Err(reject(
                            step_no,
                            format!("solution violates input constraint {}", ci + 1),
                        ));
                    }
                }
                let actual = instance.objective.cost(&assignment).map_err(|e| {
                    reject(step_no, format!("cost evaluation failed: {e}"))
                })?;
                if actual != *cost {
                    return Err(reject(
                        step_no,
                        format!("solution claims cost {cost} but evaluates to {actual}"),
                    ));
                }
                if state.best_solution_cost.is_some_and(|b| *cost >= b) {
                    return Err(reject(step_no, "logged solution does not improve"));
                }
                state.best_solution_cost = Some(*cost);
                // The logged solution implies the bound `objective <= cost - 1`
                // for any better solution; it joins the database with an id.
                let bound = super::logger::sic_constraint(&instance.objective, *cost);
                state.push_constraint(bound);
            }
            ProofStep::Conclude(Conclusion::Optimal(cost)) => {
                if state.best_solution_cost != Some(*cost) {
                    return Err(reject(
                        step_no,
                        format!(
                            "optimal claim {cost} does not match best logged solution {:?}",
                            state.best_solution_cost
                        ),
                    ));
                }
                if !state.contradiction {
                    return Err(reject(
                        step_no,
                        "no contradiction derived below the claimed optimum",
                    ));
                }
                verdict = Some(CheckVerdict::Optimal(*cost));
            }
            ProofStep::Conclude(Conclusion::Infeasible) => {
                if state.best_solution_cost.is_some() {
                    return Err(reject(step_no, "infeasibility claim after a logged solution"));
                }
                if !state.contradiction {
                    return Err(reject(step_no, "no contradiction derived"));
                }
                verdict = Some(CheckVerdict::Infeasible);
            }
        }
    }
    verdict.ok_or_else(|| reject(proof.steps.len() + 1, "proof ends without a conclusion"))
}

/// Parses and checks a textual proof in one call.
pub fn check_text(instance: &Instance, proof_text: &str) -> Result<CheckVerdict, CheckError> {
    let proof = parse_proof(proof_text)?;
    check(instance, &proof)
}
