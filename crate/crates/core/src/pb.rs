//! # Pseudo-Boolean Domain Types
//!
//! Variables, literals, normalized PB constraints, objectives, assignments,
//! cores and bound tracking. All arithmetic is exact: coefficients are
//! 128-bit integers and every aggregation is overflow-checked, so a run
//! either computes exact values or reports an error, never a wrong number.

use std::fmt;
use std::ops::Not;

use thiserror::Error;

/// Exact integer type used for all coefficients, degrees, weights and costs.
pub type Int = i128;

/// Identifier of a constraint registered in a proof. Ids are issued
/// sequentially; ids `1..=m` always denote the input constraints in input
/// order, and every derived constraint has an id larger than everything it
/// was derived from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstraintId(pub u64);

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Errors from constraint normalization.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum NormalizeError {
    /// An aggregated coefficient or degree left the 128-bit range.
    #[error("integer overflow while normalizing constraint")]
    Overflow,
}

/// Errors from evaluating constraints or objectives under an assignment.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("variable {0} is unassigned")]
    Unassigned(Var),
    #[error("integer overflow while evaluating")]
    Overflow,
}

/// A 0-1 variable, identified by a positive index. Indices are dense per
/// instance, `1..=n`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(u32);

impl Var {
    pub fn new(index: u32) -> Var {
        debug_assert!(index > 0, "variable indices start at 1");
        Var(index)
    }

    pub fn index(self) -> u32 {
        self.0
    }

    /// Zero-based offset for dense array indexing.
    pub fn offset(self) -> usize {
        self.0 as usize - 1
    }

    pub fn positive(self) -> Lit {
        Lit::new(self, false)
    }

    pub fn negative(self) -> Lit {
        Lit::new(self, true)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

/// A literal: a variable or its negation. `~x` takes value `1 - x`.
/// Packed so literals are cheap to copy and index with.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: Var, negated: bool) -> Lit {
        Lit(var.index() << 1 | negated as u32)
    }

    pub fn var(self) -> Var {
        Var::new(self.0 >> 1)
    }

    pub fn is_negated(self) -> bool {
        self.0 & 1 == 1
    }

    /// Dense code usable as an array index (`2 * offset + negated`).
    pub fn code(self) -> usize {
        (self.var().offset() << 1) | self.is_negated() as usize
    }

    /// Value of the literal under `value` of its variable.
    pub fn apply(self, var_value: bool) -> bool {
        var_value != self.is_negated()
    }
}

impl Not for Lit {
    type Output = Lit;

    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_negated() {
            write!(f, "~{}", self.var())
        } else {
            write!(f, "{}", self.var())
        }
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Relation of a raw (unnormalized) constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    GreaterEq,
    LessEq,
    Equal,
}

/// A normalized pseudo-Boolean constraint `sum a_i l_i >= degree` with all
/// coefficients strictly positive, literals over pairwise distinct
/// variables (sorted by index), and a non-negative degree.
///
/// A constraint whose degree exceeds the coefficient sum is contradictory;
/// it is a valid object (it evaluates to false everywhere).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PbConstraint {
    terms: Vec<(Int, Lit)>,
    degree: Int,
    id: Option<ConstraintId>,
}

impl PbConstraint {
    /// Builds a constraint from raw signed terms and a relation. Returns one
    /// normalized constraint for `>=`/`<=` input and two for `=`. Duplicate
    /// variables are merged by coefficient addition before normalization and
    /// the solution set is preserved exactly.
    pub fn normalize(
        raw_terms: &[(Int, Lit)],
        relation: Relation,
        rhs: Int,
    ) -> Result<Vec<PbConstraint>, NormalizeError> {
        match relation {
            Relation::GreaterEq => Ok(vec![Self::normalize_ge(raw_terms, rhs)?]),
            Relation::LessEq => {
                let flipped: Vec<(Int, Lit)> = raw_terms
                    .iter()
                    .map(|&(a, l)| a.checked_neg().map(|a| (a, l)).ok_or(NormalizeError::Overflow))
                    .collect::<Result<_, _>>()?;
                let rhs = rhs.checked_neg().ok_or(NormalizeError::Overflow)?;
                Ok(vec![Self::normalize_ge(&flipped, rhs)?])
            }
            Relation::Equal => {
                let mut out = Self::normalize(raw_terms, Relation::GreaterEq, rhs)?;
                out.extend(Self::normalize(raw_terms, Relation::LessEq, rhs)?);
                Ok(out)
            }
        }
    }

    fn normalize_ge(raw_terms: &[(Int, Lit)], rhs: Int) -> Result<PbConstraint, NormalizeError> {
        // Merge duplicate variables: a*x and b*~x combine as (a-b)*x + b.
        let mut merged: Vec<(Var, Int)> = Vec::with_capacity(raw_terms.len());
        let mut degree = rhs;
        for &(a, l) in raw_terms {
            let (var, coef) = if l.is_negated() {
                // a*~x = a - a*x
                degree = degree.checked_sub(a).ok_or(NormalizeError::Overflow)?;
                (l.var(), a.checked_neg().ok_or(NormalizeError::Overflow)?)
            } else {
                (l.var(), a)
            };
            match merged.iter_mut().find(|(v, _)| *v == var) {
                Some((_, c)) => *c = c.checked_add(coef).ok_or(NormalizeError::Overflow)?,
                None => merged.push((var, coef)),
            }
        }
        // Flip negative coefficients back to positive literals.
        let mut terms = Vec::with_capacity(merged.len());
        for (var, coef) in merged {
            if coef > 0 {
                terms.push((coef, var.positive()));
            } else if coef < 0 {
                // c*x = c - c*~x with c < 0
                degree = degree.checked_sub(coef).ok_or(NormalizeError::Overflow)?;
                terms.push((coef.checked_neg().ok_or(NormalizeError::Overflow)?, var.negative()));
            }
        }
        terms.sort_unstable_by_key(|&(_, l)| l.var());
        let degree = degree.max(0);
        // Reject constraints whose coefficient sum is not representable.
        let mut sum: Int = 0;
        for &(a, _) in &terms {
            sum = sum.checked_add(a).ok_or(NormalizeError::Overflow)?;
        }
        Ok(PbConstraint { terms, degree, id: None })
    }

    /// A clausal constraint: at least one of the literals is true.
    /// The literals must be over distinct variables.
    pub fn clause(lits: impl IntoIterator<Item = Lit>) -> PbConstraint {
        let mut terms: Vec<(Int, Lit)> = lits.into_iter().map(|l| (1, l)).collect();
        terms.sort_unstable_by_key(|&(_, l)| l.var());
        debug_assert!(terms.windows(2).all(|w| w[0].1.var() != w[1].1.var()));
        PbConstraint { terms, degree: 1, id: None }
    }

    /// Builds directly from already-normalized parts. Panics in debug builds
    /// if the normal-form invariants do not hold.
    pub fn from_normalized(mut terms: Vec<(Int, Lit)>, degree: Int) -> PbConstraint {
        terms.sort_unstable_by_key(|&(_, l)| l.var());
        debug_assert!(terms.iter().all(|&(a, _)| a > 0));
        debug_assert!(terms.windows(2).all(|w| w[0].1.var() != w[1].1.var()));
        debug_assert!(degree >= 0);
        PbConstraint { terms, degree, id: None }
    }

    pub fn terms(&self) -> &[(Int, Lit)] {
        &self.terms
    }

    pub fn degree(&self) -> Int {
        self.degree
    }

    pub fn id(&self) -> Option<ConstraintId> {
        self.id
    }

    pub fn set_id(&mut self, id: ConstraintId) {
        self.id = Some(id);
    }

    pub fn with_id(mut self, id: ConstraintId) -> PbConstraint {
        self.id = Some(id);
        self
    }

    /// Sum of all coefficients (the maximum value of the left-hand side).
    pub fn coeff_sum(&self) -> Int {
        self.terms.iter().map(|&(a, _)| a).sum()
    }

    /// True when no assignment can satisfy the constraint.
    pub fn is_contradictory(&self) -> bool {
        self.degree > self.coeff_sum()
    }

    /// True when every assignment satisfies the constraint (degree 0).
    pub fn is_trivial(&self) -> bool {
        self.degree == 0
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.terms.iter().map(|&(_, l)| l.var())
    }

    pub fn max_var(&self) -> u32 {
        self.terms.iter().map(|&(_, l)| l.var().index()).max().unwrap_or(0)
    }

    /// Evaluates the constraint under a (complete enough) assignment.
    pub fn evaluate(&self, assignment: &Assignment) -> Result<bool, EvalError> {
        let mut lhs: Int = 0;
        for &(a, l) in &self.terms {
            let v = assignment.lit_value(l).ok_or(EvalError::Unassigned(l.var()))?;
            if v {
                lhs = lhs.checked_add(a).ok_or(EvalError::Overflow)?;
            }
        }
        Ok(lhs >= self.degree)
    }

    /// The semantic negation `sum a_i l_i <= degree - 1`, normalized.
    /// The negation of a trivial constraint is contradictory and vice versa.
    pub fn negation(&self) -> PbConstraint {
        let terms: Vec<(Int, Lit)> = self.terms.iter().map(|&(a, l)| (a, !l)).collect();
        let degree = self.coeff_sum() - self.degree + 1;
        PbConstraint::from_normalized(terms, degree.max(0))
    }
}

impl fmt::Display for PbConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &(a, l) in &self.terms {
            write!(f, "+{a} {l} ")?;
        }
        write!(f, ">= {}", self.degree)
    }
}

impl fmt::Debug for PbConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// An integer objective `sum w_i l_i + constant` to minimize. After
/// normalization all weights are strictly positive and literals are over
/// distinct variables; negative input weights are absorbed by flipping the
/// literal and adjusting the constant.
#[derive(Clone, PartialEq, Eq)]
pub struct Objective {
    terms: Vec<(Int, Lit)>,
    constant: Int,
}

impl Objective {
    pub fn new(raw_terms: Vec<(Int, Lit)>, constant: Int) -> Result<Objective, NormalizeError> {
        let mut merged: Vec<(Var, Int)> = Vec::with_capacity(raw_terms.len());
        let mut constant = constant;
        for (w, l) in raw_terms {
            let (var, weight) = if l.is_negated() {
                // w*~x = w - w*x
                constant = constant.checked_add(w).ok_or(NormalizeError::Overflow)?;
                (l.var(), w.checked_neg().ok_or(NormalizeError::Overflow)?)
            } else {
                (l.var(), w)
            };
            match merged.iter_mut().find(|(v, _)| *v == var) {
                Some((_, c)) => *c = c.checked_add(weight).ok_or(NormalizeError::Overflow)?,
                None => merged.push((var, weight)),
            }
        }
        let mut terms = Vec::with_capacity(merged.len());
        for (var, w) in merged {
            if w > 0 {
                terms.push((w, var.positive()));
            } else if w < 0 {
                // w*x = w + (-w)*~x with w < 0
                constant = constant.checked_add(w).ok_or(NormalizeError::Overflow)?;
                terms.push((w.checked_neg().ok_or(NormalizeError::Overflow)?, var.negative()));
            }
        }
        terms.sort_unstable_by_key(|&(_, l)| l.var());
        let mut sum: Int = 0;
        for &(w, _) in &terms {
            sum = sum.checked_add(w).ok_or(NormalizeError::Overflow)?;
        }
        sum.checked_add(constant).ok_or(NormalizeError::Overflow)?;
        Ok(Objective { terms, constant })
    }

    pub fn empty() -> Objective {
        Objective { terms: Vec::new(), constant: 0 }
    }

    pub fn terms(&self) -> &[(Int, Lit)] {
        &self.terms
    }

    pub fn constant(&self) -> Int {
        self.constant
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.terms.iter().map(|&(_, l)| l.var())
    }

    pub fn max_var(&self) -> u32 {
        self.terms.iter().map(|&(_, l)| l.var().index()).max().unwrap_or(0)
    }

    /// Sum of all weights; `constant + weight_sum` is the maximum cost.
    pub fn weight_sum(&self) -> Int {
        self.terms.iter().map(|&(w, _)| w).sum()
    }

    pub fn contains_var(&self, var: Var) -> bool {
        self.terms.binary_search_by_key(&var, |&(_, l)| l.var()).is_ok()
    }

    /// The cost of an assignment: `sum w_i * value(l_i) + constant`.
    pub fn cost(&self, assignment: &Assignment) -> Result<Int, EvalError> {
        let mut total = self.constant;
        for &(w, l) in &self.terms {
            let v = assignment.lit_value(l).ok_or(EvalError::Unassigned(l.var()))?;
            if v {
                total = total.checked_add(w).ok_or(EvalError::Overflow)?;
            }
        }
        Ok(total)
    }
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &(w, l) in &self.terms {
            write!(f, "+{w} {l} ")?;
        }
        write!(f, "+ {}", self.constant)
    }
}

/// A (possibly partial) assignment of variables to 0/1, stored densely.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Assignment {
    values: Vec<Option<bool>>,
}

impl Assignment {
    pub fn empty(num_vars: u32) -> Assignment {
        Assignment { values: vec![None; num_vars as usize] }
    }

    pub fn from_complete(values: Vec<bool>) -> Assignment {
        Assignment { values: values.into_iter().map(Some).collect() }
    }

    pub fn set(&mut self, var: Var, value: bool) {
        if var.offset() >= self.values.len() {
            self.values.resize(var.offset() + 1, None);
        }
        self.values[var.offset()] = Some(value);
    }

    pub fn value(&self, var: Var) -> Option<bool> {
        self.values.get(var.offset()).copied().flatten()
    }

    pub fn lit_value(&self, lit: Lit) -> Option<bool> {
        self.value(lit.var()).map(|v| lit.apply(v))
    }

    /// Number of variable slots tracked (assigned or not).
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True when every variable `1..=n` for the given count is assigned.
    pub fn is_complete_for(&self, num_vars: u32) -> bool {
        self.values.len() >= num_vars as usize
            && self.values[..num_vars as usize].iter().all(|v| v.is_some())
    }

    /// Restriction to a set of variables; other slots become unassigned.
    pub fn project(&self, vars: impl IntoIterator<Item = Var>) -> Assignment {
        let mut out = Assignment::empty(self.values.len() as u32);
        for var in vars {
            if let Some(v) = self.value(var) {
                out.set(var, v);
            }
        }
        out
    }

    pub fn assigned_vars(&self) -> impl Iterator<Item = (Var, bool)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (Var::new(i as u32 + 1), v)))
    }
}

/// A constraint over objective literals (or their negations) that is
/// entailed by the instance formula. Cores are the currency exchanged
/// between the decision oracle and the hitting set component.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Core {
    constraint: PbConstraint,
}

impl Core {
    pub fn new(constraint: PbConstraint) -> Core {
        Core { constraint }
    }

    pub fn constraint(&self) -> &PbConstraint {
        &self.constraint
    }

    pub fn into_constraint(self) -> PbConstraint {
        self.constraint
    }

    /// Every variable of the core must occur in the objective.
    pub fn is_over_objective_vars(&self, objective: &Objective) -> bool {
        self.constraint.vars().all(|v| objective.contains_var(v))
    }
}

/// Paired lower/upper bound on the optimal cost. `None` encodes the
/// unbounded side. The lower bound never decreases and the upper bound
/// never increases over a run, and `lower <= upper` holds throughout.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Bounds {
    lower: Option<Int>,
    upper: Option<Int>,
}

impl Bounds {
    pub fn unbounded() -> Bounds {
        Bounds { lower: None, upper: None }
    }

    pub fn lower(&self) -> Option<Int> {
        self.lower
    }

    pub fn upper(&self) -> Option<Int> {
        self.upper
    }

    /// Raises the lower bound. Non-improving values are ignored so the
    /// monotonicity invariant holds by construction. Panics if the new
    /// bound would cross the upper bound.
    pub fn improve_lower(&mut self, value: Int) -> bool {
        if self.lower.is_some_and(|lb| lb >= value) {
            return false;
        }
        assert!(
            self.upper.is_none_or(|ub| value <= ub),
            "lower bound {value} crosses upper bound {:?}",
            self.upper
        );
        self.lower = Some(value);
        true
    }

    /// Lowers the upper bound; mirror image of `improve_lower`.
    pub fn improve_upper(&mut self, value: Int) -> bool {
        if self.upper.is_some_and(|ub| ub <= value) {
            return false;
        }
        assert!(
            self.lower.is_none_or(|lb| lb <= value),
            "upper bound {value} crosses lower bound {:?}",
            self.lower
        );
        self.upper = Some(value);
        true
    }

    /// True when the bounds have met and the optimum is known.
    pub fn closed(&self) -> bool {
        match (self.lower, self.upper) {
            (Some(lb), Some(ub)) => lb == ub,
            _ => false,
        }
    }
}

/// A full PBO instance: a PB formula, an objective to minimize and the
/// number of variables (all constraint and objective variables lie within
/// that count).
#[derive(Clone, Debug)]
pub struct Instance {
    pub constraints: Vec<PbConstraint>,
    pub objective: Objective,
    pub num_vars: u32,
}

impl Instance {
    pub fn new(constraints: Vec<PbConstraint>, objective: Objective, num_vars: u32) -> Instance {
        debug_assert!(constraints.iter().all(|c| c.max_var() <= num_vars));
        debug_assert!(objective.max_var() <= num_vars);
        Instance { constraints, objective, num_vars }
    }
}
