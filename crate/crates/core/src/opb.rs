//! # OPB Reading and Writing
//!
//! Parser and emitter for the pseudo-Boolean competition text format:
//! an optional `* #variable= n #constraint= m` header, at most one `min:`
//! objective line, and `;`-terminated constraint lines with relations
//! `>=`, `<=` and `=`. Also renders competition-style result lines
//! (`o`/`s`/`v`).

use std::fmt;

use crate::pb::{Assignment, Instance, Int, Lit, Objective, PbConstraint, Relation, Var};

/// Severity of a parse diagnostic. Errors abort parsing with no partial
/// instance returned.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// A positioned message about the input text. Line and column are 1-based
/// and point inside the offending token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseDiagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub severity: Severity,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {kind}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseDiagnostic {}

struct Scanner<'a> {
    rest: &'a str,
    line: usize,
    column: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Token {
    Number(Int),
    Literal(Lit),
    Relation(Relation),
    Semicolon,
    MinColon,
}

impl<'a> Scanner<'a> {
    fn new(text: &'a str) -> Scanner<'a> {
        Scanner { rest: text, line: 1, column: 1 }
    }

    fn error(&self, message: impl Into<String>) -> ParseDiagnostic {
        ParseDiagnostic {
            line: self.line,
            column: self.column,
            message: message.into(),
            severity: Severity::Error,
        }
    }

    fn bump(&mut self, len: usize) {
        for ch in self.rest[..len].chars() {
            if ch == '\n' {
                self.line += 1;
                self.column = 1;
            } else {
                self.column += 1;
            }
        }
        self.rest = &self.rest[len..];
    }

    fn skip_ws_and_comments(&mut self) {
        loop {
            let trimmed = self.rest.len() - self.rest.trim_start().len();
            if trimmed > 0 {
                self.bump(trimmed);
            }
            if self.rest.starts_with('*') {
                let eol = self.rest.find('\n').unwrap_or(self.rest.len());
                self.bump(eol);
            } else {
                break;
            }
        }
    }

    /// Next token, or `None` at end of input.
    fn next_token(&mut self) -> Result<Option<Token>, ParseDiagnostic> {
        self.skip_ws_and_comments();
        let Some(first) = self.rest.chars().next() else {
            return Ok(None);
        };
        match first {
            ';' => {
                self.bump(1);
                Ok(Some(Token::Semicolon))
            }
            '>' | '<' => {
                if self.rest.len() < 2 || self.rest.as_bytes()[1] != b'=' {
                    return Err(self.error(format!("expected `{first}=`")));
                }
                let rel = if first == '>' { Relation::GreaterEq } else { Relation::LessEq };
                self.bump(2);
                Ok(Some(Token::Relation(rel)))
            }
            '=' => {
                self.bump(1);
                Ok(Some(Token::Relation(Relation::Equal)))
            }
            '+' | '-' | '0'..='9' => self.scan_number().map(Some),
            '~' => {
                self.bump(1);
                let var = self.scan_var()?;
                Ok(Some(Token::Literal(var.negative())))
            }
            'x' => {
                let var = self.scan_var()?;
                Ok(Some(Token::Literal(var.positive())))
            }
            'm' => {
                if let Some(rest) = self.rest.strip_prefix("min:") {
                    let len = self.rest.len() - rest.len();
                    self.bump(len);
                    Ok(Some(Token::MinColon))
                } else {
                    Err(self.error("unknown token, expected `min:`"))
                }
            }
            other => Err(self.error(format!("unknown token starting with `{other}`"))),
        }
    }

    fn scan_number(&mut self) -> Result<Token, ParseDiagnostic> {
        let mut len = 0;
        let bytes = self.rest.as_bytes();
        if bytes[0] == b'+' || bytes[0] == b'-' {
            len = 1;
        }
        let digits = bytes[len..].iter().take_while(|b| b.is_ascii_digit()).count();
        if digits == 0 {
            return Err(self.error("expected digits after sign"));
        }
        len += digits;
        let text = &self.rest[..len];
        // Digit strings of any length are accepted; values beyond the exact
        // 128-bit range are rejected rather than truncated.
        let value: Int = text
            .trim_start_matches('+')
            .parse()
            .map_err(|_| self.error(format!("integer `{text}` exceeds the supported 128-bit range")))?;
        self.bump(len);
        Ok(Token::Number(value))
    }

    fn scan_var(&mut self) -> Result<Var, ParseDiagnostic> {
        if !self.rest.starts_with('x') {
            return Err(self.error("expected variable `x<k>`"));
        }
        let digits = self.rest[1..].bytes().take_while(|b| b.is_ascii_digit()).count();
        if digits == 0 {
            return Err(self.error("expected variable index after `x`"));
        }
        let text = &self.rest[1..1 + digits];
        let index: u32 = text
            .parse()
            .map_err(|_| self.error(format!("variable index `{text}` is out of range")))?;
        if index == 0 {
            return Err(self.error("variable index 0 is not allowed"));
        }
        self.bump(1 + digits);
        Ok(Var::new(index))
    }
}

/// Parses the optional `* #variable= n #constraint= m` header from the
/// first line, without consuming anything on failure.
fn parse_header(text: &str) -> Option<(u32, usize)> {
    let first = text.lines().next()?;
    let rest = first.strip_prefix('*')?.trim();
    let rest = rest.strip_prefix("#variable=")?.trim_start();
    let split = rest.find(|c: char| !c.is_ascii_digit())?;
    let n: u32 = rest[..split].parse().ok()?;
    let rest = rest[split..].trim_start();
    let rest = rest.strip_prefix("#constraint=")?.trim_start();
    let digits = rest.bytes().take_while(|b| b.is_ascii_digit()).count();
    if digits == 0 {
        return None;
    }
    let m: usize = rest[..digits].parse().ok()?;
    Some((n, m))
}

/// Parses an OPB instance. On error the first diagnostic is returned and
/// no partial instance is produced. Constraints and the objective come
/// back fully normalized.
pub fn parse_opb(text: &str) -> Result<Instance, ParseDiagnostic> {
    let header = parse_header(text);
    let objective_constant = parse_constant_comment(text);
    let mut scanner = Scanner::new(text);
    let mut objective: Option<Objective> = None;
    let mut constraints: Vec<PbConstraint> = Vec::new();
    let mut source_constraints: usize = 0;
    let mut max_var: u32 = 0;

    loop {
        scanner.skip_ws_and_comments();
        let (start_line, start_col) = (scanner.line, scanner.column);
        let Some(tok) = scanner.next_token()? else {
            break;
        };
        match tok {
            Token::MinColon => {
                if objective.is_some() {
                    return Err(ParseDiagnostic {
                        line: start_line,
                        column: start_col,
                        message: "duplicate objective line".into(),
                        severity: Severity::Error,
                    });
                }
                let (terms, terminator) = parse_terms(&mut scanner)?;
                if terminator != Token::Semicolon {
                    return Err(scanner.error("objective line must end with `;`"));
                }
                for &(_, l) in &terms {
                    max_var = max_var.max(l.var().index());
                }
                let obj = Objective::new(terms, objective_constant)
                    .map_err(|e| scanner.error(format!("bad objective: {e}")))?;
                objective = Some(obj);
            }
            Token::Number(first_coef) => {
                let mut terms = vec![(first_coef, parse_lit(&mut scanner)?)];
                let (more, terminator) = parse_terms(&mut scanner)?;
                terms.extend(more);
                let Token::Relation(rel) = terminator else {
                    return Err(scanner.error("expected relation `>=`, `<=` or `=`"));
                };
                let rhs = match scanner.next_token()? {
                    Some(Token::Number(n)) => n,
                    _ => return Err(scanner.error("expected right-hand side integer")),
                };
                match scanner.next_token()? {
                    Some(Token::Semicolon) => {}
                    _ => return Err(scanner.error("constraint must end with `;`")),
                }
                for &(_, l) in &terms {
                    max_var = max_var.max(l.var().index());
                }
                let normalized = PbConstraint::normalize(&terms, rel, rhs)
                    .map_err(|e| scanner.error(format!("bad constraint: {e}")))?;
                constraints.extend(normalized);
                source_constraints += 1;
            }
            Token::Literal(_) => {
                return Err(ParseDiagnostic {
                    line: start_line,
                    column: start_col,
                    message: "term is missing its coefficient".into(),
                    severity: Severity::Error,
                });
            }
            other => {
                return Err(ParseDiagnostic {
                    line: start_line,
                    column: start_col,
                    message: format!("unexpected token {other:?} at start of line"),
                    severity: Severity::Error,
                });
            }
        }
    }

    let num_vars = match header {
        Some((n, declared_constraints)) => {
            if max_var > n {
                return Err(ParseDiagnostic {
                    line: 1,
                    column: 1,
                    message: format!(
                        "variable x{max_var} exceeds declared #variable= {n}"
                    ),
                    severity: Severity::Error,
                });
            }
            // `=` input lines split in two, so compare against source lines.
            if source_constraints != declared_constraints {
                return Err(ParseDiagnostic {
                    line: 1,
                    column: 1,
                    message: format!(
                        "header declares {declared_constraints} constraints but input has {source_constraints}"
                    ),
                    severity: Severity::Error,
                });
            }
            n
        }
        None => max_var,
    };

    Ok(Instance::new(
        constraints,
        objective.unwrap_or_else(Objective::empty),
        num_vars,
    ))
}

/// Our own comment extension preserving the objective constant term, which
/// plain OPB has no syntax for. Foreign readers skip it as a comment.
fn parse_constant_comment(text: &str) -> Int {
    for line in text.lines() {
        if let Some(rest) = line.trim_start().strip_prefix("* objective-constant") {
            if let Ok(value) = rest.trim().parse() {
                return value;
            }
        }
    }
    0
}

fn parse_lit(scanner: &mut Scanner<'_>) -> Result<Lit, ParseDiagnostic> {
    match scanner.next_token()? {
        Some(Token::Literal(l)) => Ok(l),
        _ => Err(scanner.error("expected literal after coefficient")),
    }
}

/// Parses `coef literal` pairs until a non-term token, which is returned.
fn parse_terms(
    scanner: &mut Scanner<'_>,
) -> Result<(Vec<(Int, Lit)>, Token), ParseDiagnostic> {
    let mut terms = Vec::new();
    loop {
        match scanner.next_token()? {
            Some(Token::Number(coef)) => {
                terms.push((coef, parse_lit(scanner)?));
            }
            Some(tok @ (Token::Semicolon | Token::Relation(_))) => return Ok((terms, tok)),
            Some(other) => {
                return Err(scanner.error(format!("unexpected token {other:?} in term list")))
            }
            None => return Err(scanner.error("unexpected end of input, missing `;`")),
        }
    }
}

/// Renders an instance in canonical OPB form. Parsing the output yields a
/// semantically identical instance (same solution set and costs).
pub fn write_opb(instance: &Instance) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "* #variable= {} #constraint= {}\n",
        instance.num_vars,
        instance.constraints.len()
    ));
    out.push_str("min:");
    for &(w, l) in instance.objective.terms().iter() {
        out.push_str(&format!(" +{w} {l}"));
    }
    // The constant term has no OPB syntax; preserve it as a comment.
    out.push_str(" ;\n");
    if instance.objective.constant() != 0 {
        out.push_str(&format!("* objective-constant {}\n", instance.objective.constant()));
    }
    for c in &instance.constraints {
        for &(a, l) in c.terms() {
            out.push_str(&format!("+{a} {l} "));
        }
        out.push_str(&format!(">= {} ;\n", c.degree()));
    }
    out
}

/// Final status of a solver run, in competition terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimum,
    Satisfiable,
    Unsatisfiable,
    Unknown,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimum => "OPTIMUM FOUND",
            SolveStatus::Satisfiable => "SATISFIABLE",
            SolveStatus::Unsatisfiable => "UNSATISFIABLE",
            SolveStatus::Unknown => "UNKNOWN",
        }
    }
}

/// Renders the final `o`/`s`/`v` output block. Optimum and satisfiable
/// results require a cost and a complete assignment.
pub fn emit_result(
    status: SolveStatus,
    cost: Option<Int>,
    assignment: Option<&Assignment>,
    num_vars: u32,
) -> String {
    let mut out = String::new();
    match status {
        SolveStatus::Optimum | SolveStatus::Satisfiable => {
            let cost = cost.expect("cost required for a solution status");
            let assignment = assignment.expect("assignment required for a solution status");
            out.push_str(&format!("o {cost}\n"));
            out.push_str(&format!("s {}\n", status.as_str()));
            out.push('v');
            for i in 1..=num_vars {
                let var = Var::new(i);
                match assignment.value(var) {
                    Some(true) => out.push_str(&format!(" x{i}")),
                    // Unassigned variables are free; report them as 0.
                    Some(false) | None => out.push_str(&format!(" -x{i}")),
                }
            }
            out.push('\n');
        }
        SolveStatus::Unsatisfiable | SolveStatus::Unknown => {
            out.push_str(&format!("s {}\n", status.as_str()));
        }
    }
    out
}
