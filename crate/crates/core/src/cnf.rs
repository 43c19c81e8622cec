//! CNF data model and the DIMACS front end.
//!
//! Variables are 1-based. A literal carries its polarity as `positive`
//! (`x_j`) or negated (`¬x_j`). Clauses are identified by their 1-based
//! position in the formula; duplicate clauses stay distinct.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub var: u32,
    pub positive: bool,
}

impl Literal {
    pub fn new(var: u32, positive: bool) -> Self {
        assert!(var >= 1, "variables are 1-based");
        Literal { var, positive }
    }

    /// Parses a nonzero DIMACS integer.
    pub fn from_dimacs(value: i64) -> Option<Self> {
        if value == 0 || value.unsigned_abs() > u32::MAX as u64 {
            return None;
        }
        Some(Literal {
            var: value.unsigned_abs() as u32,
            positive: value > 0,
        })
    }

    pub fn to_dimacs(self) -> i64 {
        if self.positive {
            self.var as i64
        } else {
            -(self.var as i64)
        }
    }

    pub fn negated(self) -> Self {
        Literal {
            var: self.var,
            positive: !self.positive,
        }
    }

    /// True when the value assigned to the variable makes the literal true.
    pub fn is_satisfied_by(self, value: bool) -> bool {
        value == self.positive
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Clause {
    literals: Vec<Literal>,
}

impl Clause {
    /// Builds a clause, dropping repeated literals and rejecting clauses that
    /// hold a variable in both polarities.
    pub fn new(literals: impl IntoIterator<Item = Literal>) -> Result<Self, CnfError> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for lit in literals {
            if seen.contains(&lit.negated()) {
                return Err(CnfError::TautologicalClause { var: lit.var });
            }
            if seen.insert(lit) {
                out.push(lit);
            }
        }
        Ok(Clause { literals: out })
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn contains(&self, lit: Literal) -> bool {
        self.literals.contains(&lit)
    }

    pub fn has_positive(&self) -> bool {
        self.literals.iter().any(|l| l.positive)
    }

    pub fn has_negative(&self) -> bool {
        self.literals.iter().any(|l| !l.positive)
    }

    pub fn is_satisfied_by(&self, assignment: &Assignment) -> bool {
        self.literals.iter().any(|l| l.is_satisfied_by(assignment.value(l.var)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct CnfFormula {
    num_vars: u32,
    clauses: Vec<Clause>,
}

impl CnfFormula {
    pub fn new(num_vars: u32, clauses: Vec<Clause>) -> Result<Self, CnfError> {
        for (idx, clause) in clauses.iter().enumerate() {
            if let Some(lit) = clause.literals.iter().find(|l| l.var > num_vars) {
                return Err(CnfError::LiteralOutOfRange {
                    clause: idx + 1,
                    literal: lit.to_dimacs(),
                    num_vars,
                });
            }
        }
        Ok(CnfFormula { num_vars, clauses })
    }

    /// Convenience constructor from DIMACS-style integer clauses.
    pub fn from_ints(num_vars: u32, clauses: &[&[i64]]) -> Result<Self, CnfError> {
        let clauses = clauses
            .iter()
            .map(|c| {
                Clause::new(
                    c.iter()
                        .map(|&v| Literal::from_dimacs(v).expect("zero is not a literal")),
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(num_vars, clauses)
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// Clause by 1-based id.
    pub fn clause(&self, id: usize) -> &Clause {
        &self.clauses[id - 1]
    }

    pub fn has_empty_clause(&self) -> bool {
        self.clauses.iter().any(Clause::is_empty)
    }

    pub fn evaluate(&self, assignment: &Assignment) -> Result<bool, CnfError> {
        if assignment.len() != self.num_vars as usize {
            return Err(CnfError::LengthMismatch {
                expected: self.num_vars as usize,
                actual: assignment.len(),
            });
        }
        Ok(self.clauses.iter().all(|c| c.is_satisfied_by(assignment)))
    }

    /// Every clause holds a negative literal, or every clause holds a
    /// positive one.
    pub fn is_proportional(&self) -> bool {
        self.clauses.iter().all(Clause::has_negative) || self.clauses.iter().all(Clause::has_positive)
    }

    /// Flips the polarity of every occurrence of the given variables.
    pub fn invert_literals(&self, vars: &BTreeSet<u32>) -> Result<CnfFormula, CnfError> {
        if let Some(&var) = vars.iter().find(|&&v| v == 0 || v > self.num_vars) {
            return Err(CnfError::VarOutOfRange {
                var,
                num_vars: self.num_vars,
            });
        }
        let clauses = self
            .clauses
            .iter()
            .map(|c| Clause {
                literals: c
                    .literals
                    .iter()
                    .map(|&l| if vars.contains(&l.var) { l.negated() } else { l })
                    .collect(),
            })
            .collect();
        Ok(CnfFormula {
            num_vars: self.num_vars,
            clauses,
        })
    }

    /// Variables with at least one occurrence.
    pub fn used_vars(&self) -> BTreeSet<u32> {
        self.clauses
            .iter()
            .flat_map(|c| c.literals.iter().map(|l| l.var))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment(Vec<bool>);

impl Assignment {
    pub fn new(values: Vec<bool>) -> Self {
        Assignment(values)
    }

    pub fn all(value: bool, n: usize) -> Self {
        Assignment(vec![value; n])
    }

    /// Parses a bit string such as `110`.
    pub fn from_bits(bits: &str) -> Option<Self> {
        bits.chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Assignment)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Value of the 1-based variable.
    pub fn value(&self, var: u32) -> bool {
        self.0[var as usize - 1]
    }

    pub fn values(&self) -> &[bool] {
        &self.0
    }

    /// Flips the values of the given variables.
    pub fn flipped(&self, vars: &BTreeSet<u32>) -> Assignment {
        Assignment(
            self.0
                .iter()
                .enumerate()
                .map(|(i, &v)| v ^ vars.contains(&(i as u32 + 1)))
                .collect(),
        )
    }

    /// DIMACS model line body, e.g. `1 2 -3`.
    pub fn to_dimacs_literals(&self) -> String {
        self.0
            .iter()
            .enumerate()
            .map(|(i, &v)| if v { format!("{}", i + 1) } else { format!("-{}", i + 1) })
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn to_bits(&self) -> String {
        self.0.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bits())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CnfError {
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: invalid token `{token}`")]
    InvalidToken { line: usize, token: String },
    #[error("clause {clause}: literal {literal} exceeds declared variable count {num_vars}")]
    LiteralOutOfRange { clause: usize, literal: i64, num_vars: u32 },
    #[error("clause holds variable {var} in both polarities")]
    TautologicalClause { var: u32 },
    #[error("clause {clause} holds variable {var} in both polarities")]
    TautologyInInput { clause: usize, var: u32 },
    #[error("header declares {declared} clauses but {found} were read")]
    ClauseCountMismatch { declared: usize, found: usize },
    #[error("assignment has {actual} values, formula has {expected} variables")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("variable {var} outside 1..={num_vars}")]
    VarOutOfRange { var: u32, num_vars: u32 },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Drop tautological clauses instead of rejecting the input.
    pub strip_tautologies: bool,
}

/// What the parser did beyond a literal transcription.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseReport {
    /// 1-based ids (in input order) of tautological clauses that were dropped.
    pub stripped_tautologies: Vec<usize>,
}

pub fn parse_dimacs(text: &str) -> Result<CnfFormula, CnfError> {
    parse_dimacs_with(text, ParseOptions::default()).map(|(f, _)| f)
}

pub fn parse_dimacs_with(text: &str, options: ParseOptions) -> Result<(CnfFormula, ParseReport), CnfError> {
    let mut header: Option<(u32, usize)> = None;
    let mut raw: Vec<Vec<i64>> = Vec::new();
    let mut current: Vec<i64> = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        // SATLIB files end with a `%` marker line.
        if trimmed.starts_with('%') {
            break;
        }
        if trimmed.starts_with('p') {
            if header.is_some() {
                return Err(CnfError::MalformedHeader {
                    line: line_no,
                    reason: "duplicate header".into(),
                });
            }
            header = Some(parse_header(trimmed, line_no)?);
            continue;
        }
        if header.is_none() {
            return Err(CnfError::MalformedHeader {
                line: line_no,
                reason: "clause data before `p cnf` header".into(),
            });
        }
        for token in trimmed.split_whitespace() {
            let value: i64 = token.parse().map_err(|_| CnfError::InvalidToken {
                line: line_no,
                token: token.to_string(),
            })?;
            if value == 0 {
                raw.push(std::mem::take(&mut current));
            } else {
                current.push(value);
            }
        }
    }
    if !current.is_empty() {
        raw.push(current);
    }

    let (num_vars, declared) = header.ok_or(CnfError::MalformedHeader {
        line: 0,
        reason: "missing `p cnf` header".into(),
    })?;
    if raw.len() != declared {
        return Err(CnfError::ClauseCountMismatch {
            declared,
            found: raw.len(),
        });
    }

    let mut report = ParseReport::default();
    let mut clauses = Vec::with_capacity(raw.len());
    for (idx, ints) in raw.into_iter().enumerate() {
        let id = idx + 1;
        if let Some(&bad) = ints.iter().find(|v| v.unsigned_abs() > num_vars as u64) {
            return Err(CnfError::LiteralOutOfRange {
                clause: id,
                literal: bad,
                num_vars,
            });
        }
        let lits = ints.iter().map(|&v| Literal::from_dimacs(v).expect("nonzero"));
        match Clause::new(lits) {
            Ok(c) => clauses.push(c),
            Err(CnfError::TautologicalClause { var }) => {
                if options.strip_tautologies {
                    report.stripped_tautologies.push(id);
                } else {
                    return Err(CnfError::TautologyInInput { clause: id, var });
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok((CnfFormula::new(num_vars, clauses)?, report))
}

fn parse_header(line: &str, line_no: usize) -> Result<(u32, usize), CnfError> {
    let malformed = |reason: &str| CnfError::MalformedHeader {
        line: line_no,
        reason: reason.to_string(),
    };
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "p" || fields[1] != "cnf" {
        return Err(malformed("expected `p cnf <vars> <clauses>`"));
    }
    let vars = fields[2]
        .parse::<u32>()
        .map_err(|_| malformed("variable count is not a nonnegative integer"))?;
    let clauses = fields[3]
        .parse::<usize>()
        .map_err(|_| malformed("clause count is not a nonnegative integer"))?;
    Ok((vars, clauses))
}

pub fn write_dimacs(f: &CnfFormula) -> String {
    let mut out = format!("p cnf {} {}\n", f.num_vars, f.clauses.len());
    for clause in &f.clauses {
        for lit in &clause.literals {
            out.push_str(&lit.to_dimacs().to_string());
            out.push(' ');
        }
        out.push_str("0\n");
    }
    out
}

/// A formula with unused variables removed and the remaining variables
/// renumbered densely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preprocessed {
    pub formula: CnfFormula,
    /// `kept[i]` is the original index of compacted variable `i + 1`.
    pub kept: Vec<u32>,
    /// Original indices of variables with no occurrence.
    pub removed: Vec<u32>,
    original_vars: u32,
}

impl Preprocessed {
    /// Lifts an assignment over the compacted variables back to the original
    /// numbering. Removed variables are set to 1.
    pub fn lift(&self, compact: &Assignment) -> Assignment {
        let mut values = vec![true; self.original_vars as usize];
        for (i, &orig) in self.kept.iter().enumerate() {
            values[orig as usize - 1] = compact.values()[i];
        }
        Assignment::new(values)
    }

    pub fn original_vars(&self) -> u32 {
        self.original_vars
    }
}

/// Removes variables that occur in no clause.
pub fn preprocess(f: &CnfFormula) -> Preprocessed {
    let used = f.used_vars();
    let kept: Vec<u32> = used.iter().copied().collect();
    let removed: Vec<u32> = (1..=f.num_vars).filter(|v| !used.contains(v)).collect();
    let mut renumber = vec![0u32; f.num_vars as usize + 1];
    for (i, &orig) in kept.iter().enumerate() {
        renumber[orig as usize] = i as u32 + 1;
    }
    let clauses = f
        .clauses
        .iter()
        .map(|c| Clause {
            literals: c
                .literals
                .iter()
                .map(|l| Literal::new(renumber[l.var as usize], l.positive))
                .collect(),
        })
        .collect();
    Preprocessed {
        formula: CnfFormula {
            num_vars: kept.len() as u32,
            clauses,
        },
        kept,
        removed,
        original_vars: f.num_vars,
    }
}
