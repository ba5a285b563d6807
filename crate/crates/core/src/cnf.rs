//! CNF formulas over spin variables.
//!
//! Spins and truth values share one convention across the crate: `+1` is
//! true and `-1` is false. Variables are 0-based in memory and 1-based in
//! DIMACS text.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use crate::error::{Error, ParseError, Result};

/// Largest variable or vertex count the file parsers accept.
pub const MAX_PARSED_VARIABLES: usize = 1 << 20;

/// A vector in `{-1, +1}^n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinConfiguration {
    spins: Vec<i8>,
}

impl SpinConfiguration {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some(&bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidSpin(bad as i64));
        }
        Ok(SpinConfiguration { spins })
    }

    pub fn all_up(n: usize) -> Self {
        SpinConfiguration { spins: vec![1; n] }
    }

    /// Bit `i` of `mask` set means spin `i` is `+1`.
    pub fn from_mask(mask: u64, n: usize) -> Self {
        let spins = (0..n)
            .map(|i| if mask >> i & 1 == 1 { 1 } else { -1 })
            .collect();
        SpinConfiguration { spins }
    }

    pub fn to_mask(&self) -> u64 {
        self.spins
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == 1)
            .fold(0u64, |acc, (i, _)| acc | 1 << i)
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    #[inline]
    pub fn get(&self, i: usize) -> i8 {
        self.spins[i]
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.spins[i] = -self.spins[i];
    }

    pub fn flipped(&self, i: usize) -> Self {
        let mut out = self.clone();
        out.flip(i);
        out
    }

    pub fn negated(&self) -> Self {
        SpinConfiguration {
            spins: self.spins.iter().map(|&s| -s).collect(),
        }
    }
}

impl fmt::Display for SpinConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.spins.iter().enumerate() {
            if i > 0 {
                f.write_char(' ')?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub var: usize,
    pub negated: bool,
}

impl Literal {
    pub fn positive(var: usize) -> Self {
        Literal { var, negated: false }
    }

    pub fn negative(var: usize) -> Self {
        Literal { var, negated: true }
    }

    /// Whether the literal is true when its variable carries `spin`.
    #[inline]
    pub fn holds(self, spin: i8) -> bool {
        (spin == 1) != self.negated
    }

    fn to_dimacs(self) -> i64 {
        let v = self.var as i64 + 1;
        if self.negated {
            -v
        } else {
            v
        }
    }
}

pub type Clause = Vec<Literal>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormulaStats {
    pub k_min: usize,
    pub k_max: usize,
    pub d_max: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<Clause>,
    var_to_clauses: Vec<Vec<usize>>,
    width_k: usize,
    degree_d: usize,
}

impl CnfFormula {
    /// Builds the formula and its variable-to-clause index. Clauses keep
    /// their given order; a clause may be empty.
    pub fn new(num_vars: usize, clauses: Vec<Clause>) -> Result<Self> {
        let mut var_to_clauses = vec![Vec::new(); num_vars];
        for (c, clause) in clauses.iter().enumerate() {
            for lit in clause {
                if lit.var >= num_vars {
                    return Err(Error::VariableOutOfRange {
                        index: lit.var,
                        num_vars,
                    });
                }
                let occ: &mut Vec<usize> = &mut var_to_clauses[lit.var];
                if occ.last() == Some(&c) {
                    return Err(Error::DuplicateVariable { clause: c, var: lit.var });
                }
                occ.push(c);
            }
        }
        let width_k = clauses.iter().map(Vec::len).max().unwrap_or(0);
        let degree_d = var_to_clauses.iter().map(Vec::len).max().unwrap_or(0);
        Ok(CnfFormula {
            num_vars,
            clauses,
            var_to_clauses,
            width_k,
            degree_d,
        })
    }

    pub fn empty(num_vars: usize) -> Self {
        CnfFormula {
            num_vars,
            clauses: Vec::new(),
            var_to_clauses: vec![Vec::new(); num_vars],
            width_k: 0,
            degree_d: 0,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn clauses_of(&self, var: usize) -> &[usize] {
        &self.var_to_clauses[var]
    }

    pub fn width_k(&self) -> usize {
        self.width_k
    }

    pub fn degree_d(&self) -> usize {
        self.degree_d
    }

    pub fn stats(&self) -> FormulaStats {
        FormulaStats {
            k_min: self.clauses.iter().map(Vec::len).min().unwrap_or(0),
            k_max: self.width_k,
            d_max: self.degree_d,
        }
    }

    fn check_len(&self, config: &SpinConfiguration) -> Result<()> {
        if config.len() != self.num_vars {
            return Err(Error::LengthMismatch {
                expected: self.num_vars,
                actual: config.len(),
            });
        }
        Ok(())
    }

    #[inline]
    fn clause_holds(&self, c: usize, spins: &[i8]) -> bool {
        self.clauses[c].iter().any(|l| l.holds(spins[l.var]))
    }

    pub fn satisfies(&self, config: &SpinConfiguration) -> Result<bool> {
        self.check_len(config)?;
        Ok(self.satisfies_unchecked(config.spins()))
    }

    pub(crate) fn satisfies_unchecked(&self, spins: &[i8]) -> bool {
        (0..self.clauses.len()).all(|c| self.clause_holds(c, spins))
    }

    /// Flippability of `i` assuming `spins` already satisfies the formula.
    /// Only the clauses that mention `i` are inspected.
    #[inline]
    pub(crate) fn flippable_unchecked(&self, spins: &[i8], i: usize) -> bool {
        let flipped = -spins[i];
        self.var_to_clauses[i].iter().all(|&c| {
            self.clauses[c].iter().any(|l| {
                let s = if l.var == i { flipped } else { spins[l.var] };
                l.holds(s)
            })
        })
    }

    /// Whether flipping coordinate `i` keeps `config` inside the solution set.
    /// `config` must itself be a solution.
    pub fn is_flippable(&self, config: &SpinConfiguration, i: usize) -> Result<bool> {
        self.check_len(config)?;
        if i >= self.num_vars {
            return Err(Error::VariableOutOfRange {
                index: i,
                num_vars: self.num_vars,
            });
        }
        if !self.satisfies_unchecked(config.spins()) {
            return Err(Error::SampleNotInSupport);
        }
        Ok(self.flippable_unchecked(config.spins(), i))
    }

    /// All flippable coordinates of a solution, ascending.
    pub fn flippable_set(&self, config: &SpinConfiguration) -> Result<Vec<usize>> {
        self.check_len(config)?;
        if !self.satisfies_unchecked(config.spins()) {
            return Err(Error::SampleNotInSupport);
        }
        Ok(self.flippable_set_unchecked(config.spins()))
    }

    pub(crate) fn flippable_set_unchecked(&self, spins: &[i8]) -> Vec<usize> {
        (0..self.num_vars)
            .filter(|&i| self.flippable_unchecked(spins, i))
            .collect()
    }

    /// Conditions the formula on a partial assignment: clauses satisfied by
    /// the pinning are dropped and falsified literals are removed. A clause
    /// whose literals are all falsified stays behind as an empty clause.
    ///
    /// The variable index space is unchanged; pinned variables simply no
    /// longer occur.
    pub fn restrict(&self, pinned: &[(usize, i8)]) -> Result<CnfFormula> {
        let mut pin = vec![0i8; self.num_vars];
        for &(var, spin) in pinned {
            if var >= self.num_vars {
                return Err(Error::VariableOutOfRange {
                    index: var,
                    num_vars: self.num_vars,
                });
            }
            if spin != 1 && spin != -1 {
                return Err(Error::InvalidSpin(spin as i64));
            }
            pin[var] = spin;
        }
        let clauses = self
            .clauses
            .iter()
            .filter(|clause| !clause.iter().any(|l| pin[l.var] != 0 && l.holds(pin[l.var])))
            .map(|clause| {
                clause
                    .iter()
                    .copied()
                    .filter(|l| pin[l.var] == 0)
                    .collect::<Clause>()
            })
            .collect();
        CnfFormula::new(self.num_vars, clauses)
    }

    /// Variables that share a clause with `var`, excluding `var` itself.
    pub fn co_occurring(&self, var: usize) -> BTreeSet<usize> {
        self.var_to_clauses[var]
            .iter()
            .flat_map(|&c| self.clauses[c].iter().map(|l| l.var))
            .filter(|&v| v != var)
            .collect()
    }
}

/// Parses DIMACS CNF. Comment lines start with `c`; blank lines are
/// ignored; every clause, including the last, must end with `0`.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula, ParseError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses: Vec<Clause> = Vec::new();
    let mut current: Clause = Vec::new();
    let mut current_start = 0;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(ParseError::new(line_no, "duplicate problem line"));
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "p" || parts[1] != "cnf" {
                return Err(ParseError::new(line_no, "expected `p cnf <vars> <clauses>`"));
            }
            let vars = parts[2]
                .parse::<usize>()
                .map_err(|_| ParseError::new(line_no, format!("bad variable count `{}`", parts[2])))?;
            let count = parts[3]
                .parse::<usize>()
                .map_err(|_| ParseError::new(line_no, format!("bad clause count `{}`", parts[3])))?;
            if vars > MAX_PARSED_VARIABLES {
                return Err(ParseError::new(line_no, format!("{vars} variables exceeds the limit of {MAX_PARSED_VARIABLES}")));
            }
            header = Some((vars, count));
            continue;
        }
        let (num_vars, _) = header.ok_or_else(|| ParseError::new(line_no, "clause before problem line"))?;
        for tok in line.split_whitespace() {
            let value = tok
                .parse::<i64>()
                .map_err(|_| ParseError::new(line_no, format!("bad literal `{tok}`")))?;
            if value == 0 {
                clauses.push(std::mem::take(&mut current));
                continue;
            }
            if current.is_empty() {
                current_start = line_no;
            }
            let var = value.unsigned_abs() as usize;
            if var > num_vars {
                return Err(ParseError::new(
                    line_no,
                    format!("variable {var} out of range 1..={num_vars}"),
                ));
            }
            let lit = Literal {
                var: var - 1,
                negated: value < 0,
            };
            if current.iter().any(|l| l.var == lit.var) {
                return Err(ParseError::new(
                    line_no,
                    format!("variable {var} repeated within a clause"),
                ));
            }
            current.push(lit);
        }
    }

    let (num_vars, count) = header.ok_or_else(|| ParseError::new(last_line.max(1), "missing problem line"))?;
    if !current.is_empty() {
        return Err(ParseError::new(current_start, "clause not terminated by 0"));
    }
    if clauses.len() != count {
        return Err(ParseError::new(
            last_line.max(1),
            format!("header declares {count} clauses, found {}", clauses.len()),
        ));
    }
    CnfFormula::new(num_vars, clauses).map_err(|e| ParseError::new(last_line.max(1), e))
}

/// Canonical DIMACS: the problem line, then one clause per line.
pub fn serialize_dimacs(formula: &CnfFormula) -> String {
    let mut out = format!("p cnf {} {}\n", formula.num_vars, formula.clauses.len());
    for clause in &formula.clauses {
        for lit in clause {
            let _ = write!(out, "{} ", lit.to_dimacs());
        }
        out.push_str("0\n");
    }
    out
}
