use std::fmt;

use thiserror::Error;

/// A parse failure with the 1-based line it was detected on.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(line: usize, message: impl fmt::Display) -> Self {
        ParseError {
            line,
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("variable index {index} out of range for {num_vars} variables")]
    VariableOutOfRange { index: usize, num_vars: usize },

    #[error("clause {clause} mentions variable {var} more than once")]
    DuplicateVariable { clause: usize, var: usize },

    #[error("configuration has length {actual}, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("spin value {0} is not -1 or +1")]
    InvalidSpin(i64),

    #[error("configuration does not satisfy the formula")]
    SampleNotInSupport,

    #[error("coordinate {0} is not flippable")]
    NotFlippable(usize),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("beta {beta} outside [-{bound}, {bound}]")]
    BetaOutOfRange { beta: f64, bound: f64 },

    #[error("beta bound must be positive and finite, got {0}")]
    InvalidBetaBound(f64),

    #[error("graph has {graph} vertices but formula has {formula} variables")]
    SizeMismatch { graph: usize, formula: usize },

    #[error("{n} variables exceeds the enumeration cap of {cap}")]
    EnumerationCap { n: usize, cap: usize },

    #[error("truncation set is empty: the formula has no satisfying assignment")]
    EmptySupport,

    #[error("pseudolikelihood is constant: no flippable coordinate carries a nonzero magnetization")]
    DegenerateObjective,

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("retry limit of {0} exceeded")]
    RetryLimit(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
