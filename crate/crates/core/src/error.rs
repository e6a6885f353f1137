use thiserror::Error;

/// Errors raised by the scoring, transport and evaluation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("column {column} has length {len}, expected {expected}")]
    LengthMismatch {
        column: usize,
        len: usize,
        expected: usize,
    },
    #[error("column {column} row {row}: score {value} is negative or not finite")]
    InvalidScore { column: usize, row: usize, value: f64 },
    #[error("score matrix must have at least one row and one column")]
    Empty,
    #[error("expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(
        "grid of {per_axis}^{dim} points exceeds the limit of {limit} atoms; lower the atom budget or the dimension"
    )]
    GridTooLarge { per_axis: usize, dim: usize, limit: usize },
    #[error("{dim} measures would need 2^{dim}-1 anchors (cap is {cap} measures); disable anchors with gamma = 0")]
    TooManyAnchors { dim: usize, cap: usize },
    #[error("probability {0} is outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("weights must be positive and sum to one: {0}")]
    InvalidWeights(String),
    #[error("both classes must be present")]
    SingleClass,
    #[error("undefined: {0}")]
    Degenerate(String),
    #[error("covariance factorization failed: {0}")]
    NotPositiveDefinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
