use thiserror::Error;

use crate::conic::SolverError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("scenario {row} coordinate {col} = {value} lies outside the support")]
    SupportViolation { row: usize, col: usize, value: f64 },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("atom {value} lies outside the support interval [{lo}, {hi}]")]
    AtomOutsideSupport { value: f64, lo: f64, hi: f64 },

    #[error("atom count mismatch: {left} vs {right}")]
    AtomCountMismatch { left: usize, right: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("CVaR level must lie in (0, 1], got {0}")]
    BadAlpha(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    #[error("radius {epsilon} is smaller than |eta - mean| = {gap}; the ball contains no law with the prescribed mean")]
    InfeasibleRadius { epsilon: f64, gap: f64 },

    #[error("no records for eps = {0}")]
    EmptyCell(f64),

    #[error("records for eps = {eps}, run = {run} are not paired")]
    UnpairedRecords { eps: f64, run: usize },

    #[error(transparent)]
    Solver(#[from] SolverError),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
