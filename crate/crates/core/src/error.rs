use thiserror::Error;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry at {0}")]
    NonFiniteEntry(String),
    #[error("coordinate {value} at row {row}, column {col} lies outside the unit cube")]
    OutOfUnitCube { row: usize, col: usize, value: f64 },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),
    #[error("correlation entry ({row}, {col}) is not finite")]
    NonFiniteCorrelation { row: usize, col: usize },
    #[error("matrix is not positive definite after jitter {last_jitter:e} (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize, last_jitter: f64 },
    #[error("degenerate denominator 1'R^-1 1 = {0}")]
    DegenerateDenominator(f64),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("every candidate in the population failed to factorize")]
    AllInfinitePopulation,
    #[error("objective evaluation budget is zero")]
    BudgetZero,
    #[error("degenerate bounds: {0}")]
    DegenerateBounds(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown backend `{0}` (expected reference, parallel or accelerated)")]
    UnknownBackend(String),
    #[error("backend `{0}` is not available in this build")]
    BackendUnavailable(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, GpError>;
