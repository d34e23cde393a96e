use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("symmetric eigensolver did not converge after {sweeps} sweeps")]
    EigenNoConvergence { sweeps: usize },

    #[error("negative weight {0}")]
    NegativeWeight(f64),

    #[error("Box-Cox requires positive responses, found {0}")]
    NonPositiveResponse(f64),

    #[error("cannot subtract an accumulator with n={right} from one with n={left}")]
    NegativeCount { left: u64, right: u64 },

    #[error("power-parameter grids differ")]
    GridMismatch,

    #[error("accumulator holds no observations")]
    EmptyAccumulator,

    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("ridge parameter must be non-negative, got {0}")]
    NegativeLambda(f64),

    #[error("grid is empty")]
    EmptyGrid,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("inverse Box-Cox transform undefined: c={c}, prediction={value}")]
    InverseTransformDomain { c: f64, value: f64 },

    #[error("empty input")]
    EmptyInput,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a finite number")]
    Parse { row: u64, column: String, value: String },

    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow { row: u64, expected: usize, found: usize },

    #[error("malformed file: {0}")]
    Malformed(String),

    #[error("unsupported schema_version {found} (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad arguments, grids, or incompatible artifacts.
    Config,
    /// Unreadable or invalid input data.
    Data,
    /// Numerical failure with no fallback.
    Numeric,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            DimensionMismatch { .. } | GridMismatch | NegativeLambda(_) | EmptyGrid
            | InvalidGrid(_) | Schema(_) | VersionMismatch { .. } | NegativeCount { .. } => {
                ErrorCategory::Config
            }
            NotSymmetric { .. } | NotPositiveDefinite { .. } | EigenNoConvergence { .. }
            | NonPositiveVariance(_) | InverseTransformDomain { .. } | NonFinite(_) => {
                ErrorCategory::Numeric
            }
            NegativeWeight(_) | NonPositiveResponse(_) | EmptyAccumulator | EmptyInput
            | MissingColumn(_) | Parse { .. } | RaggedRow { .. } | Malformed(_) | Io(_)
            | Csv(_) | Json(_) => ErrorCategory::Data,
        }
    }
}
