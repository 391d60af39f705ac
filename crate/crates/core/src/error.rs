use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("massless negative power needs a zero-mean field (mean {mean:e})")]
    ZeroModeViolation { mean: f64 },

    #[error("time {t} outside the wraparound horizon {horizon}")]
    HorizonExceeded { t: f64, horizon: f64 },

    #[error("radius {radius} is not resolvable at spacing {spacing}")]
    Unresolvable { radius: f64, spacing: f64 },

    #[error("support would wrap around the torus: {0}")]
    Wraparound(String),

    #[error("subspace containment violated (residual {residual:e})")]
    Containment { residual: f64 },

    #[error("empty mask")]
    EmptyMask,

    #[error("resource budget exceeded: need {required} bytes, budget {budget}")]
    Budget { required: usize, budget: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("null vector has no inverse")]
    NullVector,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("input family is not nested: {0}")]
    NotNested(String),

    #[error("operation ambient mismatch")]
    AmbientMismatch,
}
