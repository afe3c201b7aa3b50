use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside the admissible range (alpha, p, m, level, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A Rademacher quadruple failed its orthonormality check.
    #[error("Gram condition violated: residual {residual:e} exceeds {tolerance:e}")]
    Gram { residual: f64, tolerance: f64 },

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("scale cap exceeded: {0}")]
    ScaleCap(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
