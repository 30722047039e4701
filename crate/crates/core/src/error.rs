use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Angular measure with no mass left.
    #[error("degenerate measure: {0}")]
    DegenerateMeasure(String),

    #[error("model is not causal: {0}")]
    NotCausal(String),

    #[error("model is not invertible: {0}")]
    NotInvertible(String),

    /// A polynomial root lies on the unit circle: no stationary solution.
    #[error("no stationary solution: {0}")]
    UnitRoot(String),

    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("unsupported model family: {0}")]
    Unsupported(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
