use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum DpddError {
    /// A precondition on user-supplied data was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Point or vector dimensions do not line up.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Data are degenerate for the requested operation (zero variance, empty
    /// support, all-zero densities, rank collapse, ...).
    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// The eigensolver could not produce a usable decomposition.
    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    /// A configuration document failed validation. `pointer` is a JSON
    /// pointer to the offending field.
    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl DpddError {
    /// Process exit code for the CLI: 2 for validation problems the caller
    /// can fix in their invocation or config, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            DpddError::InvalidInput(_) | DpddError::Config { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn config(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        DpddError::Config {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, DpddError>;
