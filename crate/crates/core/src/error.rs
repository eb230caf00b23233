use std::path::PathBuf;

/// Errors produced by the numerical kernels and the experiment driver.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("shift {shift} is singular for the operator (pivot {pivot:.3e})")]
    SingularShift { shift: num_complex::Complex64, pivot: f64 },

    #[error("iteration did not converge (max residual {max_residual:.3e})")]
    NoConvergence { max_residual: f64 },

    #[error("regularization {eps:.3e} is below the resolution floor {floor:.3e}")]
    Resolution { eps: f64, floor: f64 },

    #[error("tracking ambiguity at coupling {lambda:.3e}: {detail}")]
    TrackingAmbiguity { lambda: f64, detail: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("config line {line}: {reason}")]
    ConfigParse { line: usize, reason: String },

    #[error("{0}")]
    Precondition(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}
