use crate::laws::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed or inconsistent configuration. `path` is a JSON-pointer-like
    /// location when the error comes from a config document.
    #[error("configuration error at {path}: {message}")]
    Config { path: String, message: String },

    #[error("assumption validation failed: {}", .0.failure_summary())]
    Validation(Box<ValidationReport>),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {final_residual:.3e})")]
    Solver {
        iterations: usize,
        final_residual: f64,
        residual_history: Vec<f64>,
    },

    #[error("nonlinear iteration failed in step {step}: {message}")]
    StepFailure {
        step: usize,
        message: String,
        residual_history: Vec<f64>,
    },

    #[error("kirchhoff map: value {value:e} outside tabulated range [{lo:e}, {hi:e}]")]
    KirchhoffRange { value: f64, lo: f64, hi: f64 },

    #[error("contrast {contrast} outside table range [{lo}, {hi}]")]
    ContrastRange { contrast: f64, lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for errors caused by bad input rather than by a failing solve.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::Validation(_) | Error::ContrastRange { .. }
        )
    }
}
