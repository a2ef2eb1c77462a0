use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters or a configuration that cannot produce a usable problem.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numeric argument outside the domain of the requested map.
    #[error("domain error: {0}")]
    Domain(String),

    /// The input carries no usable geometric information.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A per-point estimator could not be evaluated.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// An iterative or direct solve did not reach its tolerance.
    #[error("solver failure after {iterations} iterations (relative residual {residual:.3e}): {context}")]
    Solver {
        iterations: usize,
        residual: f64,
        context: String,
    },

    /// Array lengths that should agree do not.
    #[error("dimension mismatch: expected {expected}, found {found} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// `true` for errors a caller should report as a validation problem
    /// (bad input or configuration) rather than a numerical failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Solver { .. } | Error::Io(_))
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            found,
        })
    }
}
