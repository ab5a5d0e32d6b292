use thiserror::Error;

/// Errors raised by the library.
///
/// The CLI maps `Domain`, `Dimension` and `Config` to exit code 1 and
/// `Numerical` / `Optimization` to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A formula was evaluated outside its stated validity region.
    #[error("validity error: {0}")]
    Validity(String),

    /// Root bracketing or another numerical procedure failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Threshold search found no feasible point.
    #[error("optimization failure: {0}")]
    Optimization(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical procedure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::Optimization(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
