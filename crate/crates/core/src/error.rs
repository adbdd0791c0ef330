use std::path::PathBuf;

/// Every failure the engine can report.
///
/// The variants are coarse on purpose: the HTTP layer maps each one to a
/// single status code, and callers mostly care about which side is at fault.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller broke an operation's precondition (bad window, length
    /// mismatch, too few points...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Argument outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} {value} out of range [{low}, {high})")]
    Range {
        what: &'static str,
        value: String,
        low: String,
        high: String,
    },

    #[error("not found: {0}")]
    NotFound(String),

    /// Operation issued against a store in the wrong lifecycle state.
    #[error("invalid state: {0}")]
    State(String),

    /// User-facing query could not be parsed.
    #[error("malformed query: {0}")]
    Query(String),

    /// Query flags that cannot be combined.
    #[error("invalid combination: {0}")]
    InvalidCombination(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("corrupt segment {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    /// Exhaustive search refused because the space is too large.
    #[error("search space too large: {0}")]
    Refused(String),

    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn corrupt(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Corrupt {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
