use std::io;
use std::path::PathBuf;

/// Errors raised by the retrieval pipeline.
///
/// Variants fall into three families that the command-line tool maps onto
/// exit codes: configuration ([`Error::Config`]), data (parsing, missing keys,
/// shape mismatches) and numeric failures ([`Error::Divergence`]).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("I/O error: {0}")]
    Stream(#[from] io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate {kind} '{id}'")]
    Duplicate { kind: &'static str, id: String },

    #[error("unknown {kind} '{id}'")]
    Unknown { kind: &'static str, id: String },

    #[error("missing embedding for key '{0}'")]
    MissingKey(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimMismatch { what: String, expected: usize, actual: usize },

    #[error("invalid {field}: {message}")]
    Format { field: &'static str, message: String },

    #[error("{0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training diverged at step {step}: non-finite {what}")]
    Divergence { step: usize, what: &'static str },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }

    /// True for numeric failures (divergence), false for data and usage errors.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Divergence { .. })
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
