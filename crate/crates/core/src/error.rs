use std::path::PathBuf;

use thiserror::Error;

use crate::griddata::CalendarDate;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A training or scoring access that reaches past the observability cutoff.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeakageViolation {
    pub target: CalendarDate,
    pub cutoff: CalendarDate,
    pub what: String,
    pub accessed: CalendarDate,
}

impl std::fmt::Display for LeakageViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} dated {} is not usable for target {} (cutoff {})",
            self.what, self.accessed, self.target, self.cutoff
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("misaligned inputs: {0}")]
    Misaligned(String),

    #[error("schema error in {path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("dimension mismatch in {path}: {message}")]
    DimensionMismatch { path: PathBuf, message: String },

    #[error("truncated file {path}: expected {expected} bytes, found {found}")]
    Truncated { path: PathBuf, expected: u64, found: u64 },

    #[error("unknown dtype `{dtype}` in {path}")]
    UnknownDtype { path: PathBuf, dtype: String },

    #[error("evaluation mask selects no cells")]
    EmptyMask,

    #[error("no data: {0}")]
    NoData(String),

    #[error("observability leakage: {0}")]
    Leakage(LeakageViolation),

    #[error("network: {0}")]
    Network(String),

    #[error("config: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name, used by the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Misaligned(_) => "misaligned",
            Error::Schema { .. } => "schema",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Truncated { .. } => "truncated_file",
            Error::UnknownDtype { .. } => "unknown_dtype",
            Error::EmptyMask => "empty_mask",
            Error::NoData(_) => "no_data",
            Error::Leakage(_) => "leakage",
            Error::Network(_) => "network",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
