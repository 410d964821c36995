use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} must be non-negative, got {value}")]
    Negative { what: String, value: f64 },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("unknown region `{0}`")]
    UnknownRegion(String),

    #[error("duplicate region `{0}`")]
    DuplicateRegion(String),

    /// Malformed or invalid input file content, located by line and (optionally) column.
    #[error("{}:{line}{}: {message}", path.display(), column.as_ref().map(|c| format!(" [{c}]")).unwrap_or_default())]
    Parse {
        path: PathBuf,
        line: u64,
        column: Option<String>,
        message: String,
    },

    #[error("irregular cadence: {0}")]
    Cadence(String),

    #[error("infeasible slot {slot}: demand {demand} exceeds capacity {capacity}")]
    InfeasibleSlot {
        slot: usize,
        demand: f64,
        capacity: f64,
    },

    #[error("allocation violates {constraint}: {detail}")]
    InfeasibleAllocation {
        constraint: &'static str,
        detail: String,
    },

    #[error("linear program: {0}")]
    Lp(String),

    #[error("undefined: {0}")]
    Undefined(&'static str),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(
        path: impl Into<PathBuf>,
        line: u64,
        column: Option<&str>,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            column: column.map(str::to_owned),
            message: message.into(),
        }
    }

    /// True for errors caused by an unsatisfiable scheduling problem or allocation.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            Error::InfeasibleSlot { .. } | Error::InfeasibleAllocation { .. }
        ) || matches!(self, Error::Lp(m) if m.contains("infeasible"))
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

/// Converts a `csv` error raised while reading `path` into a located parse error.
pub(crate) fn from_csv(path: &std::path::Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => Error::parse(path, line, None, format!("{kind:?}")),
    }
}
