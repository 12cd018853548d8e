use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Io,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("t = {t} is outside the covered interval [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("box-constrained solver did not converge after {iterations} active-set changes (kkt residual {kkt_residual:e})")]
    Convergence { iterations: usize, kkt_residual: f64 },

    #[error("insufficient overlap: {0}")]
    InsufficientOverlap(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing file {}", path.display())]
    MissingFile { path: PathBuf },

    #[error("{}:{line}: {msg}", path.display())]
    Malformed {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("{}:{line}: timestamp {t} does not increase (previous {prev})", path.display())]
    NonMonotonic {
        path: PathBuf,
        line: u64,
        t: f64,
        prev: f64,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::MissingFile { .. }
            | Error::Malformed { .. }
            | Error::NonMonotonic { .. }
            | Error::Io { .. } => ErrorKind::Io,
            _ => ErrorKind::Numerical,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile { path }
        } else {
            Error::Io { path, source }
        }
    }
}
