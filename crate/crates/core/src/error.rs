//! Error types shared by every stage of the audit.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: duplicate example id {id:?}")]
    DuplicateId {
        path: PathBuf,
        line: usize,
        id: String,
    },

    #[error("feature inputs are misaligned: {0}")]
    Misaligned(String),

    #[error("degenerate table: {0}")]
    DegenerateTable(String),

    #[error("ill-conditioned design: {0}")]
    IllConditioned(String),

    #[error("non-positive variance for feature {feature:?}: {variance}")]
    NonPositiveVariance { feature: String, variance: f64 },

    #[error("invalid numeric argument: {0}")]
    Domain(String),

    #[error("unknown output format {0:?} (expected markdown, tsv or json)")]
    UnknownFormat(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid synthetic corpus spec: {0}")]
    Synth(String),

    #[error("serialization failed: {0}")]
    Serialize(String),
}

/// Broad failure classes, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Numerical,
    Config,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::DuplicateId { .. }
            | Error::Misaligned(_)
            | Error::UnknownFormat(_)
            | Error::Serialize(_) => ErrorClass::Input,
            Error::DegenerateTable(_)
            | Error::IllConditioned(_)
            | Error::NonPositiveVariance { .. }
            | Error::Domain(_) => ErrorClass::Numerical,
            Error::Config(_) | Error::Synth(_) => ErrorClass::Config,
        }
    }

    /// 2 for input/format errors, 3 for numerical failures, 4 for configuration errors.
    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Input => 2,
            ErrorClass::Numerical => 3,
            ErrorClass::Config => 4,
        }
    }
}
