use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("point {index} has a non-finite coordinate")]
    NonFinitePoint { index: usize },

    #[error("requested {requested} neighbors but the cloud has only {available} points")]
    TooFewPoints { requested: usize, available: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not a proper rotation ({0})")]
    NotARotation(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(
        "too few keypoints (source {source_count}, target {target_count}, need at least 3); \
         use full-connection registration instead"
    )]
    TooFewKeypoints { source_count: usize, target_count: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: unrecognized point cloud format ({reason})", path.display())]
    UnknownFormat { path: PathBuf, reason: String },

    #[error("{}: malformed header at line {line}: {message}", path.display())]
    MalformedHeader { path: PathBuf, line: usize, message: String },

    #[error("{}: malformed data at line {line}: {message}", path.display())]
    MalformedBody { path: PathBuf, line: usize, message: String },

    #[error("{}: truncated body at byte offset {offset}: {message}", path.display())]
    Truncated { path: PathBuf, offset: usize, message: String },

    #[error("{}: header declares {declared} vertices but {found} were found (line {line})", path.display())]
    CountMismatch { path: PathBuf, declared: usize, found: usize, line: usize },

    #[error("dataset '{name}' not found at {}; {hint}", path.display())]
    DatasetMissing { name: String, path: PathBuf, hint: String },
}

/// Coarse failure class, used for process exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Io,
    Degenerate,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidArgument(_)
            | Error::TooFewPoints { .. }
            | Error::NotARotation(_)
            | Error::NonFinitePoint { .. } => ErrorClass::Usage,
            Error::Io { .. }
            | Error::UnknownFormat { .. }
            | Error::MalformedHeader { .. }
            | Error::MalformedBody { .. }
            | Error::Truncated { .. }
            | Error::CountMismatch { .. }
            | Error::DatasetMissing { .. } => ErrorClass::Io,
            Error::EmptyCloud | Error::Degenerate(_) | Error::TooFewKeypoints { .. } => ErrorClass::Degenerate,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
