use std::path::PathBuf;

use thiserror::Error;

/// Coarse error category, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
    Degenerate,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Validation => 1,
            ErrorKind::Io => 2,
            ErrorKind::Degenerate => 3,
        }
    }
}

/// Failures while decoding a binary probe trace. Each variant has a stable code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("bad magic {found:?}, expected \"HGP1\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported trace version {0}")]
    BadVersion(u16),
    #[error("unsupported dtype code {0}")]
    BadDtype(u8),
    #[error("unknown mode code {0}")]
    BadMode(u8),
    #[error("truncated trace: need {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("trailing bytes: expected {expected} bytes, found {found}")]
    TrailingBytes { expected: usize, found: usize },
    #[error("label {label} at example {index} is out of range for {classes} classes")]
    LabelOutOfRange { index: usize, label: u32, classes: u32 },
}

impl TraceError {
    pub fn code(&self) -> u8 {
        match self {
            TraceError::BadMagic { .. } => 10,
            TraceError::BadVersion(_) => 11,
            TraceError::BadDtype(_) => 12,
            TraceError::BadMode(_) => 13,
            TraceError::Truncated { .. } => 14,
            TraceError::TrailingBytes { .. } => 15,
            TraceError::LabelOutOfRange { .. } => 16,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {what} at column {column}")]
    NonFinite { what: &'static str, column: usize },
    #[error("label {label} at example {index} is out of range for {classes} classes")]
    LabelOutOfRange { index: usize, label: usize, classes: usize },
    #[error("operation requires classification mode")]
    UnsupportedMode,
    #[error("division guard: {0}")]
    DivisionGuard(String),
    #[error("configuration conflict: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("degenerate sample: {0}")]
    Degenerate(String),
    #[error("collinear design matrix: {0}")]
    Collinear(String),
    #[error("unstable bootstrap: {degenerate} of {total} resamples were degenerate")]
    UnstableCi { degenerate: usize, total: usize },
    #[error("training diverged at step {step}: {detail}")]
    Diverged { step: u64, detail: String },
    #[error("{path}: {source}")]
    Trace { path: PathBuf, source: TraceError },
    #[error("{path}: row {row}: {detail}")]
    Series { path: PathBuf, row: usize, detail: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::Degenerate(_) | Error::Collinear(_) | Error::UnstableCi { .. } => {
                ErrorKind::Degenerate
            }
            _ => ErrorKind::Validation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
