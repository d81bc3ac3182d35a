use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown sketch kind `{0}` (expected gaussian, srht, sjlt or identity)")]
    UnknownSketchKind(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("label {value} at sample {index} is outside {{-1, +1}}")]
    LabelDomain { index: usize, value: f64 },

    #[error("dense materialization of a {rows}x{cols} sketch exceeds the size guard")]
    SizeGuard { rows: usize, cols: usize },

    #[error("linear solve failed after {attempts} jitter escalations")]
    SolveFailed { attempts: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("Newton did not converge in {iterations} iterations (gradient norm {grad_norm:e})")]
    NotConverged { iterations: usize, grad_norm: f64 },

    #[error("line search on worker {worker_id} exceeded {backtracks} backtracks (not a descent direction)")]
    LineSearch { worker_id: usize, backtracks: usize },

    #[error("cannot split {samples} samples across {workers} workers")]
    TooManyWorkers { workers: usize, samples: usize },

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerical pipeline (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SolveFailed { .. }
                | Error::NonFinite(_)
                | Error::LineSearch { .. }
                | Error::NotConverged { .. }
        )
    }
}

/// A LIBSVM parse failure located at a 1-based line number.
/// `line == 0` is used for whole-file errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    EmptyFile,
    NonNumeric(String),
    MissingColon(String),
    ZeroIndex,
    NonAscendingIndex { previous: usize, found: usize },
    IndexOutOfRange { index: usize, dim: usize },
    NonFinite(String),
    Multiclass(Vec<String>),
    Utf8,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::EmptyFile => write!(f, "empty file"),
            ParseErrorKind::NonNumeric(tok) => write!(f, "non-numeric token `{tok}`"),
            ParseErrorKind::MissingColon(tok) => write!(f, "expected `index:value`, found `{tok}`"),
            ParseErrorKind::ZeroIndex => write!(f, "feature indices are 1-based, found 0"),
            ParseErrorKind::NonAscendingIndex { previous, found } => {
                write!(f, "non-ascending index {found} after {previous}")
            }
            ParseErrorKind::IndexOutOfRange { index, dim } => {
                write!(f, "index {index} exceeds configured feature dimension {dim}")
            }
            ParseErrorKind::NonFinite(tok) => write!(f, "non-finite value `{tok}`"),
            ParseErrorKind::Multiclass(labels) => {
                write!(f, "labels are not binary: {}", labels.join(", "))
            }
            ParseErrorKind::Utf8 => write!(f, "invalid UTF-8"),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.kind)
        } else {
            write!(f, "line {}: {}", self.line, self.kind)
        }
    }
}

impl std::error::Error for ParseError {}
