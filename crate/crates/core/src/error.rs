use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({x}, {y}) lies outside the unit square")]
    OutOfDomain { x: f64, y: f64 },

    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },

    #[error("invalid score field: {0}")]
    InvalidField(String),

    #[error("invalid run-length encoding: {0}")]
    InvalidRle(String),

    #[error("malformed compressed RLE string at byte {offset}: {reason}")]
    MalformedRleString { offset: usize, reason: &'static str },

    #[error("requested {requested} points but only {available} are available")]
    TooManyPoints { requested: usize, available: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("point predictor failed: {0}")]
    Predictor(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("detection {index} has no mask")]
    MissingMask { index: usize },

    #[error("duplicate detection id {0}")]
    DuplicateDetectionId(u64),

    #[error("degenerate polygon: {0} vertices (need at least 3)")]
    DegeneratePolygon(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: field `{field}`: {message} (line {line}, column {column})")]
    Schema {
        path: PathBuf,
        field: String,
        message: String,
        line: usize,
        column: usize,
    },

    #[error("{path}: {what} {id} is referenced but not defined")]
    UnresolvedId {
        path: PathBuf,
        what: &'static str,
        id: u64,
    },

    #[error("{0}")]
    Serialize(String),
}

impl Error {
    /// True for errors caused by the caller's inputs rather than by the toolkit.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Serialize(_) | Error::Predictor(_))
    }
}
