use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}:{line}: malformed record: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("inconsistent dimension at line {line}: expected {expected}, found {found}")]
    InconsistentDimension {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("duplicate record id `{0}`")]
    DuplicateId(String),

    #[error("{0}: file contains no records")]
    EmptyFile(PathBuf),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid bounding box [{x1}, {y1}, {x2}, {y2}]: requires x2 > x1 and y2 > y1")]
    InvalidBox { x1: f64, y1: f64, x2: f64, y2: f64 },

    #[error("score {0} outside [0, 1]")]
    InvalidScore(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unknown category `{0}`")]
    UnknownCategory(String),

    #[error("category `{0}` has no records")]
    EmptyCategory(String),

    #[error("level {level} out of range 1..={levels}")]
    LevelOutOfRange { level: usize, levels: usize },

    #[error("similarity matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("NMS input mixes image ids `{0}` and `{1}`")]
    MixedImages(String, String),

    #[error("training diverged in {phase} phase at epoch {epoch}: loss = {loss}")]
    Diverged {
        phase: &'static str,
        epoch: usize,
        loss: f64,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(message: impl Into<String>) -> Self {
        Error::InvalidParameter(message.into())
    }

    /// Wraps an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// True when the failure is caused by the caller's inputs (files, flags,
    /// config values) rather than by a computation stage.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_input_error(),
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::InconsistentDimension { .. }
            | Error::DuplicateId(_)
            | Error::EmptyFile(_)
            | Error::InvalidBox { .. }
            | Error::InvalidScore(_)
            | Error::InvalidParameter(_)
            | Error::Json(_)
            | Error::Config(_) => true,
            _ => false,
        }
    }
}
