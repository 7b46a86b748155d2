use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate PID {0}")]
    DuplicatePid(String),
    #[error("unknown PID {0}")]
    UnknownPid(String),
    #[error("self-loop on PID {0}")]
    SelfLoop(String),
    #[error("missing column {0}")]
    MissingColumn(String),
    #[error("unknown column kind {kind:?} for column {column}")]
    UnknownKind { column: String, kind: String },
    #[error("column {column}: value {value:?} is not valid for kind {kind}")]
    KindMismatch {
        column: String,
        value: String,
        kind: String,
    },
    #[error("invalid confidence label {0:?}")]
    InvalidConfidence(String),
    #[error("no usable features after preprocessing")]
    NoUsableFeatures,
    #[error("too few edges: need at least {needed}, got {got}")]
    TooFewEdges { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("graph too dense: could not sample {wanted} non-edges")]
    TooDense { wanted: usize },
    #[error("no valid decoy after {attempts} attempts")]
    NoDecoy { attempts: usize },
    #[error("validation set must contain both classes")]
    OneClass,
    #[error("AUC undefined: labels contain a single class")]
    AucUndefined,
    #[error("invalid case: {0}")]
    InvalidCase(String),
    #[error("feature hash mismatch: checkpoint trained on {expected}, features hash to {got}")]
    HashMismatch { expected: String, got: String },
    #[error("checkpoint format: {0}")]
    Checkpoint(String),
    #[error("leakage: target column {0} found among predictors")]
    Leakage(String),
    #[error("no at-risk nodes in training set")]
    NoAtRisk,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-parsable category, used for CLI exit lines.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Csv { .. } | Error::Json(_) => "parse",
            Error::DuplicatePid(_)
            | Error::UnknownPid(_)
            | Error::SelfLoop(_)
            | Error::MissingColumn(_)
            | Error::UnknownKind { .. }
            | Error::KindMismatch { .. }
            | Error::InvalidConfidence(_) => "data",
            Error::HashMismatch { .. } | Error::Checkpoint(_) => "checkpoint",
            Error::Diverged { .. } => "training",
            Error::Leakage(_) => "leakage",
            _ => "invalid",
        }
    }
}
