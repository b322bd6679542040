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

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("line {line}, column `{column}`: cannot parse `{value}`: {reason}")]
    Parse {
        line: usize,
        column: String,
        value: String,
        reason: String,
    },

    #[error("column `{column}`: value `{value}` is not in the vocabulary")]
    UnknownCategory { column: String, value: String },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("no samples")]
    NoSamples,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("sample {0} has no annotations")]
    UnannotatedRow(usize),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("labels contain a single class")]
    SingleClass,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}

/// Attaches a pipeline stage name to errors.
pub trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| match e {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        })
    }
}
