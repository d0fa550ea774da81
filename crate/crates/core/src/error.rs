use std::path::PathBuf;

use crate::corpus::LabelClass;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("input is empty")]
    EmptyInput,

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("row {row}: {message}")]
    Schema { row: usize, message: String },

    #[error("row {row}: duplicate example id `{id}`")]
    DuplicateId { row: usize, id: String },

    #[error("row {row}: text is empty after normalization")]
    EmptyText { row: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("{} prediction(s) reference unknown example ids: {}", .ids.len(), .ids.join(", "))]
    UnknownExampleIds { ids: Vec<String> },

    #[error("line {line}: duplicate prediction for model `{model_id}`, example `{example_id}`")]
    DuplicatePrediction {
        line: usize,
        model_id: String,
        example_id: String,
    },

    #[error("line {line}: label {label} does not match logits argmax {argmax}")]
    InconsistentPrediction {
        line: usize,
        label: LabelClass,
        argmax: LabelClass,
    },

    #[error("prediction matrix is incomplete: no prediction from model `{model_id}` for example `{example_id}`")]
    Incomplete { model_id: String, example_id: String },

    #[error("split `{0}` has no gold labels")]
    MissingGold(String),

    #[error("malformed model artifact: {0}")]
    Artifact(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
