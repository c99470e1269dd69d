use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("empty column: {0}")]
    EmptyColumn(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown feature: {0}")]
    UnknownFeature(String),

    #[error("unknown entity: {0}")]
    UnknownEntity(String),

    #[error("unknown relation: {0}")]
    UnknownRelation(String),

    #[error("not a feature entity: {0}")]
    NotFeatureEntity(String),

    #[error("no features matched")]
    NoFeaturesMatched,

    #[error("registry version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: String, found: String },

    #[error("malformed file: {0}")]
    Malformed(String),

    /// Carries the parameters from before the failing update, when available.
    #[error("training diverged at step {step}: {detail}")]
    Diverged {
        step: usize,
        detail: String,
        checkpoint: Option<Box<crate::embed::EmbeddingModel>>,
    },
}
