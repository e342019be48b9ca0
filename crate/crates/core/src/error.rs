//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape spec: {0}")]
    InvalidSpec(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("scene generation failed: {0}")]
    Generation(String),

    #[error("occluder search failed: {0}")]
    OccluderSearch(String),

    #[error("malformed RLE: {0}")]
    MalformedRle(String),

    #[error("dataset load error: {0}")]
    DatasetLoad(String),

    #[error("empty mask: {0}")]
    EmptyMask(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate box: {0}")]
    DegenerateBox(String),

    #[error("class id out of range: {0}")]
    ClassId(String),

    #[error("model is uninitialized: {0}")]
    Uninitialized(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("training failure: {0}")]
    Training(String),

    #[error("training diverged: non-finite {0}")]
    Divergence(String),

    #[error("missing dependency: {0}")]
    Dependency(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
