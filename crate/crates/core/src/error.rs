use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulation, tracking, and evaluation stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no appearance latent for ground-truth object {0}")]
    MissingLatent(u32),

    #[error("zero-length vector has no direction")]
    ZeroVector,

    #[error("metric undefined: {0}")]
    Undefined(String),

    #[error("degenerate samples: {0}")]
    DegenerateSamples(String),

    #[error("sequence of length {length} exceeds viewpoint pool of {pool}")]
    SequenceTooLong { length: usize, pool: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid_config(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}
