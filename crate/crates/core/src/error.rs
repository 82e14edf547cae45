//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("band mismatch: expected {expected}, got {got}")]
    BandMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("malformed raster {path}: {reason}")]
    MalformedRaster { path: PathBuf, reason: String },

    #[error("malformed manifest {path}: {reason}")]
    MalformedManifest { path: PathBuf, reason: String },

    #[error("camera response curve does not cover requested band centers (nm): {0:?}")]
    UnsupportedWavelengths(Vec<f32>),

    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),

    #[error("non-finite loss encountered ({term} at epoch {epoch}, iteration {iteration})")]
    NanLoss {
        term: String,
        epoch: usize,
        iteration: usize,
    },

    #[error("no test entries in manifest")]
    EmptyTestSet,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
