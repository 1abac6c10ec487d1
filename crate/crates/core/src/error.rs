use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong inside blurforge.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("trajectory does not fit a {given}x{given} canvas; minimum side is {required}")]
    CanvasTooSmall { required: usize, given: usize },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("malformed kernel file: {0}")]
    MalformedKernelFile(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },

    #[error("image is {width}x{height}; at least {min}x{min} is required")]
    ImageTooSmall { width: usize, height: usize, min: usize },

    #[error("sequence has {available} frames, {required} are required")]
    InsufficientFrames { required: usize, available: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("no decodable input images in {0}")]
    EmptyInput(PathBuf),

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("cannot write to {path}: {source}")]
    UnwritableOutput {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dims(left: impl ToString, right: impl ToString) -> Self {
        Error::DimensionMismatch {
            left: left.to_string(),
            right: right.to_string(),
        }
    }
}
