use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box ({x_min}, {y_min}, {x_max}, {y_max}) score {score}: {reason}")]
    InvalidBox {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
        score: f64,
        reason: &'static str,
    },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("unsupported channel count {0}, expected 1 or 3")]
    UnsupportedChannels(usize),

    #[error("kernel size {0} must be odd and positive")]
    EvenKernel(usize),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("mask covers the entire image; nothing to propagate from")]
    FullMask,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("no detection sets to fuse")]
    EmptyInput,

    #[error("mismatched image ids: {0:?} vs {1:?}")]
    MismatchedImageIds(String, String),

    #[error("no domains to aggregate")]
    NoDomains,

    #[error("domain {0:?} has no images")]
    EmptyDomain(String),

    #[error("could not place {what} after {attempts} attempts")]
    Unplaceable { what: &'static str, attempts: usize },

    #[error("detector failed to start: {0}")]
    DetectorSpawn(#[source] std::io::Error),

    #[error("detector exited with code {code:?}: {stderr}")]
    DetectorExit { code: Option<i32>, stderr: String },

    #[error("detector timed out after {0:.1} s")]
    DetectorTimeout(f64),

    #[error("detector produced malformed output: {0}")]
    DetectorOutput(String),

    #[error("malformed json in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("image codec error for {path}: {source}")]
    Codec {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
