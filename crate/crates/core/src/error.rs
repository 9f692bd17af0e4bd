use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Error, Debug)]
pub enum Error {
    /// An argument lies outside the domain where the model is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller broke a documented precondition (shape, length, range).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("no sky pixels in mask")]
    NoSkyPixels,

    #[error("degenerate model output: {0}")]
    Degenerate(String),

    #[error("invalid data asset: {0}")]
    Asset(String),

    #[error("invalid file format in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] ::image::ImageError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
