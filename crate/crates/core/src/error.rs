use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed PLY: {0}")]
    Ply(String),

    #[error("unsupported PLY format: {0}")]
    UnsupportedPly(String),

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("degenerate point cloud: all points are identical")]
    DegenerateCloud,

    #[error("point cloud is not normalized: coordinate {value} lies outside [0, 1]")]
    NotNormalized { value: f64 },

    #[error("point set cannot be triangulated: {0}")]
    NotTriangulable(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },

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

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
