use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: invalid manifest: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("{path}: cannot decode image: {message}")]
    Image { path: PathBuf, message: String },

    #[error("image {path} is {found_w}x{found_h}, manifest declares {want_w}x{want_h}")]
    GeometryMismatch { path: PathBuf, found_w: usize, found_h: usize, want_w: usize, want_h: usize },

    #[error("duplicate class_id {0} in gallery manifest")]
    DuplicateClass(i64),

    #[error("dictionary format: {0}")]
    Format(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("learned transform W is numerically singular at row {row} (condition number {condition:.3e})")]
    SingularTransform { row: usize, condition: f64 },

    #[error("support set is empty; recognition is undefined, re-detect the face")]
    EmptySupport,

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
