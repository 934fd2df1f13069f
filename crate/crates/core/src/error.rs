//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("header error in {path}: {reason}")]
    Header { path: PathBuf, reason: String },

    #[error("raw data size mismatch: expected {expected} bytes, file has {actual}")]
    SizeMismatch { expected: u64, actual: u64 },

    #[error("volume contains non-finite values")]
    NonFiniteData,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {point:?} outside volume bounds")]
    OutOfBounds { point: [f64; 3] },

    #[error("hessian is isotropic; tube axis undefined")]
    IsotropicHessian,

    #[error("covariance is ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("empty point set: {0}")]
    EmptyPointSet(String),
}
