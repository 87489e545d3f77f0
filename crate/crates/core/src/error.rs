use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    UnsupportedChannels(usize),

    #[error("zero-sized dimension in {0}")]
    ZeroSize(&'static str),

    #[error("data length {actual} does not match shape (expected {expected})")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("value {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },

    #[error("bad magic bytes {0:02x?}, expected GMTN")]
    BadMagic([u8; 4]),

    #[error("unsupported tensor file version {0}")]
    UnsupportedVersion(u8),

    #[error("unsupported tensor dtype {0}")]
    UnsupportedDtype(u8),

    #[error("truncated tensor file: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("{extra} trailing bytes after tensor payload")]
    TrailingData { extra: usize },

    #[error("expected a rank-{expected} tensor, found rank {actual}")]
    WrongRank { expected: usize, actual: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("negative saliency value {value} at index {index}")]
    NegativeSaliency { index: usize, value: f64 },

    #[error("batch size {m} is below the minimum of {min}")]
    BatchTooSmall { m: usize, min: usize },

    #[error("batch size {m} exceeds the exhaustive-search cap of {max}")]
    BatchTooLarge { m: usize, max: usize },

    #[error("invalid pairing: {0}")]
    InvalidPairing(String),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("insufficient data: need {needed} items, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("batch item {index}: {source}")]
    BatchItem {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("image decode: {0}")]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_index(self, index: usize) -> Error {
        Error::BatchItem {
            index,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_file(self, path: impl Into<PathBuf>) -> Error {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }
}
