use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("pbm: {message} at byte {offset}")]
    Pbm { offset: usize, message: String },

    #[error("image {index} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DimensionMismatch {
        index: usize,
        want_w: usize,
        want_h: usize,
        got_w: usize,
        got_h: usize,
    },

    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },

    #[error("rect {top}..={bottom} x {left}..={right} outside {width}x{height} image")]
    RectOutOfBounds {
        top: usize,
        bottom: usize,
        left: usize,
        right: usize,
        width: usize,
        height: usize,
    },

    #[error("unsupported share count {0}; admissible n is 2 or 3t with t >= 3 (9, 12, 15, ...)")]
    UnsupportedShareCount(usize),

    #[error("latin square order {0} is below 3")]
    OrderTooSmall(usize),

    #[error("{0}")]
    InvalidArgument(String),

    #[error("feature length mismatch: {0} vs {1}")]
    FeatureLength(usize, usize),

    #[error("model has no samples")]
    EmptyModel,

    #[error("model file line {line}: {message}")]
    ModelFormat { line: usize, message: String },

    #[error("group record line {line}: {message}")]
    RecordFormat { line: usize, message: String },

    #[error("server replied {0}")]
    Remote(String),

    #[error("protocol: {0}")]
    Protocol(String),

    #[error("corpus: {0}")]
    Corpus(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn pbm(offset: usize, message: impl Into<String>) -> Self {
        Error::Pbm {
            offset,
            message: message.into(),
        }
    }
}
