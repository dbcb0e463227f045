use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("{path}: unsupported bit depth ({detail})")]
    UnsupportedBitDepth { path: PathBuf, detail: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid pixel value {value} at ({x}, {y}) channel {channel}")]
    InvalidPixel {
        x: usize,
        y: usize,
        channel: usize,
        value: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("image too small for filter support ({width}x{height}, half-width {half_width})")]
    ImageTooSmall {
        width: usize,
        height: usize,
        half_width: usize,
    },

    #[error("no candidate gray pixels")]
    NoCandidateGrayPixels,

    #[error("fewer gray pixels than clusters ({pixels} < {clusters})")]
    TooFewGrayPixels { pixels: usize, clusters: usize },

    #[error("zero-length chroma vector")]
    ZeroVector,

    #[error("no valid pixels in the evaluated region")]
    EmptyValidRegion,

    #[error("flash residual carries no signal")]
    NoFlashSignal,

    #[error("{path}: manifest error: {msg}")]
    Manifest { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
