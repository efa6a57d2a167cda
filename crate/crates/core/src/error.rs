use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("image must be at least 8x8 pixels, got {width}x{height}")]
    ImageTooSmall { width: usize, height: usize },
    #[error("pixel buffer holds {actual} values but {width}x{height} needs {expected}", expected = width * height)]
    BufferSize { width: usize, height: usize, actual: usize },
    #[error("kernel dimensions must be odd, got {width}x{height}")]
    EvenKernel { width: usize, height: usize },
    #[error("gaussian sigma must be positive and finite, got {0}")]
    BadSigma(f64),
    #[error("histogram is empty")]
    EmptyHistogram,
    #[error("image dimensions differ: {a:?} vs {b:?}")]
    DimensionMismatch { a: (usize, usize), b: (usize, usize) },
    #[error("pixel ({x}, {y}) is closer than {margin} px to the border of a {width}x{height} image")]
    OutOfBounds { x: usize, y: usize, margin: usize, width: usize, height: usize },
    #[error("descriptor patch around ({x}, {y}) leaves the image")]
    PatchOutOfBounds { x: usize, y: usize },
    #[error("keypoint ({x}, {y}) lies outside the quad-tree bounds")]
    KeypointOutOfBounds { x: f64, y: f64 },
    #[error("cannot match against an empty descriptor set")]
    EmptySet,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("directory {0} does not exist")]
    MissingDirectory(PathBuf),
    #[error("frame index {0} not found")]
    MissingIndex(PathBuf),
    #[error("{path}:{line}: expected `timestamp,filename`, got {content:?}")]
    MalformedIndex { path: PathBuf, line: usize, content: String },
    #[error("{path}:{line}: timestamp {timestamp} does not increase")]
    NonMonotonicTimestamps { path: PathBuf, line: usize, timestamp: u64 },
    #[error("cannot read image {path}: {reason}")]
    UnreadableImage { path: PathBuf, reason: String },
    #[error("cannot write {path}: {reason}")]
    Write { path: PathBuf, reason: String },
    #[error("benchmark needs at least {needed} frames, got {got}")]
    TooFewFrames { needed: usize, got: usize },
    #[error("frame {frame}: {source}")]
    Frame {
        frame: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attach the frame that produced this error.
    pub fn in_frame(self, frame: impl Into<String>) -> Self {
        Error::Frame { frame: frame.into(), source: Box::new(self) }
    }

    /// True for failures caused by the filesystem rather than bad input values.
    pub fn is_io(&self) -> bool {
        match self {
            Error::MissingDirectory(_)
            | Error::MissingIndex(_)
            | Error::MalformedIndex { .. }
            | Error::NonMonotonicTimestamps { .. }
            | Error::UnreadableImage { .. }
            | Error::Write { .. }
            | Error::Io(_) => true,
            Error::Frame { source, .. } => source.is_io(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
