use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("video {video_id}: inconsistent class count (expected {expected}, found {found})")]
    InconsistentClassCount {
        video_id: String,
        expected: usize,
        found: usize,
    },

    #[error("video {video_id}: {stream} frames are not contiguous from 1 (expected frame {expected}, found {found})")]
    NonContiguousFrames {
        video_id: String,
        stream: String,
        expected: u32,
        found: u32,
    },

    #[error("video {video_id}: motion stream has {motion} frames but appearance stream has {appearance}")]
    StreamLengthMismatch {
        video_id: String,
        appearance: usize,
        motion: usize,
    },

    #[error("invalid box [{x1}, {y1}, {x2}, {y2}]")]
    InvalidBox { x1: f64, y1: f64, x2: f64, y2: f64 },

    #[error("frame {frame} has no proposals")]
    EmptyFrame { frame: u32 },

    #[error("{0}")]
    Validation(String),

    #[error("inconsistent vocabularies: {0}")]
    Vocabulary(String),

    #[error("{paths} candidate paths exceed the enumeration limit of {limit}")]
    PathBlowup { paths: u128, limit: usize },
}

impl Error {
    pub(crate) fn validation(message: impl Into<String>) -> Self {
        Error::Validation(message.into())
    }

    /// True for failures of the underlying reader or writer rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}
