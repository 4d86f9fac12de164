use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// Variants are grouped so callers (the CLI in particular) can classify a
/// failure as an I/O problem, a data/format problem or a bad argument.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt image data: {0}")]
    CorruptImage(String),

    #[error("channel mismatch: expected {expected}, got {actual}")]
    ChannelMismatch { expected: usize, actual: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },
    #[error("truncated file: {0}")]
    Truncated(String),
    #[error("inconsistent contents: {0}")]
    Inconsistent(String),

    #[error("backward pass does not match the cached forward pass: {0}")]
    StaleCache(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty corpus")]
    EmptyCorpus,
}

impl Error {
    /// True for errors caused by the filesystem rather than by file contents.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::NotFound(_) | Error::Io(_))
    }

    /// True for errors caused by malformed or mismatched data.
    pub fn is_data(&self) -> bool {
        matches!(
            self,
            Error::UnsupportedFormat(_)
                | Error::CorruptImage(_)
                | Error::BadMagic { .. }
                | Error::VersionMismatch { .. }
                | Error::Truncated(_)
                | Error::Inconsistent(_)
                | Error::ChannelMismatch { .. }
                | Error::DimensionMismatch(_)
                | Error::ShapeMismatch(_)
                | Error::EmptyCorpus
                | Error::EmptyBatch
                | Error::StaleCache(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
