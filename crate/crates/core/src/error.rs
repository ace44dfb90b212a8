use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid volume: {0}")]
    InvalidVolume(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no PNG or TIFF slices found in {}", .0.display())]
    EmptyStack(PathBuf),

    #[error("{}: slice is {found_w}x{found_h}, expected {expected_w}x{expected_h}", file.display())]
    SliceDimensionMismatch {
        file: PathBuf,
        expected_w: u32,
        expected_h: u32,
        found_w: u32,
        found_h: u32,
    },

    #[error("{}: unsupported pixel format {format} (expected 8-bit grayscale or 8-bit RGBA)", file.display())]
    UnsupportedPixelFormat { file: PathBuf, format: String },

    #[error("{}: {source}", file.display())]
    Image {
        file: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("malformed trajectory frame at line {line}: {message}")]
    MalformedFrame { line: usize, message: String },

    #[error("non-increasing tick at line {line}")]
    NonIncreasingTick { line: usize },

    #[error("invalid STL file {}: {message}", path.display())]
    InvalidStl { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
