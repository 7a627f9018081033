use std::path::PathBuf;

use thiserror::Error;

use crate::annotations::AnnotationError;
use crate::compositor::DimensionMismatch;
use crate::raster::RasterError;
use crate::video::VideoError;

/// Pipeline failure, prefixed with the module that raised it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("annotations: {}: {source}", path.display())]
    Annotations {
        path: PathBuf,
        #[source]
        source: AnnotationError,
    },
    #[error("raster: {0}")]
    Raster(#[from] RasterError),
    #[error("compositor: {0}")]
    Compositor(#[from] DimensionMismatch),
    #[error(
        "pipeline: {what}: annotations describe a {}x{} image but the image is {}x{}",
        declared.0, declared.1, actual.0, actual.1
    )]
    ImageSizeMismatch {
        what: String,
        declared: (u32, u32),
        actual: (u32, u32),
    },
    #[error("video: {0}")]
    Video(#[from] VideoError),
    #[error("video: frame {index}: {source}")]
    Frame {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("io: {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
