//! Readers and writers for every file the generator touches.
//!
//! Byte layouts are fixed: `.flo` is the Middlebury layout, flow PNGs use
//! the KITTI 16-bit encoding, depth comes from 16-bit PNG or PFM, and each
//! sample is described by a JSON manifest.

mod depth;
mod flo;
mod image_io;
mod kitti;
mod manifest;
mod mpi_dir;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use depth::{read_depth, read_pfm, write_depth_png, write_pfm, DepthRead};
pub use flo::{decode_flo, encode_flo, read_flo, write_flo, FLO_MAGIC, FLO_UNKNOWN};
pub use image_io::{read_mask, read_rgb, write_mask, write_rgb, BitDepth};
pub use kitti::{
    decode_kitti, encode_kitti, kitti_encodable, read_kitti_png, write_kitti_png, KITTI_LIMIT, KITTI_OFFSET,
    KITTI_SCALE,
};
pub use manifest::{read_manifest, write_manifest, ManifestPose, SampleManifest, SourceRecord};
pub use mpi_dir::{load_mpi_dir, save_mpi_dir, MPI_HEADER};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("truncated file: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("flow ({u}, {v}) at ({x}, {y}) is outside the encodable range")]
    OutOfRange { x: usize, y: usize, u: f64, v: f64 },
    #[error("non-finite flow at ({x}, {y})")]
    NonFinite { x: usize, y: usize },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("depth map has no valid pixel")]
    AllInvalid,
    #[error("parse failure at line {line}, column {column}: {message}")]
    ParseFailure { line: usize, column: usize, message: String },
    #[error("image codec error for {path}: {message}")]
    Codec { path: PathBuf, message: String },
    #[error("referenced output {0} does not exist")]
    MissingOutput(PathBuf),
    #[error("invalid data: {0}")]
    Invalid(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DataError + '_ {
    move |source| DataError::IoFailure { path: path.to_path_buf(), source }
}

pub(crate) fn codec_err(path: &Path) -> impl FnOnce(image::ImageError) -> DataError + '_ {
    move |e| match e {
        image::ImageError::IoError(source) => DataError::IoFailure { path: path.to_path_buf(), source },
        other => DataError::Codec { path: path.to_path_buf(), message: other.to_string() },
    }
}

/// Opens an image, rejecting anything that does not decode.
pub(crate) fn open_image(path: &Path) -> Result<image::DynamicImage, DataError> {
    image::ImageReader::open(path)
        .map_err(io_err(path))?
        .with_guessed_format()
        .map_err(io_err(path))?
        .decode()
        .map_err(codec_err(path))
}
