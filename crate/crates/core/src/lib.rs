//! Optical flow training-pair generation from a single image and its depth.
//!
//! The source image is lifted into a multiplane image ([`mpi`]), rendered
//! under independent virtual camera motions for the object and the
//! background ([`renderer`]), and merged into a novel view plus a dense
//! flow field with occlusion and inpainting masks. [`oracle`] provides a
//! brute-force reference for the geometry, [`dataio`] the file formats and
//! [`metrics`] the flow error statistics.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod dataio;
pub mod metrics;
pub mod mpi;
pub mod oracle;
pub mod raster;
pub mod renderer;

pub use camera::{CameraIntrinsics, CameraPose, CameraPreset, MotionRanges};
pub use mpi::{Mpi, MpiPlane};
pub use raster::{DepthMap, FlowField, MaskImage, Raster};
pub use renderer::{GeneratedSample, RenderedView, SampleConfig};

/// Version string recorded in every manifest.
pub const GENERATOR_VERSION: &str = concat!("flowgen ", env!("CARGO_PKG_VERSION"));
