//! Novel-view rendering of multiplane images and the object/background
//! merge that turns two renders into one training pair.

mod composite;
mod fill;
mod masks;
mod pipeline;
mod view;
mod warp;

use thiserror::Error;

use crate::mpi::MpiError;
use crate::raster::DimensionMismatch;

pub use composite::{
    composite, unit_deltas, Accumulator, CompositeLayer, CompositeOutput, CompositeState, EMPTY_COVERAGE,
};
pub use fill::{apply_external_fill, fill_holes};
pub use masks::{compose_flows, compose_images, inpaint_mask, occlusion_mask};
pub use pipeline::{
    generate_indexed, generate_sample, generate_with_poses, mask_components, sample_pose_plan,
    GeneratedSample, InpaintMode, PosePlan, Provenance, SampleConfig,
};
pub use view::{flatten, render_view, RenderedView};
pub use warp::{
    inverse_plane_homography, plane_flow, plane_homography, plane_homography_gather, SINGULAR_DET,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error("plane homography at depth {depth} is singular (det = {det:e})")]
    SingularHomography { depth: f64, det: f64 },
    #[error(transparent)]
    DimensionMismatch(#[from] DimensionMismatch),
    #[error(transparent)]
    Mpi(#[from] MpiError),
    #[error("no valid pixel left to fill from")]
    AllHoles,
    #[error("covered fraction {coverage:.3} is below the floor {floor:.3}")]
    DegenerateSample { coverage: f64, floor: f64 },
    #[error("channel count mismatch: {0} vs {1}")]
    ChannelMismatch(usize, usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
