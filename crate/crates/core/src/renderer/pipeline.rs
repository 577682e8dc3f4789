//! End-to-end sample generation: MPI build, dual-pose render, merge, fill.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::composite::EMPTY_COVERAGE;
use super::fill::fill_holes;
use super::masks::{compose_flows, compose_images, inpaint_mask, occlusion_mask};
use super::view::{flatten, render_view, RenderedView};
use super::warp::plane_flow;
use super::RenderError;
use crate::camera::{sample_pose, sample_rng, CameraIntrinsics, CameraPose, MotionRanges};
use crate::mpi::{build_mpi, build_mpi_with_range, split_mpi, FlowChannel, Mpi};
use crate::raster::{DepthMap, FlowField, MaskImage, Raster, MASK_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InpaintMode {
    /// Fill holes with the push-pull filler.
    Builtin,
    /// Leave holes for an external inpainter.
    Export,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleConfig {
    pub n_planes: usize,
    pub preset: String,
    pub ranges: MotionRanges,
    /// Give objects their own sampled motion; otherwise they follow the
    /// background camera.
    pub object_motion: bool,
    /// Treat every connected mask component as a separate object.
    pub multi_object: bool,
    /// Minimum fraction of target pixels covered before filling.
    pub coverage_floor: f64,
    pub inpaint: InpaintMode,
    /// Explicit near/far plane depths instead of depth-map percentiles.
    pub depth_range: Option<(f64, f64)>,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            n_planes: 64,
            preset: "driving".into(),
            ranges: MotionRanges::driving(),
            object_motion: true,
            multi_object: false,
            coverage_floor: 0.6,
            inpaint: InpaintMode::Builtin,
            depth_range: None,
        }
    }
}

impl SampleConfig {
    pub fn validate(&self) -> Result<(), RenderError> {
        if self.n_planes < 2 {
            return Err(RenderError::InvalidConfig(format!(
                "plane count must be at least 2, got {}",
                self.n_planes
            )));
        }
        if !(self.coverage_floor > 0.0 && self.coverage_floor <= 1.0) {
            return Err(RenderError::InvalidConfig(format!(
                "coverage floor must lie in (0, 1], got {}",
                self.coverage_floor
            )));
        }
        self.ranges
            .validate()
            .map_err(|e| RenderError::InvalidConfig(e.to_string()))
    }
}

/// Target poses for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosePlan {
    pub background: CameraPose,
    /// One pose per object component; a single pose is shared by all.
    pub objects: Vec<CameraPose>,
}

impl PosePlan {
    pub fn still() -> Self {
        Self::uniform(CameraPose::identity())
    }

    pub fn uniform(pose: CameraPose) -> Self {
        Self {
            background: pose,
            objects: vec![pose],
        }
    }

    fn object_pose(&self, component: usize) -> CameraPose {
        match self.objects.len() {
            0 => self.background,
            1 => self.objects[0],
            n => self.objects[component.min(n - 1)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub input_index: u64,
    pub pair_index: u64,
    pub preset: String,
    pub planes: usize,
}

/// One generated training pair with its labels and diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSample {
    pub source_image: Raster,
    pub novel_image: Raster,
    /// Novel image before hole filling; holes are black.
    pub unfilled_image: Raster,
    /// Ground-truth flow from source to novel view.
    pub flow: FlowField,
    /// Every source pixel moved with its object's motion.
    pub object_flow: FlowField,
    /// Every source pixel moved with the background motion.
    pub background_flow: FlowField,
    /// Source-view object mask used to blend the two flows.
    pub source_mask: MaskImage,
    pub occlusion_mask: MaskImage,
    pub inpaint_mask: MaskImage,
    pub object_mask_target: MaskImage,
    pub background_mask_target: MaskImage,
    pub poses: PosePlan,
    /// Fraction of target pixels covered before filling.
    pub coverage_fraction: f64,
    pub provenance: Provenance,
}

/// Connected components (4-neighbour) of the binarized mask, in raster
/// order of their first pixel.
pub fn mask_components(mask: &MaskImage) -> Vec<MaskImage> {
    let (w, h) = mask.dims();
    let bits = mask.bits();
    let mut label = vec![usize::MAX; w * h];
    let mut components = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !bits[start] || label[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = Vec::new();
        label[start] = id;
        stack.push(start);
        while let Some(i) = stack.pop() {
            members.push(i);
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if bits[j] && label[j] == usize::MAX {
                    label[j] = id;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        let mut comp = vec![false; w * h];
        for i in members {
            comp[i] = true;
        }
        components.push(MaskImage::from_bools(w, h, &comp));
    }
    components
}

/// Object layers handled by one sample: the whole mask, or one entry per
/// connected component.
fn object_layers(mask: &MaskImage, multi_object: bool) -> Vec<MaskImage> {
    if multi_object {
        mask_components(mask)
    } else if mask.values().iter().any(|&m| m > 0.0) {
        vec![mask.clone()]
    } else {
        Vec::new()
    }
}

/// Draws the background pose, then one pose per object layer.
pub fn sample_pose_plan<R: Rng + ?Sized>(
    config: &SampleConfig,
    object_layers: usize,
    rng: &mut R,
) -> PosePlan {
    let background = sample_pose(&config.ranges, rng);
    let objects = if config.object_motion {
        (0..object_layers.max(1))
            .map(|_| sample_pose(&config.ranges, rng))
            .collect()
    } else {
        vec![background]
    };
    PosePlan {
        background,
        objects,
    }
}

/// Generates one sample, drawing poses from `rng`.
pub fn generate_sample<R: Rng + ?Sized>(
    image: &Raster,
    depth: &DepthMap,
    mask: &MaskImage,
    k: &CameraIntrinsics,
    config: &SampleConfig,
    rng: &mut R,
) -> Result<GeneratedSample, RenderError> {
    config.validate()?;
    let layers = object_layers(mask, config.multi_object).len();
    let plan = sample_pose_plan(config, layers, rng);
    generate_with_poses(image, depth, mask, k, config, &plan)
}

/// Generates the sample for `(seed, input, pair)` with its own random stream.
#[allow(clippy::too_many_arguments)]
pub fn generate_indexed(
    image: &Raster,
    depth: &DepthMap,
    mask: &MaskImage,
    k: &CameraIntrinsics,
    config: &SampleConfig,
    seed: u64,
    input_index: u64,
    pair_index: u64,
) -> Result<GeneratedSample, RenderError> {
    let mut rng = sample_rng(seed, input_index, pair_index);
    let mut sample = generate_sample(image, depth, mask, k, config, &mut rng)?;
    sample.provenance.seed = Some(seed);
    sample.provenance.input_index = input_index;
    sample.provenance.pair_index = pair_index;
    Ok(sample)
}

fn with_flow(mut mpi: Mpi, k: &CameraIntrinsics, channel: FlowChannel, pose: &CameraPose) -> Result<Mpi, RenderError> {
    mpi.fill_flow(channel, |d| plane_flow(k, pose, d))?;
    Ok(mpi)
}

/// Generates one sample under fixed poses.
pub fn generate_with_poses(
    image: &Raster,
    depth: &DepthMap,
    mask: &MaskImage,
    k: &CameraIntrinsics,
    config: &SampleConfig,
    plan: &PosePlan,
) -> Result<GeneratedSample, RenderError> {
    config.validate()?;
    let mpi = match config.depth_range {
        Some((near, far)) => build_mpi_with_range(image, depth, mask, k, config.n_planes, near, far)?,
        None => build_mpi(image, depth, mask, k, config.n_planes)?,
    };
    let (w, h) = mpi.dims();

    let layers = object_layers(mask, config.multi_object);
    let blend_mask = if config.multi_object {
        union(w, h, &layers)
    } else {
        mask.clone()
    };

    // Both flows cover the whole source frame: every pixel as it would move
    // under the background motion and under its object's motion.
    let mpi = with_flow(mpi, k, FlowChannel::Background, &plan.background)?;
    let background_flow = flatten(&mpi, FlowChannel::Background).flow;
    let (_, background) = split_mpi(&mpi);
    let bg_view = render_view(&background, k, &plan.background, FlowChannel::Background)?;

    let mut object_flow = match layers.is_empty() {
        true => flatten(&with_flow(mpi.clone(), k, FlowChannel::Object, &plan.object_pose(0))?, FlowChannel::Object).flow,
        false => FlowField::zeros(w, h),
    };
    let mut object_views = Vec::with_capacity(layers.len());
    for (i, layer) in layers.iter().enumerate() {
        let pose = plan.object_pose(i);
        let moved = with_flow(mpi.clone(), k, FlowChannel::Object, &pose)?;
        let full = flatten(&moved, FlowChannel::Object).flow;
        if i == 0 {
            object_flow = full;
        } else {
            copy_where(&mut object_flow, &full, layer);
        }
        let restricted = if config.multi_object {
            moved.with_object_mask(layer)?
        } else {
            moved
        };
        let (object, _) = split_mpi(&restricted);
        object_views.push(render_view(&object, k, &pose, FlowChannel::Object)?);
    }
    let obj_view = merge_object_views(w, h, &layers, object_views);

    let flow = compose_flows(&object_flow, &background_flow, &blend_mask)?;
    let m_obj_t = obj_view.coverage.binarized();
    let m_bg_t = bg_view.coverage.binarized();
    let m_occ = occlusion_mask(&bg_view.coverage, &obj_view.coverage, &bg_view.depth, &obj_view.depth)?;
    let unfilled = compose_images(&obj_view, &bg_view, &m_obj_t, &m_bg_t, &m_occ)?;
    let m_inp = inpaint_mask(&m_obj_t, &m_bg_t)?;

    let coverage_fraction = 1.0 - m_inp.set_fraction();
    if coverage_fraction < config.coverage_floor {
        return Err(RenderError::DegenerateSample {
            coverage: coverage_fraction,
            floor: config.coverage_floor,
        });
    }
    let novel = match config.inpaint {
        InpaintMode::Builtin => fill_holes(&unfilled, &m_inp)?,
        InpaintMode::Export => unfilled.clone(),
    };

    Ok(GeneratedSample {
        source_image: image.clone(),
        novel_image: novel,
        unfilled_image: unfilled,
        flow,
        object_flow,
        background_flow,
        source_mask: blend_mask,
        occlusion_mask: m_occ,
        inpaint_mask: m_inp,
        object_mask_target: m_obj_t,
        background_mask_target: m_bg_t,
        poses: plan.clone(),
        coverage_fraction,
        provenance: Provenance {
            seed: None,
            input_index: 0,
            pair_index: 0,
            preset: config.preset.clone(),
            planes: config.n_planes,
        },
    })
}

fn copy_where(dst: &mut FlowField, src: &FlowField, mask: &MaskImage) {
    let (w, h) = mask.dims();
    for y in 0..h {
        for x in 0..w {
            if mask.is_set(x, y) {
                let (u, v) = src.get(x, y);
                dst.set(x, y, u, v, src.is_valid(x, y));
            }
        }
    }
}

fn union(w: usize, h: usize, layers: &[MaskImage]) -> MaskImage {
    MaskImage::from_fn(w, h, |x, y| {
        layers.iter().map(|l| l.get(x, y)).fold(0.0, f64::max)
    })
}

fn empty_view(w: usize, h: usize) -> RenderedView {
    let mut none = FlowField::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            none.set(x, y, 0.0, 0.0, false);
        }
    }
    RenderedView {
        image: Raster::zeros(w, h, 3),
        depth: Raster::zeros(w, h, 1),
        coverage: MaskImage::zeros(w, h),
        object_mask: MaskImage::zeros(w, h),
        flow: none.clone(),
        target_flow: none,
    }
}

/// Mean composited depth over the set pixels of a view.
fn mean_depth(view: &RenderedView) -> f64 {
    let (w, h) = view.dims();
    let (mut sum, mut n) = (0.0, 0usize);
    for y in 0..h {
        for x in 0..w {
            if view.coverage.is_set(x, y) {
                if let Some(d) = view.depth_at(x, y) {
                    sum += d;
                    n += 1;
                }
            }
        }
    }
    if n == 0 {
        f64::INFINITY
    } else {
        sum / n as f64
    }
}

/// Pastes per-object renders far to near so nearer objects win overlaps.
/// Source-frame flows are taken from the component owning each pixel.
fn merge_object_views(
    w: usize,
    h: usize,
    layers: &[MaskImage],
    mut views: Vec<RenderedView>,
) -> RenderedView {
    match views.len() {
        0 => return empty_view(w, h),
        1 => return views.pop().unwrap(),
        _ => {}
    }
    let mut order: Vec<usize> = (0..views.len()).collect();
    let depths: Vec<f64> = views.iter().map(mean_depth).collect();
    order.sort_by(|&a, &b| depths[b].total_cmp(&depths[a]));

    let mut out = empty_view(w, h);
    let mut coverage = vec![0.0; w * h];
    let mut owner_set = vec![false; w * h];
    for &c in &order {
        let v = &views[c];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let cov = v.coverage.get(x, y);
                let wins = if cov >= MASK_THRESHOLD {
                    true
                } else {
                    !owner_set[i] && cov > coverage[i]
                };
                if !wins {
                    continue;
                }
                owner_set[i] |= cov >= MASK_THRESHOLD;
                coverage[i] = cov;
                out.image.pixel_mut(x, y).copy_from_slice(v.image.pixel(x, y));
                out.depth.set(x, y, 0, v.depth.get(x, y, 0));
                out.object_mask.set(x, y, v.object_mask.get(x, y));
                let (u, vv) = v.target_flow.get(x, y);
                out.target_flow.set(x, y, u, vv, v.target_flow.is_valid(x, y));
            }
        }
    }
    out.coverage = MaskImage::from_vec(w, h, coverage);
    for y in 0..h {
        for x in 0..w {
            let owner = layers
                .iter()
                .position(|l| l.is_set(x, y))
                .or_else(|| views.iter().position(|v| v.flow.is_valid(x, y)));
            if let Some(c) = owner {
                let f = &views[c].flow;
                let (u, v) = f.get(x, y);
                out.flow.set(x, y, u, v, f.is_valid(x, y));
            }
        }
    }
    debug_assert!(out.coverage.values().iter().all(|&c| c <= 1.0 + EMPTY_COVERAGE));
    out
}
