//! Brute-force geometric reference and procedural test scenes.
//!
//! Everything here works point by point: back-project a pixel with its
//! depth, move the 3D point with the pose, project it again. None of it goes
//! through the renderer's homographies, so a sign or convention slip on
//! either side shows up as a disagreement.

use std::f64::consts::TAU;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::camera::{CameraIntrinsics, CameraPose, GENERIC_FOCAL_FACTOR};
use crate::raster::{DepthMap, FlowField, MaskImage, Raster};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("invalid scene layout: {0}")]
    InvalidLayout(String),
    #[error("scene spec line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// A transferred pixel: target position and target-camera depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transfer {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Moves source pixel `(x, y)` at depth `depth` into the target camera.
/// `None` when the point ends up at or behind the target camera.
pub fn transfer_point(k: &CameraIntrinsics, pose: &CameraPose, x: f64, y: f64, depth: f64) -> Option<Transfer> {
    let p = [(x - k.cx) * depth / k.fx, (y - k.cy) * depth / k.fy, depth];
    let r = &pose.rotation;
    let t = &pose.translation;
    let mut q = [0.0; 3];
    for (i, qi) in q.iter_mut().enumerate() {
        *qi = r[(i, 0)] * p[0] + r[(i, 1)] * p[1] + r[(i, 2)] * p[2] + t[i];
    }
    if !(q[2] > 0.0) {
        return None;
    }
    Some(Transfer {
        x: k.fx * q[0] / q[2] + k.cx,
        y: k.fy * q[1] / q[2] + k.cy,
        z: q[2],
    })
}

/// Per-pixel displacement of every source pixel under `pose`.
pub fn oracle_flow(depth: &DepthMap, k: &CameraIntrinsics, pose: &CameraPose) -> FlowField {
    let (w, h) = depth.dims();
    FlowField::from_fn(w, h, |x, y| {
        let (xs, ys) = (x as f64, y as f64);
        transfer_point(k, pose, xs, ys, depth.get(x, y)).map(|t| (t.x - xs, t.y - ys))
    })
}

/// Like [`oracle_flow`], but object pixels (mask set) move with
/// `object_pose` and the rest with `background_pose`.
pub fn oracle_flow_split(
    depth: &DepthMap,
    mask: &MaskImage,
    k: &CameraIntrinsics,
    background_pose: &CameraPose,
    object_pose: &CameraPose,
) -> FlowField {
    let (w, h) = depth.dims();
    FlowField::from_fn(w, h, |x, y| {
        let pose = if mask.is_set(x, y) { object_pose } else { background_pose };
        let (xs, ys) = (x as f64, y as f64);
        transfer_point(k, pose, xs, ys, depth.get(x, y)).map(|t| (t.x - xs, t.y - ys))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VisibilityOptions {
    /// Also flag pixels whose splat lands within one cell of a clearly
    /// nearer splat; marks uncertain pixels along occlusion borders.
    pub dilate: bool,
}

/// Relative depth margin for the dilated neighbour test.
const DILATION_MARGIN: f64 = 0.01;

/// Source pixels hidden in the target view (1 = occluded), by z-buffered
/// forward splatting to the nearest cell.
pub fn oracle_visibility(depth: &DepthMap, k: &CameraIntrinsics, pose: &CameraPose) -> MaskImage {
    oracle_visibility_with(depth, k, pose, VisibilityOptions::default())
}

pub fn oracle_visibility_with(
    depth: &DepthMap,
    k: &CameraIntrinsics,
    pose: &CameraPose,
    options: VisibilityOptions,
) -> MaskImage {
    visibility(depth, k, |_, _| pose, options)
}

/// Visibility when object pixels (mask set) move with `object_pose`.
pub fn oracle_visibility_split(
    depth: &DepthMap,
    mask: &MaskImage,
    k: &CameraIntrinsics,
    background_pose: &CameraPose,
    object_pose: &CameraPose,
    options: VisibilityOptions,
) -> MaskImage {
    visibility(depth, k, |x, y| if mask.is_set(x, y) { object_pose } else { background_pose }, options)
}

fn visibility<'a>(
    depth: &DepthMap,
    k: &CameraIntrinsics,
    pose_at: impl Fn(usize, usize) -> &'a CameraPose,
    options: VisibilityOptions,
) -> MaskImage {
    let (w, h) = depth.dims();
    let splats: Vec<Option<(usize, usize, f64)>> = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let t = transfer_point(k, pose_at(x, y), x as f64, y as f64, depth.get(x, y))?;
            let (cx, cy) = (t.x.round(), t.y.round());
            (cx >= 0.0 && cy >= 0.0 && cx < w as f64 && cy < h as f64).then_some((cx as usize, cy as usize, t.z))
        })
        .collect();
    let mut zbuf = vec![f64::INFINITY; w * h];
    for &(cx, cy, z) in splats.iter().flatten() {
        let cell = &mut zbuf[cy * w + cx];
        *cell = cell.min(z);
    }
    let occluded: Vec<bool> = splats
        .iter()
        .map(|s| {
            let Some((cx, cy, z)) = *s else {
                return false;
            };
            if z > zbuf[cy * w + cx] {
                return true;
            }
            if !options.dilate {
                return false;
            }
            let near = z * (1.0 - DILATION_MARGIN);
            (cy.saturating_sub(1)..=(cy + 1).min(h - 1))
                .any(|ny| (cx.saturating_sub(1)..=(cx + 1).min(w - 1)).any(|nx| zbuf[ny * w + nx] < near))
        })
        .collect();
    MaskImage::from_bools(w, h, &occluded)
}

/// Where a depth value in a scene spec comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DepthRef {
    /// Index into the declared plane set.
    Plane(usize),
    Value(f64),
}

impl FromStr for DepthRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(idx) = s.strip_prefix('p') {
            idx.parse().map(DepthRef::Plane).map_err(|_| format!("bad plane index `{s}`"))
        } else {
            s.parse().map(DepthRef::Value).map_err(|_| format!("bad depth `{s}`"))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Half-open pixel rectangle `[x0, x1) × [y0, y1)`.
    Rect { x0: usize, y0: usize, x1: usize, y1: usize, depth: DepthRef, object: bool },
    Disc { cx: f64, cy: f64, radius: f64, depth: DepthRef, object: bool },
}

/// Six motion scalars: translation then Euler angles.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PoseSpec {
    pub translation: [f64; 3],
    pub angles: [f64; 3],
}

impl PoseSpec {
    pub fn pose(&self) -> CameraPose {
        CameraPose::from_euler(self.angles, self.translation.into())
    }

    /// Same motion with every scalar negated.
    pub fn negated(&self) -> PoseSpec {
        PoseSpec {
            translation: self.translation.map(|v| -v),
            angles: self.angles.map(|v| -v),
        }
    }
}

/// Parsed scene description.
///
/// ```text
/// # comments start with '#'
/// name box-on-wall
/// size 128 96
/// focal 80            # optional; defaults to 0.58 * max(w, h)
/// planes 2 40 64      # near, far, count: the declared plane set
/// wall p63            # background depth: plane index or literal value
/// rect 30 20 70 60 p20 object
/// disc 90 40 12 p35
/// texture 7
/// pose background 0.1 0 0.2 0 0 0
/// pose object -0.1 0.05 0 0 0.01 0
/// render-sign -1      # negative control: renderer sees negated motions
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub focal: Option<f64>,
    pub planes: Option<(f64, f64, usize)>,
    pub wall: DepthRef,
    pub shapes: Vec<Shape>,
    pub texture_seed: u64,
    pub background_pose: PoseSpec,
    pub object_pose: Option<PoseSpec>,
    pub render_sign: f64,
}

impl SceneSpec {
    pub fn new(width: usize, height: usize, wall: DepthRef) -> Self {
        Self {
            name: "scene".into(),
            width,
            height,
            focal: None,
            planes: None,
            wall,
            shapes: Vec::new(),
            texture_seed: 0,
            background_pose: PoseSpec::default(),
            object_pose: None,
            render_sign: 1.0,
        }
    }

    pub fn parse(text: &str) -> Result<Self, OracleError> {
        let mut spec = SceneSpec::new(0, 0, DepthRef::Value(0.0));
        let mut have_size = false;
        let mut have_wall = false;
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let err = |message: String| OracleError::Parse { line, message };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = content.split_whitespace().collect();
            let args = &tokens[1..];
            let num = |i: usize| -> Result<f64, OracleError> {
                args.get(i)
                    .ok_or_else(|| err(format!("`{}` expects more arguments", tokens[0])))?
                    .parse::<f64>()
                    .map_err(|_| err(format!("bad number `{}`", args[i])))
            };
            let int = |i: usize| -> Result<usize, OracleError> {
                args.get(i)
                    .ok_or_else(|| err(format!("`{}` expects more arguments", tokens[0])))?
                    .parse::<usize>()
                    .map_err(|_| err(format!("bad integer `{}`", args[i])))
            };
            let depth = |i: usize| -> Result<DepthRef, OracleError> {
                args.get(i)
                    .ok_or_else(|| err("missing depth".into()))?
                    .parse()
                    .map_err(err)
            };
            let object_flag = |i: usize| -> Result<bool, OracleError> {
                match args.get(i) {
                    None => Ok(false),
                    Some(&"object") => Ok(true),
                    Some(other) => Err(err(format!("unexpected `{other}`"))),
                }
            };
            match tokens[0] {
                "name" => spec.name = args.join(" "),
                "size" => {
                    spec.width = int(0)?;
                    spec.height = int(1)?;
                    have_size = true;
                }
                "focal" => spec.focal = Some(num(0)?),
                "planes" => spec.planes = Some((num(0)?, num(1)?, int(2)?)),
                "wall" => {
                    spec.wall = depth(0)?;
                    have_wall = true;
                }
                "rect" => spec.shapes.push(Shape::Rect {
                    x0: int(0)?,
                    y0: int(1)?,
                    x1: int(2)?,
                    y1: int(3)?,
                    depth: depth(4)?,
                    object: object_flag(5)?,
                }),
                "disc" => spec.shapes.push(Shape::Disc {
                    cx: num(0)?,
                    cy: num(1)?,
                    radius: num(2)?,
                    depth: depth(3)?,
                    object: object_flag(4)?,
                }),
                "texture" => spec.texture_seed = int(0)? as u64,
                "pose" => {
                    let which = args.first().copied().unwrap_or("");
                    let vals = (1..7).map(num).collect::<Result<Vec<_>, _>>()?;
                    let pose = PoseSpec {
                        translation: [vals[0], vals[1], vals[2]],
                        angles: [vals[3], vals[4], vals[5]],
                    };
                    match which {
                        "background" => spec.background_pose = pose,
                        "object" => spec.object_pose = Some(pose),
                        other => return Err(err(format!("unknown pose target `{other}`"))),
                    }
                }
                "render-sign" => spec.render_sign = num(0)?,
                other => return Err(err(format!("unknown directive `{other}`"))),
            }
        }
        if !have_size {
            return Err(OracleError::InvalidLayout("missing `size`".into()));
        }
        if !have_wall {
            return Err(OracleError::InvalidLayout("missing `wall`".into()));
        }
        Ok(spec)
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics, OracleError> {
        let f = self
            .focal
            .unwrap_or(GENERIC_FOCAL_FACTOR * self.width.max(self.height) as f64);
        CameraIntrinsics::centered(f, self.width, self.height)
            .map_err(|e| OracleError::InvalidLayout(e.to_string()))
    }

    /// Plane depths declared by `planes`, if any.
    pub fn plane_set(&self) -> Result<Option<Vec<f64>>, OracleError> {
        self.planes
            .map(|(near, far, n)| {
                crate::mpi::plane_depths(near, far, n).map_err(|e| OracleError::InvalidLayout(e.to_string()))
            })
            .transpose()
    }

    fn resolve(&self, planes: &Option<Vec<f64>>, d: DepthRef) -> Result<f64, OracleError> {
        match (d, planes) {
            (DepthRef::Value(v), _) if v.is_finite() && v > 0.0 => Ok(v),
            (DepthRef::Value(v), _) => Err(OracleError::InvalidLayout(format!("depth {v} is not positive"))),
            (DepthRef::Plane(i), Some(p)) => p
                .get(i)
                .copied()
                .ok_or_else(|| OracleError::InvalidLayout(format!("plane index {i} out of range"))),
            (DepthRef::Plane(i), None) => Err(OracleError::InvalidLayout(format!(
                "plane reference p{i} without a `planes` declaration"
            ))),
        }
    }

    /// Motion applied to the background when rendering (sign-flipped for
    /// negative controls).
    pub fn render_background_pose(&self) -> CameraPose {
        self.signed(&self.background_pose).pose()
    }

    pub fn render_object_pose(&self) -> CameraPose {
        self.signed(&self.object_pose.unwrap_or(self.background_pose)).pose()
    }

    fn signed(&self, p: &PoseSpec) -> PoseSpec {
        if self.render_sign < 0.0 {
            p.negated()
        } else {
            *p
        }
    }
}

/// A procedurally generated scene with exactly known geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub image: Raster,
    pub depth: DepthMap,
    pub object_mask: MaskImage,
    pub intrinsics: CameraIntrinsics,
    /// Depths the scene was drawn from.
    pub plane_depths: Vec<f64>,
    pub spec: SceneSpec,
}

impl SyntheticScene {
    pub fn background_pose(&self) -> CameraPose {
        self.spec.background_pose.pose()
    }

    pub fn object_pose(&self) -> CameraPose {
        self.spec.object_pose.unwrap_or(self.spec.background_pose).pose()
    }

    /// Ground-truth flow under the scene's poses.
    pub fn oracle_flow(&self) -> FlowField {
        oracle_flow_split(
            &self.depth,
            &self.object_mask,
            &self.intrinsics,
            &self.background_pose(),
            &self.object_pose(),
        )
    }
}

/// Smooth band-limited color texture, deterministic per seed.
///
/// Each channel is a sum of plane waves with wavelengths of 10 to 24 px:
/// detailed enough that a one-pixel misalignment is obvious, smooth enough
/// that bilinear resampling stays accurate.
pub fn procedural_texture(width: usize, height: usize, seed: u64) -> Raster {
    const WAVES: usize = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<[(f64, f64, f64); WAVES]> = (0..3)
        .map(|_| {
            std::array::from_fn(|_| {
                let wavelength = rng.gen_range(10.0..24.0);
                let theta = rng.gen_range(0.0..TAU);
                let phase = rng.gen_range(0.0..TAU);
                let k = TAU / wavelength;
                (k * theta.cos(), k * theta.sin(), phase)
            })
        })
        .collect();
    Raster::from_fn(width, height, 3, |x, y, c| {
        let s: f64 = waves[c]
            .iter()
            .map(|&(kx, ky, ph)| (kx * x as f64 + ky * y as f64 + ph).sin())
            .sum();
        0.5 + 0.4 * s / WAVES as f64
    })
}

pub fn make_scene(spec: &SceneSpec) -> Result<SyntheticScene, OracleError> {
    let (w, h) = (spec.width, spec.height);
    if w == 0 || h == 0 {
        return Err(OracleError::InvalidLayout("empty image size".into()));
    }
    let intrinsics = spec.intrinsics()?;
    let planes = spec.plane_set()?;
    let wall = spec.resolve(&planes, spec.wall)?;
    let mut depth = vec![wall; w * h];
    let mut mask = vec![false; w * h];
    let mut used = vec![wall];
    for shape in &spec.shapes {
        let (d, object) = match shape {
            Shape::Rect { x0, y0, x1, y1, depth, object } => {
                if x0 >= x1 || y0 >= y1 || *x1 > w || *y1 > h {
                    return Err(OracleError::InvalidLayout(format!(
                        "rect [{x0}, {x1}) x [{y0}, {y1}) does not fit {w}x{h}"
                    )));
                }
                (spec.resolve(&planes, *depth)?, *object)
            }
            Shape::Disc { cx, cy, radius, depth, object } => {
                let inside = *radius > 0.0
                    && *cx - radius >= 0.0
                    && *cy - radius >= 0.0
                    && *cx + radius <= (w - 1) as f64
                    && *cy + radius <= (h - 1) as f64;
                if !inside {
                    return Err(OracleError::InvalidLayout(format!(
                        "disc at ({cx}, {cy}) radius {radius} does not fit {w}x{h}"
                    )));
                }
                (spec.resolve(&planes, *depth)?, *object)
            }
        };
        for y in 0..h {
            for x in 0..w {
                let hit = match shape {
                    Shape::Rect { x0, y0, x1, y1, .. } => (*x0..*x1).contains(&x) && (*y0..*y1).contains(&y),
                    Shape::Disc { cx, cy, radius, .. } => {
                        (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= radius * radius
                    }
                };
                if hit {
                    depth[y * w + x] = d;
                    mask[y * w + x] = object;
                }
            }
        }
        used.push(d);
    }
    used.sort_by(f64::total_cmp);
    used.dedup();
    Ok(SyntheticScene {
        image: procedural_texture(w, h, spec.texture_seed),
        depth: DepthMap::new(w, h, depth).map_err(|e| OracleError::InvalidLayout(e.to_string()))?,
        object_mask: MaskImage::from_bools(w, h, &mask),
        intrinsics,
        plane_depths: planes.unwrap_or(used),
        spec: spec.clone(),
    })
}
