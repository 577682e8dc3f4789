//! Pinhole intrinsics, rigid poses and virtual camera motion sampling.
//!
//! Poses map source-camera coordinates into target-camera coordinates:
//! `X_t = R · X_s + t`. The source camera frame doubles as the world frame.

use std::path::Path;

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CameraError {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("rotation is not orthonormal with det +1 (deviation {0:e})")]
    InvalidRotation(f64),
    #[error("point has non-positive depth z = {0}")]
    NonPositiveDepth(f64),
    #[error("invalid motion range `{name}`: [{lo}, {hi}]")]
    InvalidRange { name: &'static str, lo: f64, hi: f64 },
    #[error("unknown camera preset `{0}`")]
    UnknownPreset(String),
    #[error("failed to read preset file: {0}")]
    PresetIo(String),
    #[error("failed to parse preset file: {0}")]
    PresetParse(String),
}

/// Tolerance for orthonormality and determinant checks on rotations.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, CameraError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// Square pixels with the principal point at the image center.
    pub fn centered(focal: f64, width: usize, height: usize) -> Result<Self, CameraError> {
        Self::new(
            focal,
            focal,
            width as f64 / 2.0,
            height as f64 / 2.0,
            width,
            height,
        )
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        let finite = [self.fx, self.fy, self.cx, self.cy]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(CameraError::InvalidIntrinsics("non-finite parameter".into()));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(CameraError::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx = {}, fy = {})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(CameraError::InvalidIntrinsics("empty image size".into()));
        }
        if !(0.0..self.width as f64).contains(&self.cx)
            || !(0.0..self.height as f64).contains(&self.cy)
        {
            return Err(CameraError::InvalidIntrinsics(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.fx, 0.0, self.cx, //
            0.0, self.fy, self.cy, //
            0.0, 0.0, 1.0,
        )
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    /// Pinhole projection of a camera-frame point.
    pub fn project(&self, point: &Vector3<f64>) -> Result<Vector2<f64>, CameraError> {
        if !(point.z > 0.0) {
            return Err(CameraError::NonPositiveDepth(point.z));
        }
        Ok(Vector2::new(
            self.fx * point.x / point.z + self.cx,
            self.fy * point.y / point.z + self.cy,
        ))
    }

    /// Point at depth `z` along the ray through `pixel`.
    pub fn back_project(&self, pixel: &Vector2<f64>, z: f64) -> Vector3<f64> {
        Vector3::new(
            (pixel.x - self.cx) / self.fx * z,
            (pixel.y - self.cy) / self.fy * z,
            z,
        )
    }
}

/// Free-function form of [`CameraIntrinsics::project`].
pub fn project(k: &CameraIntrinsics, point: &Vector3<f64>) -> Result<Vector2<f64>, CameraError> {
    k.project(point)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for CameraPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl CameraPose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Validates that `rotation` is a proper rotation.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, CameraError> {
        let deviation = rotation_deviation(&rotation);
        if !(deviation < ROTATION_TOLERANCE) || !translation.iter().all(|v| v.is_finite()) {
            return Err(CameraError::InvalidRotation(deviation));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    pub fn from_euler(angles: [f64; 3], t: Vector3<f64>) -> Self {
        Self {
            rotation: euler_to_rotation(angles[0], angles[1], angles[2]),
            translation: t,
        }
    }

    pub fn inverse(&self) -> Self {
        invert_pose(self)
    }

    /// Maps a source-frame point into the target frame.
    pub fn transform(&self, point: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * point + self.translation
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, first: &CameraPose) -> CameraPose {
        CameraPose {
            rotation: self.rotation * first.rotation,
            translation: self.rotation * first.translation + self.translation,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.rotation == Matrix3::identity() && self.translation == Vector3::zeros()
    }
}

/// Largest of `‖RᵀR − I‖_max` and `|det R − 1|`.
pub fn rotation_deviation(r: &Matrix3<f64>) -> f64 {
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    let det = (r.determinant() - 1.0).abs();
    ortho.max(det)
}

/// `R = Rz(az) · Ry(ay) · Rx(ax)`.
pub fn euler_to_rotation(ax: f64, ay: f64, az: f64) -> Matrix3<f64> {
    let (sx, cx) = ax.sin_cos();
    let (sy, cy) = ay.sin_cos();
    let (sz, cz) = az.sin_cos();
    Matrix3::new(
        cz * cy,
        cz * sy * sx - sz * cx,
        cz * sy * cx + sz * sx,
        sz * cy,
        sz * sy * sx + cz * cx,
        sz * sy * cx - cz * sx,
        -sy,
        cy * sx,
        cy * cx,
    )
}

/// `(R, t) ↦ (Rᵀ, −Rᵀt)`.
pub fn invert_pose(pose: &CameraPose) -> CameraPose {
    let rt = pose.rotation.transpose();
    CameraPose {
        rotation: rt,
        translation: -(rt * pose.translation),
    }
}

/// Closed interval `[lo, hi]`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl From<[f64; 2]> for Interval {
    fn from(v: [f64; 2]) -> Self {
        Interval { lo: v[0], hi: v[1] }
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.gen_range(self.lo..=self.hi)
        }
    }
}

const MAX_ANGLE: f64 = std::f64::consts::PI / 90.0;

/// Intervals for the six motion scalars of a virtual camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionRanges {
    pub tx_range: Interval,
    pub ty_range: Interval,
    pub tz_range: Interval,
    pub angle_range: Interval,
}

impl Default for MotionRanges {
    fn default() -> Self {
        Self::driving()
    }
}

impl MotionRanges {
    /// Forward-moving camera typical of driving footage.
    pub fn driving() -> Self {
        Self {
            tx_range: Interval::new(-0.2, 0.2),
            ty_range: Interval::new(-0.2, 0.2),
            tz_range: Interval::new(0.1, 0.35),
            angle_range: Interval::new(-MAX_ANGLE, MAX_ANGLE),
        }
    }

    /// Forward and backward motion for unconstrained imagery.
    pub fn generic() -> Self {
        Self {
            tz_range: Interval::new(-0.15, 0.15),
            ..Self::driving()
        }
    }

    /// Every scalar pinned to zero.
    pub fn still() -> Self {
        Self {
            tx_range: Interval::point(0.0),
            ty_range: Interval::point(0.0),
            tz_range: Interval::point(0.0),
            angle_range: Interval::point(0.0),
        }
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        for (name, r) in [
            ("tx_range", self.tx_range),
            ("ty_range", self.ty_range),
            ("tz_range", self.tz_range),
            ("angle_range", self.angle_range),
        ] {
            if !r.is_valid() {
                return Err(CameraError::InvalidRange {
                    name,
                    lo: r.lo,
                    hi: r.hi,
                });
            }
        }
        Ok(())
    }
}

/// The six scalars behind a sampled pose, kept for provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionSample {
    pub translation: [f64; 3],
    pub angles: [f64; 3],
}

impl MotionSample {
    pub fn pose(&self) -> CameraPose {
        CameraPose::from_euler(self.angles, Vector3::from(self.translation))
    }
}

/// Draws tx, ty, tz, ax, ay, az in that order, each uniform on its interval.
pub fn sample_motion<R: Rng + ?Sized>(ranges: &MotionRanges, rng: &mut R) -> MotionSample {
    let translation = [
        ranges.tx_range.sample(rng),
        ranges.ty_range.sample(rng),
        ranges.tz_range.sample(rng),
    ];
    let angles = [
        ranges.angle_range.sample(rng),
        ranges.angle_range.sample(rng),
        ranges.angle_range.sample(rng),
    ];
    MotionSample {
        translation,
        angles,
    }
}

pub fn sample_pose<R: Rng + ?Sized>(ranges: &MotionRanges, rng: &mut R) -> CameraPose {
    sample_motion(ranges, rng).pose()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent random stream for one `(input, pair)` task.
///
/// Depends only on its arguments, so the schedule that runs tasks cannot
/// change what any task draws.
pub fn sample_rng(seed: u64, input_index: u64, pair_index: u64) -> ChaCha8Rng {
    let h = splitmix64(splitmix64(splitmix64(seed) ^ input_index) ^ pair_index.rotate_left(32));
    ChaCha8Rng::seed_from_u64(h)
}

/// Focal-length rule for presets that do not pin intrinsics.
pub const GENERIC_FOCAL_FACTOR: f64 = 0.58;

/// Named motion ranges with optional fixed intrinsics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraPreset {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cy: Option<f64>,
    #[serde(flatten)]
    pub ranges: MotionRanges,
}

impl CameraPreset {
    pub fn driving() -> Self {
        Self::named("driving", MotionRanges::driving())
    }

    pub fn generic() -> Self {
        Self::named("generic", MotionRanges::generic())
    }

    fn named(name: &str, ranges: MotionRanges) -> Self {
        Self {
            name: name.to_string(),
            fx: None,
            fy: None,
            cx: None,
            cy: None,
            ranges,
        }
    }

    /// Built-in preset by name.
    pub fn builtin(name: &str) -> Result<Self, CameraError> {
        match name {
            "driving" => Ok(Self::driving()),
            "generic" => Ok(Self::generic()),
            other => Err(CameraError::UnknownPreset(other.to_string())),
        }
    }

    /// Parses a TOML key-value preset.
    pub fn from_toml_str(text: &str) -> Result<Self, CameraError> {
        let preset: CameraPreset =
            toml::from_str(text).map_err(|e| CameraError::PresetParse(e.to_string()))?;
        preset.ranges.validate()?;
        let pinned = [preset.fx, preset.fy, preset.cx, preset.cy]
            .iter()
            .filter(|v| v.is_some())
            .count();
        if pinned != 0 && pinned != 4 {
            return Err(CameraError::PresetParse(
                "fx, fy, cx and cy must be given together".into(),
            ));
        }
        Ok(preset)
    }

    pub fn load(path: &Path) -> Result<Self, CameraError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CameraError::PresetIo(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// A built-in name, or else a path to a preset file.
    pub fn resolve(name_or_path: &str) -> Result<Self, CameraError> {
        match Self::builtin(name_or_path) {
            Ok(p) => Ok(p),
            Err(CameraError::UnknownPreset(_)) if Path::new(name_or_path).is_file() => {
                Self::load(Path::new(name_or_path))
            }
            Err(e) => Err(e),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("preset serializes")
    }

    /// Intrinsics for an image of the given size.
    pub fn intrinsics(&self, width: usize, height: usize) -> Result<CameraIntrinsics, CameraError> {
        match (self.fx, self.fy, self.cx, self.cy) {
            (Some(fx), Some(fy), Some(cx), Some(cy)) => {
                CameraIntrinsics::new(fx, fy, cx, cy, width, height)
            }
            _ => CameraIntrinsics::centered(
                GENERIC_FOCAL_FACTOR * width.max(height) as f64,
                width,
                height,
            ),
        }
    }
}
