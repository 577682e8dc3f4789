//! Multiplane image construction.
//!
//! An [`Mpi`] is a stack of fronto-parallel planes ordered front to back,
//! spaced uniformly in disparity. Each plane carries color, density, an
//! object-mask channel and two flow channels (object motion and background
//! motion). Plane rasters are stored cropped to the footprint where the
//! density may be nonzero; everything outside the footprint is empty space.

use thiserror::Error;

use crate::camera::CameraIntrinsics;
use crate::raster::{ensure_dims, DepthMap, DimensionMismatch, FlowField, MaskImage, Raster};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MpiError {
    #[error("invalid plane depth range: d_min = {d_min}, d_max = {d_max}, n = {n}")]
    InvalidRange { d_min: f64, d_max: f64, n: usize },
    #[error(transparent)]
    DimensionMismatch(#[from] DimensionMismatch),
    #[error("depth map is constant ({0}); cannot spread planes over an empty range")]
    EmptyDepthRange(f64),
    #[error("invalid plane stack: {0}")]
    InvalidPlanes(String),
}

/// Density deposited on the plane that owns a pixel. `1 - exp(-64)` rounds
/// to exactly 1.0 in `f64`.
pub const OPAQUE_DENSITY: f64 = 64.0;

/// Opacity of one plane sample; the inter-plane distance is in plane-index
/// units.
#[inline]
pub fn alpha_from_density(sigma: f64, delta: f64) -> f64 {
    1.0 - (-delta * sigma).exp()
}

/// Density that reproduces `alpha` at unit spacing. Fully opaque maps to
/// [`OPAQUE_DENSITY`].
pub fn density_from_alpha(alpha: f64) -> f64 {
    let a = alpha.clamp(0.0, 1.0);
    if a >= 1.0 {
        OPAQUE_DENSITY
    } else {
        (-(1.0 - a).ln()).min(OPAQUE_DENSITY)
    }
}

/// `n` depths from `d_min` to `d_max` whose reciprocals are evenly spaced.
pub fn plane_depths(d_min: f64, d_max: f64, n: usize) -> Result<Vec<f64>, MpiError> {
    let invalid = || MpiError::InvalidRange { d_min, d_max, n };
    if !(d_min.is_finite() && d_max.is_finite() && 0.0 < d_min && d_min < d_max && n >= 2) {
        return Err(invalid());
    }
    let (near, far) = (1.0 / d_min, 1.0 / d_max);
    let step = (far - near) / (n - 1) as f64;
    let mut depths: Vec<f64> = (0..n).map(|k| 1.0 / (near + step * k as f64)).collect();
    depths[0] = d_min;
    depths[n - 1] = d_max;
    if depths.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid());
    }
    Ok(depths)
}

/// Which of a plane's two flow channels to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowChannel {
    Object,
    Background,
}

/// Axis-aligned pixel rectangle `[x0, x0 + width) × [y0, y0 + height)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Footprint {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl Footprint {
    pub fn full(width: usize, height: usize) -> Self {
        Self {
            x0: 0,
            y0: 0,
            width,
            height,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    #[inline]
    fn local(&self, x: i64, y: i64) -> Option<usize> {
        let lx = x - self.x0 as i64;
        let ly = y - self.y0 as i64;
        if lx < 0 || ly < 0 || lx >= self.width as i64 || ly >= self.height as i64 {
            None
        } else {
            Some(ly as usize * self.width + lx as usize)
        }
    }

    /// Bounding box of the pixels where `pred` holds, or an empty footprint.
    fn bounding(width: usize, height: usize, pred: impl Fn(usize, usize) -> bool) -> Self {
        let (mut x_lo, mut y_lo, mut x_hi, mut y_hi) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..height {
            for x in 0..width {
                if pred(x, y) {
                    x_lo = x_lo.min(x);
                    y_lo = y_lo.min(y);
                    x_hi = x_hi.max(x);
                    y_hi = y_hi.max(y);
                }
            }
        }
        if x_lo == usize::MAX {
            Self::default()
        } else {
            Self {
                x0: x_lo,
                y0: y_lo,
                width: x_hi - x_lo + 1,
                height: y_hi - y_lo + 1,
            }
        }
    }
}

/// Channel layout written by [`MpiPlane::sample`].
pub mod slot {
    pub const RED: usize = 0;
    pub const GREEN: usize = 1;
    pub const BLUE: usize = 2;
    pub const FLOW_U: usize = 3;
    pub const FLOW_V: usize = 4;
    /// Weight of valid flow; equals alpha where every contributor is valid.
    pub const FLOW_VALID: usize = 5;
    pub const MASK: usize = 6;
    pub const DEPTH: usize = 7;
    pub const COUNT: usize = 8;
}

/// One fronto-parallel layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MpiPlane {
    depth: f64,
    frame: (usize, usize),
    footprint: Footprint,
    color: Raster,
    density: Raster,
    alpha: Vec<f64>,
    object_mask: Raster,
    // u, v, validity (0 or 1)
    flow_obj: Raster,
    flow_bg: Raster,
}

impl MpiPlane {
    /// Builds a plane from full-frame rasters and crops it to the pixels with
    /// nonzero density.
    pub fn from_full(
        depth: f64,
        color: &Raster,
        density: &Raster,
        object_mask: &MaskImage,
    ) -> Result<Self, MpiError> {
        let (w, h) = density.dims();
        ensure_dims((w, h), color.dims())?;
        ensure_dims((w, h), object_mask.dims())?;
        if color.channels() != 3 || density.channels() != 1 {
            return Err(MpiError::InvalidPlanes(
                "color needs 3 channels and density 1".into(),
            ));
        }
        if !(depth.is_finite() && depth > 0.0) {
            return Err(MpiError::InvalidPlanes(format!("plane depth {depth}")));
        }
        if density.data().iter().any(|s| !(*s >= 0.0) || s.is_infinite()) {
            return Err(MpiError::InvalidPlanes(
                "density must be finite and nonnegative".into(),
            ));
        }
        let fp = Footprint::bounding(w, h, |x, y| density.get(x, y, 0) > 0.0);
        let crop = |src: &Raster| {
            Raster::from_fn(fp.width, fp.height, src.channels(), |x, y, c| {
                src.get(fp.x0 + x, fp.y0 + y, c)
            })
        };
        let mask = Raster::from_fn(fp.width, fp.height, 1, |x, y, _| {
            object_mask.get(fp.x0 + x, fp.y0 + y)
        });
        Ok(Self::assemble(
            depth,
            (w, h),
            fp,
            crop(color),
            crop(density),
            mask,
        ))
    }

    fn assemble(
        depth: f64,
        frame: (usize, usize),
        footprint: Footprint,
        color: Raster,
        density: Raster,
        object_mask: Raster,
    ) -> Self {
        let alpha = density
            .data()
            .iter()
            .map(|&s| alpha_from_density(s, 1.0))
            .collect();
        let flow_obj = zero_flow(footprint);
        let flow_bg = zero_flow(footprint);
        Self {
            depth,
            frame,
            footprint,
            color,
            density,
            alpha,
            object_mask,
            flow_obj,
            flow_bg,
        }
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn footprint(&self) -> Footprint {
        self.footprint
    }

    /// Full-frame dimensions.
    pub fn frame(&self) -> (usize, usize) {
        self.frame
    }

    #[inline]
    fn index(&self, x: usize, y: usize) -> Option<usize> {
        self.footprint.local(x as i64, y as i64)
    }

    pub fn density_at(&self, x: usize, y: usize) -> f64 {
        self.index(x, y).map_or(0.0, |i| self.density.data()[i])
    }

    pub fn alpha_at(&self, x: usize, y: usize) -> f64 {
        self.index(x, y).map_or(0.0, |i| self.alpha[i])
    }

    pub fn color_at(&self, x: usize, y: usize) -> [f64; 3] {
        self.index(x, y).map_or([0.0; 3], |i| {
            let px = &self.color.data()[i * 3..i * 3 + 3];
            [px[0], px[1], px[2]]
        })
    }

    pub fn object_mask_at(&self, x: usize, y: usize) -> f64 {
        self.index(x, y).map_or(0.0, |i| self.object_mask.data()[i])
    }

    /// `Some((u, v))` when the stored flow is valid at this pixel.
    pub fn flow_at(&self, channel: FlowChannel, x: usize, y: usize) -> Option<(f64, f64)> {
        let flow = self.flow(channel);
        self.index(x, y).and_then(|i| {
            let px = &flow.data()[i * 3..i * 3 + 3];
            (px[2] > 0.0).then_some((px[0], px[1]))
        })
    }

    fn flow(&self, channel: FlowChannel) -> &Raster {
        match channel {
            FlowChannel::Object => &self.flow_obj,
            FlowChannel::Background => &self.flow_bg,
        }
    }

    /// Copies the footprint region of a full-frame field into a flow channel.
    pub fn set_flow(&mut self, channel: FlowChannel, field: &FlowField) -> Result<(), MpiError> {
        ensure_dims(self.frame, field.dims())?;
        let fp = self.footprint;
        let data = Raster::from_fn(fp.width, fp.height, 3, |x, y, c| {
            let (gx, gy) = (fp.x0 + x, fp.y0 + y);
            if !field.is_valid(gx, gy) {
                return 0.0;
            }
            match c {
                0 => field.get(gx, gy).0,
                1 => field.get(gx, gy).1,
                _ => 1.0,
            }
        });
        match channel {
            FlowChannel::Object => self.flow_obj = data,
            FlowChannel::Background => self.flow_bg = data,
        }
        Ok(())
    }

    /// Copy with density scaled pixelwise by `weight(object_mask)`.
    fn with_density_weight(&self, weight: impl Fn(f64) -> f64) -> Self {
        let density = Raster::from_vec(
            self.footprint.width,
            self.footprint.height,
            1,
            self.density
                .data()
                .iter()
                .zip(self.object_mask.data())
                .map(|(&s, &m)| s * weight(m))
                .collect(),
        );
        let alpha = density
            .data()
            .iter()
            .map(|&s| alpha_from_density(s, 1.0))
            .collect();
        Self {
            density,
            alpha,
            ..self.clone()
        }
    }

    /// Premultiplied bilinear gather at a full-frame position.
    ///
    /// Pixels outside the footprint are empty (alpha 0), so the plane fades
    /// out past its edges instead of smearing its border color. Writes the
    /// alpha-normalized channels (see [`slot`]) into `out` and returns the
    /// interpolated alpha. `out` is left zeroed when alpha is 0.
    pub fn sample(&self, x: f64, y: f64, channel: FlowChannel, out: &mut [f64; slot::COUNT]) -> f64 {
        *out = [0.0; slot::COUNT];
        if self.footprint.is_empty() || !x.is_finite() || !y.is_finite() {
            return 0.0;
        }
        let (x0, fx) = split_coordinate(x);
        let (y0, fy) = split_coordinate(y);
        let flow = self.flow(channel).data();
        let color = self.color.data();
        let mask = self.object_mask.data();
        let mut alpha = 0.0;
        for (dx, dy, w) in [
            (0, 0, (1.0 - fx) * (1.0 - fy)),
            (1, 0, fx * (1.0 - fy)),
            (0, 1, (1.0 - fx) * fy),
            (1, 1, fx * fy),
        ] {
            if w == 0.0 {
                continue;
            }
            let Some(i) = self.footprint.local(x0 + dx, y0 + dy) else {
                continue;
            };
            let wa = w * self.alpha[i];
            if wa == 0.0 {
                continue;
            }
            alpha += wa;
            out[slot::RED] += wa * color[i * 3];
            out[slot::GREEN] += wa * color[i * 3 + 1];
            out[slot::BLUE] += wa * color[i * 3 + 2];
            out[slot::FLOW_U] += wa * flow[i * 3];
            out[slot::FLOW_V] += wa * flow[i * 3 + 1];
            out[slot::FLOW_VALID] += wa * flow[i * 3 + 2];
            out[slot::MASK] += wa * mask[i];
        }
        if alpha > 0.0 {
            for v in out.iter_mut().take(slot::MASK + 1) {
                *v /= alpha;
            }
            out[slot::DEPTH] = self.depth;
        }
        alpha
    }
}

fn zero_flow(fp: Footprint) -> Raster {
    Raster::zeros(fp.width, fp.height, 3)
}

/// Integer cell and fractional offset; offsets within 1e-9 of a cell
/// boundary snap onto it so integer positions sample exactly.
#[inline]
fn split_coordinate(v: f64) -> (i64, f64) {
    const SNAP: f64 = 1e-9;
    let base = v.floor();
    let frac = v - base;
    if frac < SNAP {
        (base as i64, 0.0)
    } else if frac > 1.0 - SNAP {
        (base as i64 + 1, 0.0)
    } else {
        (base as i64, frac)
    }
}

/// A stack of planes ordered front to back.
#[derive(Debug, Clone, PartialEq)]
pub struct Mpi {
    planes: Vec<MpiPlane>,
    intrinsics: CameraIntrinsics,
}

/// Relative tolerance on disparity spacing for externally supplied stacks.
const SPACING_TOLERANCE: f64 = 1e-6;

impl Mpi {
    pub fn new(planes: Vec<MpiPlane>, intrinsics: CameraIntrinsics) -> Result<Self, MpiError> {
        if planes.len() < 2 {
            return Err(MpiError::InvalidPlanes(format!(
                "need at least 2 planes, got {}",
                planes.len()
            )));
        }
        let frame = (intrinsics.width, intrinsics.height);
        for p in &planes {
            ensure_dims(frame, p.frame)?;
        }
        if planes.windows(2).any(|w| !(w[0].depth < w[1].depth)) {
            return Err(MpiError::InvalidPlanes(
                "plane depths must be strictly increasing".into(),
            ));
        }
        let disp: Vec<f64> = planes.iter().map(|p| 1.0 / p.depth).collect();
        let step = (disp[disp.len() - 1] - disp[0]) / (disp.len() - 1) as f64;
        let uneven = disp
            .windows(2)
            .any(|w| ((w[1] - w[0]) - step).abs() > SPACING_TOLERANCE * step.abs().max(1e-12));
        if uneven {
            return Err(MpiError::InvalidPlanes(
                "plane disparities must be evenly spaced".into(),
            ));
        }
        Ok(Self { planes, intrinsics })
    }

    pub fn planes(&self) -> &[MpiPlane] {
        &self.planes
    }

    pub fn planes_mut(&mut self) -> &mut [MpiPlane] {
        &mut self.planes
    }

    pub fn len(&self) -> usize {
        self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.intrinsics.width, self.intrinsics.height)
    }

    pub fn depths(&self) -> Vec<f64> {
        self.planes.iter().map(|p| p.depth).collect()
    }

    /// Disparity gap between neighbouring planes.
    pub fn disparity_step(&self) -> f64 {
        let n = self.planes.len();
        (1.0 / self.planes[0].depth - 1.0 / self.planes[n - 1].depth) / (n - 1) as f64
    }

    /// Fills one flow channel on every plane from a per-plane field generator.
    pub fn fill_flow<F>(&mut self, channel: FlowChannel, mut field_for_depth: F) -> Result<(), MpiError>
    where
        F: FnMut(f64) -> FlowField,
    {
        for plane in &mut self.planes {
            let field = field_for_depth(plane.depth);
            plane.set_flow(channel, &field)?;
        }
        Ok(())
    }

    /// Copy whose per-plane object masks are multiplied by a full-frame mask.
    pub fn with_object_mask(&self, mask: &MaskImage) -> Result<Mpi, MpiError> {
        ensure_dims(self.dims(), mask.dims())?;
        let planes = self
            .planes
            .iter()
            .map(|p| {
                let fp = p.footprint;
                let object_mask = Raster::from_fn(fp.width, fp.height, 1, |x, y, _| {
                    p.object_mask.get(x, y, 0) * mask.get(fp.x0 + x, fp.y0 + y)
                });
                MpiPlane {
                    object_mask,
                    ..p.clone()
                }
            })
            .collect();
        Ok(Mpi {
            planes,
            intrinsics: self.intrinsics,
        })
    }

    /// Number of planes whose density is nonzero somewhere.
    pub fn occupied_planes(&self) -> usize {
        self.planes
            .iter()
            .filter(|p| p.density.data().iter().any(|&s| s > 0.0))
            .count()
    }
}

/// Nearest-rank percentile of an already sorted slice.
fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let idx = (q * (sorted.len() - 1) as f64).round() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

/// Near and far plane depths for a depth map: the 1st and 99th
/// percentiles, or the full range when those coincide.
pub fn depth_range(depth: &DepthMap) -> Result<(f64, f64), MpiError> {
    let mut sorted = depth.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (percentile_sorted(&sorted, 0.01), percentile_sorted(&sorted, 0.99));
    if lo < hi {
        return Ok((lo, hi));
    }
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    if min < max {
        Ok((min, max))
    } else {
        Err(MpiError::EmptyDepthRange(min))
    }
}

/// Index of the plane whose disparity is nearest to `1 / depth`; pixels
/// outside the plane range land in the end bins.
pub fn assign_plane(depth: f64, d_near: f64, d_far: f64, n: usize) -> usize {
    let near = 1.0 / d_near;
    let step = (near - 1.0 / d_far) / (n - 1) as f64;
    let k = ((near - 1.0 / depth) / step).round();
    k.clamp(0.0, (n - 1) as f64) as usize
}

/// Hard-assignment MPI with the plane range taken from the depth map.
pub fn build_mpi(
    image: &Raster,
    depth: &DepthMap,
    mask: &MaskImage,
    k: &CameraIntrinsics,
    n_planes: usize,
) -> Result<Mpi, MpiError> {
    check_inputs(image, depth, mask, k)?;
    let (d_near, d_far) = depth_range(depth)?;
    build_mpi_with_range(image, depth, mask, k, n_planes, d_near, d_far)
}

fn check_inputs(
    image: &Raster,
    depth: &DepthMap,
    mask: &MaskImage,
    k: &CameraIntrinsics,
) -> Result<(), MpiError> {
    let dims = image.dims();
    ensure_dims(dims, depth.dims())?;
    ensure_dims(dims, mask.dims())?;
    ensure_dims(dims, (k.width, k.height))?;
    if image.channels() != 3 {
        return Err(MpiError::InvalidPlanes(format!(
            "image needs 3 channels, got {}",
            image.channels()
        )));
    }
    Ok(())
}

/// Hard-assignment MPI over an explicit plane range.
///
/// Every pixel is deposited, fully opaque, on exactly one plane: the one
/// nearest in disparity. Flow channels start at zero.
pub fn build_mpi_with_range(
    image: &Raster,
    depth: &DepthMap,
    mask: &MaskImage,
    k: &CameraIntrinsics,
    n_planes: usize,
    d_near: f64,
    d_far: f64,
) -> Result<Mpi, MpiError> {
    check_inputs(image, depth, mask, k)?;
    let depths = plane_depths(d_near, d_far, n_planes)?;
    let (w, h) = image.dims();
    let owner: Vec<usize> = depth
        .values()
        .iter()
        .map(|&d| assign_plane(d, d_near, d_far, n_planes))
        .collect();
    let planes = depths
        .iter()
        .enumerate()
        .map(|(n, &plane_depth)| {
            let fp = Footprint::bounding(w, h, |x, y| owner[y * w + x] == n);
            let owns = |x: usize, y: usize| owner[(fp.y0 + y) * w + fp.x0 + x] == n;
            let color = Raster::from_fn(fp.width, fp.height, 3, |x, y, c| {
                if owns(x, y) {
                    image.get(fp.x0 + x, fp.y0 + y, c)
                } else {
                    0.0
                }
            });
            let density = Raster::from_fn(fp.width, fp.height, 1, |x, y, _| {
                if owns(x, y) {
                    OPAQUE_DENSITY
                } else {
                    0.0
                }
            });
            let object_mask = Raster::from_fn(fp.width, fp.height, 1, |x, y, _| {
                if owns(x, y) {
                    mask.get(fp.x0 + x, fp.y0 + y)
                } else {
                    0.0
                }
            });
            MpiPlane::assemble(plane_depth, (w, h), fp, color, density, object_mask)
        })
        .collect();
    Mpi::new(planes, *k)
}

/// Splits into (object, background) stacks by scaling density with the
/// object mask and its complement.
pub fn split_mpi(mpi: &Mpi) -> (Mpi, Mpi) {
    let object = mpi
        .planes
        .iter()
        .map(|p| p.with_density_weight(|m| m))
        .collect();
    let background = mpi
        .planes
        .iter()
        .map(|p| p.with_density_weight(|m| 1.0 - m))
        .collect();
    (
        Mpi {
            planes: object,
            intrinsics: mpi.intrinsics,
        },
        Mpi {
            planes: background,
            intrinsics: mpi.intrinsics,
        },
    )
}

/// Bilinear sample of every channel at `(x, y)`, clamping to the border.
pub fn bilinear_resample(grid: &Raster, x: f64, y: f64) -> Vec<f64> {
    let (w, h) = grid.dims();
    assert!(w > 0 && h > 0, "cannot sample an empty grid");
    let xc = x.clamp(0.0, (w - 1) as f64);
    let yc = y.clamp(0.0, (h - 1) as f64);
    let (x0, fx) = split_coordinate(xc);
    let (y0, fy) = split_coordinate(yc);
    let x0 = (x0.max(0) as usize).min(w - 1);
    let y0 = (y0.max(0) as usize).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    (0..grid.channels())
        .map(|c| {
            let top = grid.get(x0, y0, c) * (1.0 - fx) + grid.get(x1, y0, c) * fx;
            let bottom = grid.get(x0, y1, c) * (1.0 - fx) + grid.get(x1, y1, c) * fx;
            top * (1.0 - fy) + bottom * fy
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(w: usize, h: usize) -> CameraIntrinsics {
        CameraIntrinsics::centered(100.0, w, h).unwrap()
    }

    fn gray(w: usize, h: usize) -> Raster {
        Raster::from_fn(w, h, 3, |x, y, c| ((x + 2 * y + c) % 7) as f64 / 7.0)
    }

    #[test]
    fn plane_depths_small_example() {
        let d = plane_depths(1.0, 3.0, 3).unwrap();
        assert_eq!(d[0], 1.0);
        assert!((d[1] - 1.5).abs() < 1e-15);
        assert_eq!(d[2], 3.0);
    }

    #[test]
    fn plane_depths_narrow_range_still_increasing() {
        let d = plane_depths(2.0, 2.0 + 1e-9, 2).unwrap();
        assert!(d[0] < d[1]);
    }

    #[test]
    fn plane_depths_sixty_four() {
        let d = plane_depths(0.5, 80.0, 64).unwrap();
        assert_eq!(d.len(), 64);
        assert!(d.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn plane_depths_rejects_bad_input() {
        assert!(plane_depths(0.0, 1.0, 4).is_err());
        assert!(plane_depths(2.0, 1.0, 4).is_err());
        assert!(plane_depths(1.0, 2.0, 1).is_err());
        assert!(plane_depths(1.0, f64::INFINITY, 4).is_err());
    }

    #[test]
    fn constant_depth_is_refused() {
        let (w, h) = (8, 6);
        let depth = DepthMap::constant(w, h, 5.0).unwrap();
        let err = build_mpi(&gray(w, h), &depth, &MaskImage::zeros(w, h), &k(w, h), 2);
        assert_eq!(err.unwrap_err(), MpiError::EmptyDepthRange(5.0));
    }

    #[test]
    fn two_depth_scene_occupies_two_planes() {
        let (w, h) = (16, 10);
        let depth = DepthMap::from_fn(w, h, |x, _| if x < w / 2 { 2.0 } else { 8.0 }).unwrap();
        let mpi = build_mpi(&gray(w, h), &depth, &MaskImage::zeros(w, h), &k(w, h), 8).unwrap();
        assert_eq!(mpi.len(), 8);
        assert_eq!(mpi.occupied_planes(), 2);
        assert_eq!(mpi.planes()[0].depth(), 2.0);
        assert_eq!(mpi.planes()[7].depth(), 8.0);
    }

    #[test]
    fn each_pixel_is_opaque_on_exactly_one_plane() {
        let (w, h) = (20, 12);
        let depth = DepthMap::from_fn(w, h, |x, y| 1.0 + 0.37 * x as f64 + 0.11 * y as f64).unwrap();
        let mpi = build_mpi(&gray(w, h), &depth, &MaskImage::zeros(w, h), &k(w, h), 16).unwrap();
        for y in 0..h {
            for x in 0..w {
                let owners: Vec<_> = mpi
                    .planes()
                    .iter()
                    .filter(|p| p.density_at(x, y) > 0.0)
                    .collect();
                assert_eq!(owners.len(), 1, "pixel ({x}, {y})");
                assert_eq!(owners[0].alpha_at(x, y), 1.0);
                assert_eq!(owners[0].color_at(x, y)[0], gray(w, h).get(x, y, 0));
            }
        }
    }

    #[test]
    fn zero_mask_gives_empty_object_channels() {
        let (w, h) = (9, 7);
        let depth = DepthMap::from_fn(w, h, |x, _| 1.0 + x as f64).unwrap();
        let mpi = build_mpi(&gray(w, h), &depth, &MaskImage::zeros(w, h), &k(w, h), 4).unwrap();
        for p in mpi.planes() {
            for y in 0..h {
                for x in 0..w {
                    assert_eq!(p.object_mask_at(x, y), 0.0);
                }
            }
        }
    }

    #[test]
    fn split_extremes() {
        let (w, h) = (9, 7);
        let depth = DepthMap::from_fn(w, h, |x, _| 1.0 + x as f64).unwrap();
        let k = k(w, h);
        let ones = build_mpi(&gray(w, h), &depth, &MaskImage::ones(w, h), &k, 4).unwrap();
        let (_, bg) = split_mpi(&ones);
        assert!(bg.planes().iter().all(|p| p.density.data().iter().all(|&s| s == 0.0)));
        let zeros = build_mpi(&gray(w, h), &depth, &MaskImage::zeros(w, h), &k, 4).unwrap();
        let (obj, _) = split_mpi(&zeros);
        assert!(obj.planes().iter().all(|p| p.density.data().iter().all(|&s| s == 0.0)));
    }

    #[test]
    fn split_checkerboard_conserves_density() {
        let (w, h) = (12, 8);
        let depth = DepthMap::from_fn(w, h, |x, y| 1.0 + ((x * y) % 5) as f64).unwrap();
        let mask = MaskImage::from_fn(w, h, |x, y| ((x + y) % 2) as f64);
        let mpi = build_mpi(&gray(w, h), &depth, &mask, &k(w, h), 6).unwrap();
        let (obj, bg) = split_mpi(&mpi);
        for ((p, o), b) in mpi.planes().iter().zip(obj.planes()).zip(bg.planes()) {
            assert_eq!(p.depth(), o.depth());
            assert_eq!(p.depth(), b.depth());
            for y in 0..h {
                for x in 0..w {
                    assert_eq!(o.density_at(x, y) + b.density_at(x, y), p.density_at(x, y));
                    assert_eq!(o.color_at(x, y), p.color_at(x, y));
                }
            }
        }
    }

    #[test]
    fn bilinear_examples() {
        let g = Raster::from_fn(10, 10, 1, |x, y, _| (x * 10 + y) as f64);
        assert_eq!(bilinear_resample(&g, 3.0, 4.0), vec![34.0]);
        let quad = Raster::from_vec(2, 2, 1, vec![0.0, 0.0, 1.0, 1.0]);
        assert_eq!(bilinear_resample(&quad, 0.5, 0.5), vec![0.5]);
        let clamped = bilinear_resample(&g, -3.7, 2.2);
        let edge = bilinear_resample(&g, 0.0, 2.2);
        assert_eq!(clamped, edge);
        assert!((edge[0] - 2.2).abs() < 1e-12);
    }

    #[test]
    fn plane_sample_is_exact_at_integer_positions() {
        let (w, h) = (6, 5);
        let depth = DepthMap::from_fn(w, h, |x, _| if x < 3 { 1.0 } else { 4.0 }).unwrap();
        let img = gray(w, h);
        let mpi = build_mpi(&img, &depth, &MaskImage::zeros(w, h), &k(w, h), 2).unwrap();
        let mut out = [0.0; slot::COUNT];
        let a = mpi.planes()[0].sample(1.0 + 1e-12, 2.0, FlowChannel::Object, &mut out);
        assert_eq!(a, 1.0);
        assert_eq!(out[slot::GREEN], img.get(1, 2, 1));
        assert_eq!(out[slot::DEPTH], 1.0);
        // half a pixel past the plane edge: half coverage, edge color kept
        let a = mpi.planes()[0].sample(2.5, 2.0, FlowChannel::Object, &mut out);
        assert!((a - 0.5).abs() < 1e-15);
        assert!((out[slot::RED] - img.get(2, 2, 0)).abs() < 1e-15);
        let a = mpi.planes()[0].sample(-5.0, 2.0, FlowChannel::Object, &mut out);
        assert_eq!(a, 0.0);
    }

    #[test]
    fn alpha_density_conversions() {
        assert_eq!(alpha_from_density(0.0, 1.0), 0.0);
        assert_eq!(alpha_from_density(OPAQUE_DENSITY, 1.0), 1.0);
        assert_eq!(density_from_alpha(1.0), OPAQUE_DENSITY);
        let s = density_from_alpha(0.3);
        assert!((alpha_from_density(s, 1.0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn rebuild_is_identical() {
        let (w, h) = (11, 9);
        let depth = DepthMap::from_fn(w, h, |x, y| 2.0 + (x as f64).sin() + y as f64 * 0.3).unwrap();
        let mask = MaskImage::from_fn(w, h, |x, _| (x > 4) as u8 as f64);
        let a = build_mpi(&gray(w, h), &depth, &mask, &k(w, h), 5).unwrap();
        let b = build_mpi(&gray(w, h), &depth, &mask, &k(w, h), 5).unwrap();
        assert_eq!(a, b);
    }
}
