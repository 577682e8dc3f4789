use nalgebra::Matrix3;
use rayon::prelude::*;

use super::composite::{Accumulator, EMPTY_COVERAGE};
use super::warp::{inverse_plane_homography, source_position};
use super::RenderError;
use crate::camera::{CameraIntrinsics, CameraPose};
use crate::mpi::{slot, FlowChannel, Mpi};
use crate::raster::{FlowField, MaskImage, Raster};

/// Everything produced by rendering one MPI under one pose.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedView {
    /// Front-to-back composite of plane colors in the target view.
    pub image: Raster,
    /// Composited depth normalized by coverage; 0 where empty.
    pub depth: Raster,
    /// Accumulated opacity in the target view.
    pub coverage: MaskImage,
    /// Composite of the plane object-mask channel in the target view.
    pub object_mask: MaskImage,
    /// Selected flow channel composited over the source-view planes; this is
    /// the per-source-pixel displacement field.
    pub flow: FlowField,
    /// Selected flow channel warped into the target view and composited with
    /// the same weights as `image`.
    pub target_flow: FlowField,
}

impl RenderedView {
    pub fn dims(&self) -> (usize, usize) {
        self.image.dims()
    }

    /// Composited depth, or `None` where coverage is below the empty floor.
    pub fn depth_at(&self, x: usize, y: usize) -> Option<f64> {
        (self.coverage.get(x, y) > EMPTY_COVERAGE).then(|| self.depth.get(x, y, 0))
    }

    /// Color divided by coverage, or black where empty.
    pub fn unpremultiplied(&self, x: usize, y: usize) -> [f64; 3] {
        let c = self.coverage.get(x, y);
        if c > EMPTY_COVERAGE {
            let px = self.image.pixel(x, y);
            [px[0] / c, px[1] / c, px[2] / c]
        } else {
            [0.0; 3]
        }
    }
}

/// Tolerance used to decide that every contributor of a flow composite was
/// valid.
const VALID_EPS: f64 = 1e-9;

struct PixelResult {
    acc: Accumulator<{ slot::COUNT }>,
}

impl PixelResult {
    fn flow(&self) -> Option<(f64, f64)> {
        let acc = &self.acc;
        let valid = acc.coverage > EMPTY_COVERAGE
            && acc.values[slot::FLOW_VALID] >= acc.coverage - VALID_EPS;
        valid.then(|| {
            (
                acc.values[slot::FLOW_U] / acc.coverage,
                acc.values[slot::FLOW_V] / acc.coverage,
            )
        })
    }
}

fn assemble(width: usize, height: usize, pixels: Vec<PixelResult>) -> (Raster, Raster, MaskImage, MaskImage, FlowField) {
    let n = width * height;
    let mut image = Vec::with_capacity(n * 3);
    let mut depth = Vec::with_capacity(n);
    let mut coverage = Vec::with_capacity(n);
    let mut mask = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for px in &pixels {
        let acc = &px.acc;
        image.extend_from_slice(&acc.values[slot::RED..=slot::BLUE]);
        depth.push(acc.normalized(slot::DEPTH).unwrap_or(0.0));
        coverage.push(acc.coverage);
        mask.push(acc.values[slot::MASK]);
        match px.flow() {
            Some((fu, fv)) => {
                u.push(fu);
                v.push(fv);
                valid.push(true);
            }
            None => {
                u.push(0.0);
                v.push(0.0);
                valid.push(false);
            }
        }
    }
    (
        Raster::from_vec(width, height, 3, image),
        Raster::from_vec(width, height, 1, depth),
        MaskImage::from_vec(width, height, coverage),
        MaskImage::from_vec(width, height, mask),
        FlowField::from_parts(width, height, u, v, valid),
    )
}

/// Composites the planes in the source view without any warp.
fn composite_source(mpi: &Mpi, channel: FlowChannel) -> Vec<PixelResult> {
    let (w, h) = mpi.dims();
    (0..h)
        .into_par_iter()
        .flat_map_iter(|y| {
            (0..w).map(move |x| {
                let mut acc = Accumulator::<{ slot::COUNT }>::default();
                let mut buf = [0.0; slot::COUNT];
                for plane in mpi.planes() {
                    let alpha = plane.sample(x as f64, y as f64, channel, &mut buf);
                    acc.add(alpha, &buf);
                    if acc.is_opaque() {
                        break;
                    }
                }
                PixelResult { acc }
            })
        })
        .collect()
}

fn composite_target(mpi: &Mpi, h_inv: &[Matrix3<f64>], channel: FlowChannel) -> Vec<PixelResult> {
    let (w, h) = mpi.dims();
    (0..h)
        .into_par_iter()
        .flat_map_iter(|y| {
            (0..w).map(move |x| {
                let mut acc = Accumulator::<{ slot::COUNT }>::default();
                let mut buf = [0.0; slot::COUNT];
                for (plane, hi) in mpi.planes().iter().zip(h_inv) {
                    let Some((sx, sy)) = source_position(hi, x as f64, y as f64) else {
                        continue;
                    };
                    let alpha = plane.sample(sx, sy, channel, &mut buf);
                    acc.add(alpha, &buf);
                    if acc.is_opaque() {
                        break;
                    }
                }
                PixelResult { acc }
            })
        })
        .collect()
}

/// Renders `mpi` (built in the camera `k`) under `pose`.
///
/// Color, mask, depth and the chosen flow channel of every plane are
/// warped with that plane's homography and composited front to back with
/// one shared set of weights. The source-frame flow composite is returned
/// alongside.
pub fn render_view(
    mpi: &Mpi,
    k: &CameraIntrinsics,
    pose: &CameraPose,
    channel: FlowChannel,
) -> Result<RenderedView, RenderError> {
    let h_inv = mpi
        .planes()
        .iter()
        .map(|p| inverse_plane_homography(k, pose, p.depth()))
        .collect::<Result<Vec<_>, _>>()?;
    let (w, h) = mpi.dims();
    let target = composite_target(mpi, &h_inv, channel);
    let (image, depth, coverage, object_mask, target_flow) = assemble(w, h, target);
    let source = composite_source(mpi, channel);
    let (_, _, _, _, flow) = assemble(w, h, source);
    Ok(RenderedView {
        image,
        depth,
        coverage,
        object_mask,
        flow,
        target_flow,
    })
}

/// The source-view composite of an MPI: what it looks like unwarped.
pub fn flatten(mpi: &Mpi, channel: FlowChannel) -> RenderedView {
    let (w, h) = mpi.dims();
    let (image, depth, coverage, object_mask, flow) = assemble(w, h, composite_source(mpi, channel));
    RenderedView {
        image,
        depth,
        coverage,
        object_mask,
        target_flow: flow.clone(),
        flow,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpi::{build_mpi, build_mpi_with_range};
    use crate::raster::DepthMap;
    use crate::renderer::warp::plane_flow;
    use nalgebra::Vector3;

    fn texture(w: usize, h: usize) -> Raster {
        Raster::from_fn(w, h, 3, |x, y, c| {
            0.5 + 0.4 * ((x as f64 * 0.3 + c as f64).sin() * (y as f64 * 0.2).cos())
        })
    }

    fn k(w: usize, h: usize) -> CameraIntrinsics {
        CameraIntrinsics::centered(60.0, w, h).unwrap()
    }

    fn with_flows(mut mpi: Mpi, k: &CameraIntrinsics, pose: &CameraPose) -> Mpi {
        mpi.fill_flow(FlowChannel::Background, |d| plane_flow(k, pose, d)).unwrap();
        mpi.fill_flow(FlowChannel::Object, |d| plane_flow(k, pose, d)).unwrap();
        mpi
    }

    #[test]
    fn identity_pose_reproduces_flat_composite() {
        let (w, h) = (32, 24);
        let depth = DepthMap::from_fn(w, h, |x, y| 2.0 + ((x / 5 + y / 7) % 4) as f64).unwrap();
        let k = k(w, h);
        let mpi = with_flows(
            build_mpi(&texture(w, h), &depth, &MaskImage::zeros(w, h), &k, 16).unwrap(),
            &k,
            &CameraPose::identity(),
        );
        let view = render_view(&mpi, &k, &CameraPose::identity(), FlowChannel::Background).unwrap();
        let flat = flatten(&mpi, FlowChannel::Background);
        for (a, b) in view.image.data().iter().zip(flat.image.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in view.image.data().iter().zip(texture(w, h).data()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(view.flow.valid_count(), w * h);
        assert!(view.flow.max_abs_component() < 1e-9);
    }

    #[test]
    fn single_plane_translation_shifts_image() {
        let (w, h) = (40, 30);
        let k = k(w, h);
        let img = texture(w, h);
        let depth = DepthMap::constant(w, h, 6.0).unwrap();
        // f·t_x/d = 60·0.3/6 = 3 px
        let pose = CameraPose::from_translation(Vector3::new(0.3, 0.0, 0.0));
        let mpi = build_mpi_with_range(&img, &depth, &MaskImage::zeros(w, h), &k, 2, 6.0, 12.0).unwrap();
        let mpi = with_flows(mpi, &k, &pose);
        let view = render_view(&mpi, &k, &pose, FlowChannel::Background).unwrap();
        for y in 0..h {
            for x in 0..w {
                let (u, v) = view.flow.get(x, y);
                assert!((u - 3.0).abs() < 1e-9 && v.abs() < 1e-9);
                if x >= 3 {
                    for c in 0..3 {
                        assert!((view.image.get(x, y, c) - img.get(x - 3, y, c)).abs() < 1e-9);
                    }
                    assert!((view.depth_at(x, y).unwrap() - 6.0).abs() < 1e-12);
                } else {
                    assert_eq!(view.coverage.get(x, y), 0.0);
                }
            }
        }
    }

    #[test]
    fn nearer_plane_moves_more_under_forward_motion() {
        let (w, h) = (40, 30);
        let k = k(w, h);
        let depth = DepthMap::from_fn(w, h, |x, _| if x < 20 { 2.0 } else { 8.0 }).unwrap();
        let pose = CameraPose::from_translation(Vector3::new(0.1, 0.0, 0.2));
        let mpi = with_flows(
            build_mpi(&texture(w, h), &depth, &MaskImage::zeros(w, h), &k, 8).unwrap(),
            &k,
            &pose,
        );
        let view = render_view(&mpi, &k, &pose, FlowChannel::Background).unwrap();
        let mag = |x, y| {
            let (u, v): (f64, f64) = view.flow.get(x, y);
            u.hypot(v)
        };
        // mirror-image pixels about the principal point in x
        assert!(mag(5, 15) > mag(35, 15));
        assert!(mag(15, 10) > mag(25, 10));
    }
}
