//! Plane-induced homographies between the source camera and a target pose.

use nalgebra::{Matrix3, Vector3};

use super::RenderError;
use crate::camera::{CameraIntrinsics, CameraPose};
use crate::mpi::bilinear_resample;
use crate::raster::{FlowField, Raster};

/// Determinant floor below which a plane homography is treated as singular.
pub const SINGULAR_DET: f64 = 1e-12;

/// `R + t·nᵀ/d` for the fronto-parallel plane `z = d`, normal `[0, 0, 1]`.
fn plane_transfer(pose: &CameraPose, d: f64) -> Matrix3<f64> {
    let n = Vector3::z();
    pose.rotation + pose.translation * n.transpose() / d
}

/// Homography taking source pixels on the plane at depth `d` to target
/// pixels: `K (R + t nᵀ / d) K⁻¹`.
pub fn plane_homography(k: &CameraIntrinsics, pose: &CameraPose, d: f64) -> Matrix3<f64> {
    k.matrix() * plane_transfer(pose, d) * k.inverse_matrix()
}

/// Inverse plane homography (target pixel to source pixel).
pub fn inverse_plane_homography(
    k: &CameraIntrinsics,
    pose: &CameraPose,
    d: f64,
) -> Result<Matrix3<f64>, RenderError> {
    let transfer = plane_transfer(pose, d);
    let det = transfer.determinant();
    if !(det.abs() >= SINGULAR_DET) {
        return Err(RenderError::SingularHomography { depth: d, det });
    }
    let inv = transfer
        .try_inverse()
        .ok_or(RenderError::SingularHomography { depth: d, det })?;
    Ok(k.matrix() * inv * k.inverse_matrix())
}

/// Maps a target pixel through an inverse plane homography. `None` when
/// the target ray meets the plane behind the target camera.
#[inline]
pub(crate) fn source_position(h_inv: &Matrix3<f64>, x: f64, y: f64) -> Option<(f64, f64)> {
    let q = h_inv * Vector3::new(x, y, 1.0);
    if q.z > 0.0 {
        Some((q.x / q.z, q.y / q.z))
    } else {
        None
    }
}

/// Displacement of every source pixel lying on the plane at depth `d`.
///
/// Pixels whose transferred point falls behind the target camera are
/// flagged invalid.
pub fn plane_flow(k: &CameraIntrinsics, pose: &CameraPose, d: f64) -> FlowField {
    let h = plane_homography(k, pose, d);
    FlowField::from_fn(k.width, k.height, |x, y| {
        let (xs, ys) = (x as f64, y as f64);
        let q = h * Vector3::new(xs, ys, 1.0);
        (q.z > 0.0).then(|| (q.x / q.z - xs, q.y / q.z - ys))
    })
}

const EDGE_SNAP: f64 = 1e-9;

/// Backward-warps a full-frame grid lying on the plane at depth `d`.
///
/// Every target pixel samples `grid` bilinearly at `H⁻¹ · p_t`. Samples
/// that land outside the source frame, or whose ray meets the plane behind
/// the target camera, are zero.
pub fn plane_homography_gather(
    k: &CameraIntrinsics,
    pose: &CameraPose,
    d: f64,
    grid: &Raster,
) -> Result<Raster, RenderError> {
    let (w, h) = grid.dims();
    let h_inv = inverse_plane_homography(k, pose, d)?;
    let max_x = (w - 1) as f64 + EDGE_SNAP;
    let max_y = (h - 1) as f64 + EDGE_SNAP;
    let mut out = Raster::zeros(w, h, grid.channels());
    for y in 0..h {
        for x in 0..w {
            let Some((sx, sy)) = source_position(&h_inv, x as f64, y as f64) else {
                continue;
            };
            if sx < -EDGE_SNAP || sy < -EDGE_SNAP || sx > max_x || sy > max_y {
                continue;
            }
            let v = bilinear_resample(grid, sx, sy);
            out.pixel_mut(x, y).copy_from_slice(&v);
        }
    }
    Ok(out)
}
