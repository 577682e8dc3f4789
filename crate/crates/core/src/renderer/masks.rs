//! Mask algebra for merging the object and background renders.

use super::composite::EMPTY_COVERAGE;
use super::view::RenderedView;
use crate::raster::{ensure_dims, DimensionMismatch, FlowField, MaskImage, Raster, MASK_THRESHOLD};

/// `F = M · F_obj + (1 − M) · F_bg` with the source-view object mask `M`.
///
/// Validity follows the object field where `M` is set and the background
/// field elsewhere.
pub fn compose_flows(
    f_obj: &FlowField,
    f_bg: &FlowField,
    m: &MaskImage,
) -> Result<FlowField, DimensionMismatch> {
    let dims = m.dims();
    ensure_dims(dims, f_obj.dims())?;
    ensure_dims(dims, f_bg.dims())?;
    let n = dims.0 * dims.1;
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for i in 0..n {
        let w = m.values()[i];
        u.push(w * f_obj.u()[i] + (1.0 - w) * f_bg.u()[i]);
        v.push(w * f_obj.v()[i] + (1.0 - w) * f_bg.v()[i]);
        valid.push(if w >= MASK_THRESHOLD {
            f_obj.valid()[i]
        } else {
            f_bg.valid()[i]
        });
    }
    Ok(FlowField::from_parts(dims.0, dims.1, u, v, valid))
}

/// `M_occ = (1 − M_bg) ⊙ M_obj ⊙ [D_bg < D_obj]`.
///
/// Masks are target-view coverages, binarized at the mask threshold. The
/// depth predicate only holds where both coverages exceed the empty floor.
pub fn occlusion_mask(
    m_bg_t: &MaskImage,
    m_obj_t: &MaskImage,
    d_bg_t: &Raster,
    d_obj_t: &Raster,
) -> Result<MaskImage, DimensionMismatch> {
    let dims = m_obj_t.dims();
    ensure_dims(dims, m_bg_t.dims())?;
    ensure_dims(dims, d_bg_t.dims())?;
    ensure_dims(dims, d_obj_t.dims())?;
    let bits = (0..dims.0 * dims.1)
        .map(|i| {
            let (cb, co) = (m_bg_t.values()[i], m_obj_t.values()[i]);
            let closer = cb > EMPTY_COVERAGE
                && co > EMPTY_COVERAGE
                && d_bg_t.data()[i] < d_obj_t.data()[i];
            cb < MASK_THRESHOLD && co >= MASK_THRESHOLD && closer
        })
        .collect::<Vec<_>>();
    Ok(MaskImage::from_bools(dims.0, dims.1, &bits))
}

/// `M_inp = (1 − M_bg) ⊙ (1 − M_obj)` on binarized coverages.
pub fn inpaint_mask(m_obj_t: &MaskImage, m_bg_t: &MaskImage) -> Result<MaskImage, DimensionMismatch> {
    let dims = m_obj_t.dims();
    ensure_dims(dims, m_bg_t.dims())?;
    let bits = m_obj_t
        .values()
        .iter()
        .zip(m_bg_t.values())
        .map(|(&o, &b)| o < MASK_THRESHOLD && b < MASK_THRESHOLD)
        .collect::<Vec<_>>();
    Ok(MaskImage::from_bools(dims.0, dims.1, &bits))
}

/// Layered paste of the two renders.
///
/// Pixels inside `M_obj` take the object color. Remaining pixels inside
/// `M_bg` and outside `M_occ` take the background color. Everything else is
/// left black for the hole filler. Colors are divided by coverage so
/// partially covered edge pixels are not darkened.
pub fn compose_images(
    i_obj: &RenderedView,
    i_bg: &RenderedView,
    m_obj_t: &MaskImage,
    m_bg_t: &MaskImage,
    m_occ: &MaskImage,
) -> Result<Raster, DimensionMismatch> {
    let dims = m_obj_t.dims();
    for d in [i_obj.dims(), i_bg.dims(), m_bg_t.dims(), m_occ.dims()] {
        ensure_dims(dims, d)?;
    }
    let (w, h) = dims;
    let mut out = Raster::zeros(w, h, 3);
    for y in 0..h {
        for x in 0..w {
            let color = if m_obj_t.is_set(x, y) {
                i_obj.unpremultiplied(x, y)
            } else if m_bg_t.is_set(x, y) && !m_occ.is_set(x, y) {
                i_bg.unpremultiplied(x, y)
            } else {
                continue;
            };
            out.pixel_mut(x, y).copy_from_slice(&color);
        }
    }
    Ok(out)
}
