//! KITTI flow PNG: 16-bit RGB with `R = u·64 + 2^15`, `G = v·64 + 2^15`
//! (rounded) and `B` the validity bit.

use std::path::Path;

use image::{ImageBuffer, Rgb};

use super::{codec_err, open_image, DataError};
use crate::raster::FlowField;

pub const KITTI_SCALE: f64 = 64.0;
pub const KITTI_OFFSET: f64 = 32768.0;
/// Components must be strictly inside `(-512, 512)`.
pub const KITTI_LIMIT: f64 = 512.0;

pub type KittiImage = ImageBuffer<Rgb<u16>, Vec<u16>>;

fn quantize(c: f64) -> Option<u16> {
    if !(c.abs() < KITTI_LIMIT) {
        return None;
    }
    let q = (c * KITTI_SCALE + KITTI_OFFSET).round();
    (0.0..=u16::MAX as f64).contains(&q).then_some(q as u16)
}

/// Whether every valid pixel fits the encoding.
pub fn kitti_encodable(flow: &FlowField) -> bool {
    (0..flow.valid().len())
        .all(|i| !flow.valid()[i] || (quantize(flow.u()[i]).is_some() && quantize(flow.v()[i]).is_some()))
}

/// Invalid pixels are stored as zero flow with a cleared validity bit.
pub fn encode_kitti(flow: &FlowField) -> Result<KittiImage, DataError> {
    let (w, h) = flow.dims();
    let mut img = KittiImage::new(w as u32, h as u32);
    for (x, y, px) in img.enumerate_pixels_mut() {
        let (x, y) = (x as usize, y as usize);
        *px = if flow.is_valid(x, y) {
            let (u, v) = flow.get(x, y);
            match (quantize(u), quantize(v)) {
                (Some(qu), Some(qv)) => Rgb([qu, qv, 1]),
                _ => return Err(DataError::OutOfRange { x, y, u, v }),
            }
        } else {
            Rgb([KITTI_OFFSET as u16, KITTI_OFFSET as u16, 0])
        };
    }
    Ok(img)
}

pub fn decode_kitti(img: &KittiImage) -> FlowField {
    let (w, h) = (img.width() as usize, img.height() as usize);
    FlowField::from_fn(w, h, |x, y| {
        let Rgb([r, g, b]) = *img.get_pixel(x as u32, y as u32);
        (b != 0).then(|| {
            (
                (r as f64 - KITTI_OFFSET) / KITTI_SCALE,
                (g as f64 - KITTI_OFFSET) / KITTI_SCALE,
            )
        })
    })
}

pub fn write_kitti_png(flow: &FlowField, path: &Path) -> Result<(), DataError> {
    encode_kitti(flow)?.save_with_format(path, image::ImageFormat::Png).map_err(codec_err(path))
}

pub fn read_kitti_png(path: &Path) -> Result<FlowField, DataError> {
    match open_image(path)? {
        image::DynamicImage::ImageRgb16(img) => Ok(decode_kitti(&img)),
        other => Err(DataError::UnsupportedFormat(format!(
            "{}: KITTI flow must be 16-bit RGB, found {:?}",
            path.display(),
            other.color()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(u: f64, v: f64) -> FlowField {
        FlowField::from_fn(1, 1, |_, _| Some((u, v)))
    }

    #[test]
    fn stored_values() {
        let img = encode_kitti(&single(0.0, 1.0)).unwrap();
        assert_eq!(img.get_pixel(0, 0).0, [32768, 32832, 1]);
        let img = encode_kitti(&single(-1.5, 511.98)).unwrap();
        assert_eq!(img.get_pixel(0, 0).0, [32672, 65535, 1]);
    }

    #[test]
    fn out_of_range_is_rejected() {
        assert!(matches!(encode_kitti(&single(600.0, 0.0)), Err(DataError::OutOfRange { .. })));
        assert!(matches!(encode_kitti(&single(0.0, -512.0)), Err(DataError::OutOfRange { .. })));
        assert!(!kitti_encodable(&single(600.0, 0.0)));
        let mut invalid = FlowField::zeros(1, 1);
        invalid.set(0, 0, 900.0, 0.0, false);
        assert!(kitti_encodable(&invalid));
        assert_eq!(encode_kitti(&invalid).unwrap().get_pixel(0, 0).0, [32768, 32768, 0]);
    }

    #[test]
    fn decode_inverts_within_half_step() {
        for &c in &[-511.98, -3.3333, 0.0, 0.007, 17.25, 511.98] {
            let back = decode_kitti(&encode_kitti(&single(c, -c)).unwrap());
            let (u, v) = back.get(0, 0);
            assert!((u - c).abs() <= 1.0 / 128.0 && (v + c).abs() <= 1.0 / 128.0);
        }
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.png");
        let f = FlowField::from_fn(5, 3, |x, y| (x != 2).then_some((x as f64 * 0.5, y as f64 - 1.0)));
        write_kitti_png(&f, &path).unwrap();
        assert_eq!(read_kitti_png(&path).unwrap(), decode_kitti(&encode_kitti(&f).unwrap()));
        assert_eq!(read_kitti_png(&path).unwrap().valid(), f.valid());
    }
}
