//! RGB images and masks as PNG. Values live in `[0, 1]`; writing clamps and
//! rounds to the nearest code.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, Rgb, RgbImage};

use super::{codec_err, open_image, DataError};
use crate::raster::{MaskImage, Raster};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

fn code(v: f64, max: f64) -> f64 {
    (v.clamp(0.0, 1.0) * max).round()
}

pub fn write_rgb(image: &Raster, path: &Path, depth: BitDepth) -> Result<(), DataError> {
    if image.channels() != 3 {
        return Err(DataError::Invalid(format!("expected 3 channels, found {}", image.channels())));
    }
    let (w, h) = (image.width() as u32, image.height() as u32);
    let px = |x: u32, y: u32, c: usize| image.get(x as usize, y as usize, c);
    let result = match depth {
        BitDepth::Eight => RgbImage::from_fn(w, h, |x, y| Rgb(std::array::from_fn(|c| code(px(x, y, c), 255.0) as u8)))
            .save_with_format(path, image::ImageFormat::Png),
        BitDepth::Sixteen => ImageBuffer::<Rgb<u16>, _>::from_fn(w, h, |x, y| {
            Rgb(std::array::from_fn(|c| code(px(x, y, c), 65535.0) as u16))
        })
        .save_with_format(path, image::ImageFormat::Png),
    };
    result.map_err(codec_err(path))
}

/// Reads any decodable image as RGB in `[0, 1]`. Alpha is dropped and gray
/// is replicated.
pub fn read_rgb(path: &Path) -> Result<Raster, DataError> {
    let img = open_image(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match &img {
        DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) | DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) => {
            img.to_rgb8().into_raw().into_iter().map(|v| v as f64 / 255.0).collect()
        }
        _ => img.to_rgb16().into_raw().into_iter().map(|v| v as f64 / 65535.0).collect(),
    };
    Ok(Raster::from_vec(w, h, 3, data))
}

pub fn write_mask(mask: &MaskImage, path: &Path) -> Result<(), DataError> {
    let (w, h) = mask.dims();
    GrayImage::from_fn(w as u32, h as u32, |x, y| image::Luma([code(mask.get(x as usize, y as usize), 255.0) as u8]))
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(codec_err(path))
}

pub fn read_mask(path: &Path) -> Result<MaskImage, DataError> {
    let img = open_image(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values: Vec<f64> = match &img {
        DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) | DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) => {
            img.to_luma16().into_raw().into_iter().map(|v| v as f64 / 65535.0).collect()
        }
        _ => img.to_luma8().into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
    };
    Ok(MaskImage::from_vec(w, h, values))
}
