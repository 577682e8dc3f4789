//! Depth input: 16-bit single-channel PNG with an explicit scale, or PFM.
//!
//! Zero, negative and non-finite samples are invalid and take the value of
//! the nearest valid pixel (4-neighbour breadth-first order).

use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};

use super::{codec_err, io_err, open_image, DataError};
use crate::raster::DepthMap;

#[derive(Debug, Clone, PartialEq)]
pub struct DepthRead {
    pub depth: DepthMap,
    /// Pixels that were invalid in the file and got filled.
    pub invalid_count: usize,
}

/// Reads a depth map in scene units; file samples are multiplied by `scale`.
pub fn read_depth(path: &Path, scale: f64) -> Result<DepthRead, DataError> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(DataError::Invalid(format!("depth scale {scale} must be positive")));
    }
    let bytes = fs::read(path).map_err(io_err(path))?;
    let (w, h, raw) = if bytes.starts_with(b"Pf") || bytes.starts_with(b"PF") {
        let (w, h, v) = read_pfm(&bytes)?;
        (w, h, v.into_iter().map(f64::from).collect::<Vec<_>>())
    } else {
        match open_image(path)? {
            DynamicImage::ImageLuma16(img) => (
                img.width() as usize,
                img.height() as usize,
                img.into_raw().into_iter().map(f64::from).collect(),
            ),
            other => {
                return Err(DataError::UnsupportedFormat(format!(
                    "{}: depth must be 16-bit single-channel PNG or PFM, found {:?}",
                    path.display(),
                    other.color()
                )))
            }
        }
    };
    let values: Vec<f64> = raw.into_iter().map(|v| v * scale).collect();
    let (values, invalid_count) = fill_invalid(w, h, values)?;
    if invalid_count > 0 {
        log::warn!("{}: filled {invalid_count} invalid depth pixels", path.display());
    }
    let depth = DepthMap::new(w, h, values).map_err(|e| DataError::Invalid(e.to_string()))?;
    Ok(DepthRead { depth, invalid_count })
}

fn fill_invalid(w: usize, h: usize, mut values: Vec<f64>) -> Result<(Vec<f64>, usize), DataError> {
    let ok = |v: f64| v.is_finite() && v > 0.0;
    let mut done: Vec<bool> = values.iter().map(|&v| ok(v)).collect();
    let invalid = done.iter().filter(|d| !**d).count();
    if invalid == values.len() {
        return Err(DataError::AllInvalid);
    }
    let mut queue: VecDeque<usize> = (0..values.len()).filter(|&i| done[i]).collect();
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % w, i / w);
        let neighbours = [
            (x > 0).then(|| i - 1),
            (x + 1 < w).then(|| i + 1),
            (y > 0).then(|| i - w),
            (y + 1 < h).then(|| i + w),
        ];
        for j in neighbours.into_iter().flatten() {
            if !done[j] {
                done[j] = true;
                values[j] = values[i];
                queue.push_back(j);
            }
        }
    }
    Ok((values, invalid))
}

/// Parses a grayscale PFM into top-to-bottom rows.
pub fn read_pfm(bytes: &[u8]) -> Result<(usize, usize, Vec<f32>), DataError> {
    // three whitespace-separated header tokens, then one whitespace byte
    let mut tokens = Vec::new();
    let mut pos = 0;
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(DataError::InvalidHeader("PFM header is incomplete".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    match tokens[0].as_str() {
        "Pf" => {}
        "PF" => return Err(DataError::UnsupportedFormat("color PFM depth".into())),
        other => {
            return Err(DataError::BadMagic { expected: "Pf".into(), found: other.into() });
        }
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| DataError::InvalidHeader(format!("PFM size `{s}`")));
    let (w, h) = (parse(&tokens[1])?, parse(&tokens[2])?);
    let scale: f64 = tokens[3].parse().map_err(|_| DataError::InvalidHeader(format!("PFM scale `{}`", tokens[3])))?;
    if w == 0 || h == 0 || scale == 0.0 || !scale.is_finite() {
        return Err(DataError::InvalidHeader(format!("PFM {w}x{h} scale {scale}")));
    }
    let little = scale < 0.0;
    let expected = pos + w * h * 4;
    if bytes.len() < expected {
        return Err(DataError::TruncatedFile { expected, found: bytes.len() });
    }
    let mut out = vec![0f32; w * h];
    for row in 0..h {
        // PFM stores the bottom row first
        let y = h - 1 - row;
        for x in 0..w {
            let o = pos + (row * w + x) * 4;
            let b: [u8; 4] = bytes[o..o + 4].try_into().unwrap();
            out[y * w + x] = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        }
    }
    Ok((w, h, out))
}

/// Little-endian grayscale PFM.
pub fn write_pfm(depth: &DepthMap, path: &Path) -> Result<(), DataError> {
    let (w, h) = depth.dims();
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    for y in (0..h).rev() {
        for x in 0..w {
            out.extend_from_slice(&(depth.get(x, y) as f32).to_le_bytes());
        }
    }
    fs::write(path, out).map_err(io_err(path))
}

/// 16-bit PNG storing `round(depth / scale)`.
pub fn write_depth_png(depth: &DepthMap, path: &Path, scale: f64) -> Result<(), DataError> {
    let (w, h) = depth.dims();
    let mut img = ImageBuffer::<Luma<u16>, Vec<u16>>::new(w as u32, h as u32);
    for (x, y, px) in img.enumerate_pixels_mut() {
        let q = (depth.get(x as usize, y as usize) / scale).round();
        if !(1.0..=65535.0).contains(&q) {
            return Err(DataError::Invalid(format!("depth at ({x}, {y}) does not fit 16 bits at scale {scale}")));
        }
        *px = Luma([q as u16]);
    }
    img.save_with_format(path, image::ImageFormat::Png).map_err(codec_err(path))
}
