//! Push-pull hole filling.
//!
//! The push pass averages valid pixels into successively halved levels until
//! a level has no empty cell. The pull pass walks back down, filling each
//! empty pixel by bilinear interpolation of the level above. Pixels outside
//! the hole mask are never written.

use super::RenderError;
use crate::raster::{ensure_dims, MaskImage, Raster};

struct Level {
    width: usize,
    height: usize,
    channels: usize,
    values: Vec<f64>,
    weight: Vec<f64>,
}

impl Level {
    fn downsample(&self) -> Level {
        let width = self.width.div_ceil(2);
        let height = self.height.div_ceil(2);
        let c = self.channels;
        let mut values = vec![0.0; width * height * c];
        let mut weight = vec![0.0; width * height];
        for y in 0..height {
            for x in 0..width {
                let o = y * width + x;
                let mut sum = vec![0.0; c];
                let mut total = 0.0;
                for (fx, fy) in [(2 * x, 2 * y), (2 * x + 1, 2 * y), (2 * x, 2 * y + 1), (2 * x + 1, 2 * y + 1)] {
                    if fx >= self.width || fy >= self.height {
                        continue;
                    }
                    let i = fy * self.width + fx;
                    let w = self.weight[i];
                    if w > 0.0 {
                        total += w;
                        for (s, v) in sum.iter_mut().zip(&self.values[i * c..i * c + c]) {
                            *s += w * v;
                        }
                    }
                }
                if total > 0.0 {
                    for (dst, s) in values[o * c..o * c + c].iter_mut().zip(&sum) {
                        *dst = s / total;
                    }
                    weight[o] = total;
                }
            }
        }
        Level {
            width,
            height,
            channels: c,
            values,
            weight,
        }
    }

    fn is_complete(&self) -> bool {
        self.weight.iter().all(|&w| w > 0.0)
    }

    fn bilinear(&self, x: f64, y: f64, out: &mut [f64]) {
        let c = self.channels;
        let xc = x.clamp(0.0, (self.width - 1) as f64);
        let yc = y.clamp(0.0, (self.height - 1) as f64);
        let (x0, y0) = (xc.floor() as usize, yc.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.width - 1), (y0 + 1).min(self.height - 1));
        let (fx, fy) = (xc - x0 as f64, yc - y0 as f64);
        let at = |xx: usize, yy: usize, ch: usize| self.values[(yy * self.width + xx) * c + ch];
        for (ch, o) in out.iter_mut().enumerate().take(c) {
            let top = at(x0, y0, ch) * (1.0 - fx) + at(x1, y0, ch) * fx;
            let bottom = at(x0, y1, ch) * (1.0 - fx) + at(x1, y1, ch) * fx;
            *o = top * (1.0 - fy) + bottom * fy;
        }
    }

    /// Fills every empty cell from the (complete) coarser level.
    fn pull_from(&mut self, coarse: &Level) {
        let c = self.channels;
        let mut buf = vec![0.0; c];
        for y in 0..self.height {
            for x in 0..self.width {
                let i = y * self.width + x;
                if self.weight[i] > 0.0 {
                    continue;
                }
                coarse.bilinear((x as f64 + 0.5) / 2.0 - 0.5, (y as f64 + 0.5) / 2.0 - 0.5, &mut buf);
                self.values[i * c..i * c + c].copy_from_slice(&buf);
                self.weight[i] = f64::MIN_POSITIVE;
            }
        }
    }
}

/// Replaces hole pixels with push-pull averages of the valid pixels.
///
/// Non-hole pixels are returned bit-identical. Fails with
/// [`RenderError::AllHoles`] when nothing valid remains.
pub fn fill_holes(image: &Raster, holes: &MaskImage) -> Result<Raster, RenderError> {
    ensure_dims(image.dims(), holes.dims())?;
    let (w, h) = image.dims();
    let bits = holes.bits();
    if !bits.iter().any(|&b| b) {
        return Ok(image.clone());
    }
    if bits.iter().all(|&b| b) {
        return Err(RenderError::AllHoles);
    }
    let mut levels = vec![Level {
        width: w,
        height: h,
        channels: image.channels(),
        values: image.data().to_vec(),
        weight: bits.iter().map(|&b| if b { 0.0 } else { 1.0 }).collect(),
    }];
    while !levels.last().unwrap().is_complete() {
        let next = levels.last().unwrap().downsample();
        levels.push(next);
    }
    for l in (0..levels.len() - 1).rev() {
        let (fine, coarse) = levels.split_at_mut(l + 1);
        fine[l].pull_from(&coarse[0]);
    }
    let filled = levels.swap_remove(0).values;
    let mut out = image.clone();
    for (i, px) in out.data_mut().chunks_exact_mut(image.channels()).enumerate() {
        if bits[i] {
            px.copy_from_slice(&filled[i * image.channels()..(i + 1) * image.channels()]);
        }
    }
    Ok(out)
}

/// Merges an externally filled image: hole pixels come from `filled`, all
/// other pixels from `image`.
pub fn apply_external_fill(
    image: &Raster,
    holes: &MaskImage,
    filled: &Raster,
) -> Result<Raster, RenderError> {
    ensure_dims(image.dims(), holes.dims())?;
    ensure_dims(image.dims(), filled.dims())?;
    if image.channels() != filled.channels() {
        return Err(RenderError::ChannelMismatch(image.channels(), filled.channels()));
    }
    let c = image.channels();
    let mut out = image.clone();
    for (i, bit) in holes.bits().into_iter().enumerate() {
        if bit {
            out.data_mut()[i * c..(i + 1) * c].copy_from_slice(&filled.data()[i * c..(i + 1) * c]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(w: usize, h: usize) -> Raster {
        Raster::from_fn(w, h, 3, |x, y, c| (((x * 31 + y * 17 + c * 7) % 23) as f64) / 23.0)
    }

    #[test]
    fn no_holes_is_identity() {
        let img = noise(13, 9);
        let out = fill_holes(&img, &MaskImage::zeros(13, 9)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = Raster::filled(17, 11, 3, 0.37);
        let holes = MaskImage::from_fn(17, 11, |x, y| ((x * y) % 3 == 0 && x > 2) as u8 as f64);
        let out = fill_holes(&img, &holes).unwrap();
        assert!(out.data().iter().all(|v| (v - 0.37).abs() < 1e-12));
    }

    #[test]
    fn single_hole_takes_neighbour_value() {
        let mut img = Raster::filled(9, 9, 3, 0.4);
        img.pixel_mut(4, 4).copy_from_slice(&[0.9, 0.0, 0.1]);
        let holes = MaskImage::from_fn(9, 9, |x, y| (x == 4 && y == 4) as u8 as f64);
        let out = fill_holes(&img, &holes).unwrap();
        for c in 0..3 {
            assert!((out.get(4, 4, c) - 0.4).abs() < 1e-6);
        }
    }

    #[test]
    fn non_hole_pixels_untouched_and_idempotent() {
        let img = noise(31, 20);
        let holes = MaskImage::from_fn(31, 20, |x, y| (x > 10 && x < 25 && y > 3 && y < 15) as u8 as f64);
        let once = fill_holes(&img, &holes).unwrap();
        for y in 0..20 {
            for x in 0..31 {
                if !holes.is_set(x, y) {
                    assert_eq!(once.pixel(x, y), img.pixel(x, y));
                }
            }
        }
        let twice = fill_holes(&once, &holes).unwrap();
        assert_eq!(once, twice);
        assert!(once.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn all_holes_is_an_error() {
        let img = noise(4, 4);
        assert!(matches!(fill_holes(&img, &MaskImage::ones(4, 4)), Err(RenderError::AllHoles)));
    }

    #[test]
    fn external_fill_only_touches_holes() {
        let img = noise(5, 5);
        let filled = Raster::filled(5, 5, 3, 0.5);
        let holes = MaskImage::from_fn(5, 5, |x, _| (x == 2) as u8 as f64);
        let out = apply_external_fill(&img, &holes, &filled).unwrap();
        assert_eq!(out.pixel(2, 3), &[0.5, 0.5, 0.5]);
        assert_eq!(out.pixel(1, 3), img.pixel(1, 3));
    }
}
