//! Dense raster containers shared by every stage of the pipeline.
//!
//! All rasters are row-major with `f64` samples. Multi-channel rasters store
//! channels interleaved per pixel.

use thiserror::Error;

/// Raised when two rasters that must be pixel-aligned are not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("dimension mismatch: expected {expected:?}, found {found:?}")]
pub struct DimensionMismatch {
    pub expected: (usize, usize),
    pub found: (usize, usize),
}

pub(crate) fn ensure_dims(
    expected: (usize, usize),
    found: (usize, usize),
) -> Result<(), DimensionMismatch> {
    if expected == found {
        Ok(())
    } else {
        Err(DimensionMismatch { expected, found })
    }
}

/// A `width × height × channels` grid of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Raster {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        assert!(channels > 0, "raster needs at least one channel");
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    /// Wraps existing interleaved data. Panics if the length does not match.
    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Self {
        assert!(channels > 0, "raster needs at least one channel");
        assert_eq!(
            data.len(),
            width * height * channels,
            "raster data length does not match {width}x{height}x{channels}"
        );
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::from_vec(width, height, channels, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f64) {
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    /// All channels of one pixel.
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let start = (y * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let start = (y * self.width + x) * self.channels;
        &mut self.data[start..start + self.channels]
    }

    /// Copies one channel out as a single-channel raster.
    pub fn channel(&self, c: usize) -> Raster {
        assert!(c < self.channels);
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|px| px[c])
            .collect();
        Raster::from_vec(self.width, self.height, 1, data)
    }
}

/// A soft or binary mask with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

/// Default threshold used when a soft mask is interpreted as a set.
pub const MASK_THRESHOLD: f64 = 0.5;

impl MaskImage {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn ones(width: usize, height: usize) -> Self {
        Self::filled(width, height, 1.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self::from_vec(width, height, vec![value; width * height])
    }

    /// Values are clamped into `[0, 1]`; NaN becomes 0.
    pub fn from_vec(width: usize, height: usize, mut values: Vec<f64>) -> Self {
        assert_eq!(values.len(), width * height, "mask length mismatch");
        for v in &mut values {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self {
            width,
            height,
            values,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::from_vec(width, height, values)
    }

    pub fn from_bools(width: usize, height: usize, bits: &[bool]) -> Self {
        Self::from_vec(
            width,
            height,
            bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.values[y * self.width + x] = value.clamp(0.0, 1.0);
    }

    #[inline]
    pub fn is_set(&self, x: usize, y: usize) -> bool {
        self.get(x, y) >= MASK_THRESHOLD
    }

    /// Binarized view at [`MASK_THRESHOLD`].
    pub fn bits(&self) -> Vec<bool> {
        self.bits_at(MASK_THRESHOLD)
    }

    pub fn bits_at(&self, threshold: f64) -> Vec<bool> {
        self.values.iter().map(|&v| v >= threshold).collect()
    }

    /// Mask whose values are exactly 0 or 1.
    pub fn binarized(&self) -> MaskImage {
        MaskImage::from_bools(self.width, self.height, &self.bits())
    }

    pub fn count_set(&self) -> usize {
        self.values.iter().filter(|&&v| v >= MASK_THRESHOLD).count()
    }

    /// Fraction of pixels that are set.
    pub fn set_fraction(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.count_set() as f64 / self.values.len() as f64
        }
    }
}

/// Dense two-channel displacement field with a per-pixel validity bit.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    u: Vec<f64>,
    v: Vec<f64>,
    valid: Vec<bool>,
}

impl FlowField {
    /// All-zero flow, valid everywhere.
    pub fn zeros(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            u: vec![0.0; n],
            v: vec![0.0; n],
            valid: vec![true; n],
        }
    }

    pub fn from_parts(
        width: usize,
        height: usize,
        u: Vec<f64>,
        v: Vec<f64>,
        valid: Vec<bool>,
    ) -> Self {
        let n = width * height;
        assert!(
            u.len() == n && v.len() == n && valid.len() == n,
            "flow component lengths do not match {width}x{height}"
        );
        Self {
            width,
            height,
            u,
            v,
            valid,
        }
    }

    /// Builds a field from a closure returning `Some((u, v))` for valid pixels.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> Option<(f64, f64)>,
    ) -> Self {
        let mut out = Self::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                let i = y * width + x;
                match f(x, y) {
                    Some((u, v)) => {
                        out.u[i] = u;
                        out.v[i] = v;
                    }
                    None => out.valid[i] = false,
                }
            }
        }
        out
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn u(&self) -> &[f64] {
        &self.u
    }

    #[inline]
    pub fn v(&self) -> &[f64] {
        &self.v
    }

    #[inline]
    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, u: f64, v: f64, valid: bool) {
        let i = y * self.width + x;
        self.u[i] = u;
        self.v[i] = v;
        self.valid[i] = valid;
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&b| b).count()
    }

    /// Largest `|u|` or `|v|` over valid pixels.
    pub fn max_abs_component(&self) -> f64 {
        self.u
            .iter()
            .zip(&self.v)
            .zip(&self.valid)
            .filter(|(_, &ok)| ok)
            .map(|((u, v), _)| u.abs().max(v.abs()))
            .fold(0.0, f64::max)
    }

    /// True when every valid pixel carries finite components.
    pub fn is_finite(&self) -> bool {
        self.u
            .iter()
            .zip(&self.v)
            .zip(&self.valid)
            .all(|((u, v), &ok)| !ok || (u.is_finite() && v.is_finite()))
    }
}

/// Dense per-pixel depth, strictly positive and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DepthMapError {
    #[error("depth map data length {len} does not match {width}x{height}")]
    Length { width: usize, height: usize, len: usize },
    #[error("depth at pixel ({x}, {y}) is {value}, expected a finite positive value")]
    NonPositive { x: usize, y: usize, value: f64 },
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, DepthMapError> {
        if values.len() != width * height {
            return Err(DepthMapError::Length {
                width,
                height,
                len: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(DepthMapError::NonPositive {
                x: i % width.max(1),
                y: i / width.max(1),
                value: values[i],
            });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn constant(width: usize, height: usize, depth: f64) -> Result<Self, DepthMapError> {
        Self::new(width, height, vec![depth; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, DepthMapError> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}
