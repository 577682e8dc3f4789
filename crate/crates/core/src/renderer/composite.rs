//! Front-to-back volume compositing.
//!
//! `P = Σ_n P_n · α_n · Π_{m<n} (1 − α_m)` over planes ordered front to back.

use crate::mpi::alpha_from_density;
use crate::raster::{ensure_dims, DimensionMismatch, MaskImage, Raster};

/// Coverage below which a composited pixel counts as empty.
pub const EMPTY_COVERAGE: f64 = 1e-4;

/// Per-pixel running state of a front-to-back composite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accumulator<const C: usize> {
    pub transmittance: f64,
    pub coverage: f64,
    pub values: [f64; C],
}

impl<const C: usize> Default for Accumulator<C> {
    fn default() -> Self {
        Self {
            transmittance: 1.0,
            coverage: 0.0,
            values: [0.0; C],
        }
    }
}

impl<const C: usize> Accumulator<C> {
    /// Adds one layer behind everything accumulated so far.
    #[inline]
    pub fn add(&mut self, alpha: f64, values: &[f64]) {
        let w = alpha * self.transmittance;
        if w != 0.0 {
            for (acc, v) in self.values.iter_mut().zip(values) {
                *acc += w * v;
            }
            self.coverage += w;
        }
        self.transmittance *= 1.0 - alpha;
    }

    #[inline]
    pub fn is_opaque(&self) -> bool {
        self.transmittance == 0.0
    }

    /// Accumulated value divided by coverage, or `None` when empty.
    #[inline]
    pub fn normalized(&self, channel: usize) -> Option<f64> {
        (self.coverage > EMPTY_COVERAGE).then(|| self.values[channel] / self.coverage)
    }
}

/// Weights of a full plane stack at one pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeState {
    pub alpha: Vec<f64>,
    pub delta: Vec<f64>,
    /// Transmittance in front of each plane, `Π_{m<n} (1 − α_m)`.
    pub transmittance: Vec<f64>,
    pub weight: Vec<f64>,
    pub accumulated: f64,
    /// Transmittance behind the last plane.
    pub final_transmittance: f64,
}

impl CompositeState {
    pub fn from_alphas(alpha: &[f64]) -> Self {
        Self::build(alpha.to_vec(), unit_deltas(alpha.len()))
    }

    /// `α_n = 1 − exp(−δ_n σ_n)`.
    pub fn from_densities(sigma: &[f64], delta: &[f64]) -> Self {
        assert_eq!(sigma.len(), delta.len());
        let alpha = sigma
            .iter()
            .zip(delta)
            .map(|(&s, &d)| alpha_from_density(s, d))
            .collect();
        Self::build(alpha, delta.to_vec())
    }

    fn build(alpha: Vec<f64>, delta: Vec<f64>) -> Self {
        let mut transmittance = Vec::with_capacity(alpha.len());
        let mut weight = Vec::with_capacity(alpha.len());
        let mut t = 1.0;
        let mut accumulated = 0.0;
        for &a in &alpha {
            transmittance.push(t);
            let w = a * t;
            weight.push(w);
            accumulated += w;
            t *= 1.0 - a;
        }
        Self {
            alpha,
            delta,
            transmittance,
            weight,
            accumulated,
            final_transmittance: t,
        }
    }
}

/// Inter-plane distances in plane-index units; the last plane reuses its
/// predecessor's spacing.
pub fn unit_deltas(n: usize) -> Vec<f64> {
    vec![1.0; n]
}

/// One layer handed to [`composite`].
#[derive(Debug, Clone, Copy)]
pub struct CompositeLayer<'a> {
    pub values: &'a Raster,
    /// Single-channel opacity in `[0, 1]`.
    pub alpha: &'a Raster,
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeOutput {
    pub value: Raster,
    pub coverage: MaskImage,
    /// Weighted depth divided by coverage; `None` where the pixel is empty.
    pub depth: Vec<Option<f64>>,
}

/// Composites layers ordered front to back.
pub fn composite(layers: &[CompositeLayer<'_>]) -> Result<CompositeOutput, DimensionMismatch> {
    let first = layers.first().expect("composite needs at least one layer");
    let dims = first.values.dims();
    let channels = first.values.channels();
    for l in layers {
        ensure_dims(dims, l.values.dims())?;
        ensure_dims(dims, l.alpha.dims())?;
        assert_eq!(l.values.channels(), channels, "layers differ in channel count");
    }
    let (w, h) = dims;
    let mut value = Raster::zeros(w, h, channels);
    let mut coverage = Vec::with_capacity(w * h);
    let mut depth = Vec::with_capacity(w * h);
    let mut stacked = vec![0.0; channels + 1];
    for y in 0..h {
        for x in 0..w {
            let mut acc = StackedAccumulator::new(channels + 1);
            for l in layers {
                stacked[..channels].copy_from_slice(l.values.pixel(x, y));
                stacked[channels] = l.depth;
                acc.add(l.alpha.get(x, y, 0).clamp(0.0, 1.0), &stacked);
            }
            value.pixel_mut(x, y).copy_from_slice(&acc.values[..channels]);
            coverage.push(acc.coverage);
            depth.push((acc.coverage > EMPTY_COVERAGE).then(|| acc.values[channels] / acc.coverage));
        }
    }
    Ok(CompositeOutput {
        value,
        coverage: MaskImage::from_vec(w, h, coverage),
        depth,
    })
}

/// Heap-sized counterpart of [`Accumulator`] for runtime channel counts.
struct StackedAccumulator {
    transmittance: f64,
    coverage: f64,
    values: Vec<f64>,
}

impl StackedAccumulator {
    fn new(channels: usize) -> Self {
        Self {
            transmittance: 1.0,
            coverage: 0.0,
            values: vec![0.0; channels],
        }
    }

    fn add(&mut self, alpha: f64, values: &[f64]) {
        let w = alpha * self.transmittance;
        for (acc, v) in self.values.iter_mut().zip(values) {
            *acc += w * v;
        }
        self.coverage += w;
        self.transmittance *= 1.0 - alpha;
    }
}
