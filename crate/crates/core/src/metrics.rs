//! Flow error statistics: end-point error, >3px rate and the KITTI Fl
//! outlier rate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{ensure_dims, DimensionMismatch, FlowField, MaskImage};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error(transparent)]
    DimensionMismatch(#[from] DimensionMismatch),
    #[error("no valid ground-truth pixel inside the evaluation region")]
    EmptyRegion,
}

/// Absolute end-point error threshold for outliers, in pixels.
pub const OUTLIER_PIXELS: f64 = 3.0;
/// Relative threshold (fraction of ground-truth magnitude) for Fl.
pub const OUTLIER_RELATIVE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowMetrics {
    pub epe_mean: f64,
    pub gt3_rate: f64,
    pub fl_rate: f64,
    pub count: usize,
}

/// Running sums that can be merged across files.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricsAccumulator {
    epe_sum: f64,
    gt3: usize,
    fl: usize,
    count: usize,
}

impl MetricsAccumulator {
    #[inline]
    pub fn add_pixel(&mut self, pred: (f64, f64), gt: (f64, f64)) {
        let epe = (pred.0 - gt.0).hypot(pred.1 - gt.1);
        let gt_mag = gt.0.hypot(gt.1);
        self.epe_sum += epe;
        self.count += 1;
        if epe > OUTLIER_PIXELS {
            self.gt3 += 1;
            if epe > OUTLIER_RELATIVE * gt_mag {
                self.fl += 1;
            }
        }
    }

    pub fn merge(&mut self, other: &MetricsAccumulator) {
        self.epe_sum += other.epe_sum;
        self.gt3 += other.gt3;
        self.fl += other.fl;
        self.count += other.count;
    }

    pub fn finish(&self) -> Result<FlowMetrics, MetricsError> {
        if self.count == 0 {
            return Err(MetricsError::EmptyRegion);
        }
        let n = self.count as f64;
        Ok(FlowMetrics {
            epe_mean: self.epe_sum / n,
            gt3_rate: self.gt3 as f64 / n,
            fl_rate: self.fl as f64 / n,
            count: self.count,
        })
    }
}

/// Sums for `pred` against `gt` over valid ground-truth pixels, optionally
/// restricted to a region.
pub fn accumulate(
    pred: &FlowField,
    gt: &FlowField,
    region: Option<&MaskImage>,
) -> Result<MetricsAccumulator, MetricsError> {
    ensure_dims(gt.dims(), pred.dims())?;
    if let Some(r) = region {
        ensure_dims(gt.dims(), r.dims())?;
    }
    let inside = region.map(MaskImage::bits);
    let mut acc = MetricsAccumulator::default();
    for i in 0..gt.valid().len() {
        if !gt.valid()[i] || inside.as_ref().is_some_and(|b| !b[i]) {
            continue;
        }
        acc.add_pixel((pred.u()[i], pred.v()[i]), (gt.u()[i], gt.v()[i]));
    }
    Ok(acc)
}

pub fn evaluate(
    pred: &FlowField,
    gt: &FlowField,
    region: Option<&MaskImage>,
) -> Result<FlowMetrics, MetricsError> {
    accumulate(pred, gt, region)?.finish()
}
