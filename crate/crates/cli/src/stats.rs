//! `flowgen stats`: flow magnitude and direction histograms plus coverage
//! and inpainting distributions over a directory of generated samples.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use flowgen_core::dataio::{read_manifest, SampleManifest};

use crate::eval::read_flow;
use crate::{write_json, CliError};

/// Upper edges of the magnitude bins in pixels; the last bin is open.
pub const MAGNITUDE_EDGES: [f64; 9] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0];
pub const DIRECTION_BINS: usize = 8;
/// Flows shorter than this have no meaningful direction.
pub const MIN_DIRECTION_MAGNITUDE: f64 = 0.5;
const FRACTION_BINS: usize = 10;

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    pub sample_dir: PathBuf,
    /// Write the histograms as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct DatasetStats {
    pub samples: usize,
    pub skipped: Vec<String>,
    pub pixels: usize,
    /// Counts per magnitude bin (see [`MAGNITUDE_EDGES`]).
    pub magnitude: Vec<usize>,
    /// Counts per 45 degree sector, bin 0 centred on +x (image right),
    /// increasing towards +y (image down).
    pub direction: Vec<usize>,
    pub coverage: Vec<usize>,
    pub inpaint: Vec<usize>,
    pub magnitude_quantiles: Vec<(f64, f64)>,
}

pub fn magnitude_bin(m: f64) -> usize {
    MAGNITUDE_EDGES.iter().position(|&e| m < e).unwrap_or(MAGNITUDE_EDGES.len())
}

pub fn direction_bin(u: f64, v: f64) -> usize {
    let sector = std::f64::consts::TAU / DIRECTION_BINS as f64;
    let angle = v.atan2(u).rem_euclid(std::f64::consts::TAU);
    ((angle / sector + 0.5).floor() as usize) % DIRECTION_BINS
}

fn fraction_bin(f: f64) -> usize {
    ((f.clamp(0.0, 1.0) * FRACTION_BINS as f64) as usize).min(FRACTION_BINS - 1)
}

fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

fn flow_path(dir: &Path, m: &SampleManifest) -> Option<PathBuf> {
    m.outputs.get("flow_flo").or_else(|| m.outputs.get("flow_kitti")).map(|rel| dir.join(rel))
}

pub fn collect_stats(dir: &Path) -> Result<DatasetStats, CliError> {
    let mut manifests: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::Failure(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    manifests.sort();
    let mut stats = DatasetStats {
        magnitude: vec![0; MAGNITUDE_EDGES.len() + 1],
        direction: vec![0; DIRECTION_BINS],
        coverage: vec![0; FRACTION_BINS],
        inpaint: vec![0; FRACTION_BINS],
        ..DatasetStats::default()
    };
    let mut magnitudes = Vec::new();
    for path in &manifests {
        let loaded = read_manifest(path).map_err(|e| e.to_string()).and_then(|m| {
            let flow_file = flow_path(dir, &m).ok_or_else(|| "manifest lists no flow file".to_string())?;
            Ok((m, read_flow(&flow_file)?))
        });
        let (manifest, flow) = match loaded {
            Ok(v) => v,
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                stats.skipped.push(path.display().to_string());
                continue;
            }
        };
        stats.samples += 1;
        stats.coverage[fraction_bin(manifest.coverage_fraction)] += 1;
        stats.inpaint[fraction_bin(manifest.inpaint_fraction)] += 1;
        for i in 0..flow.valid().len() {
            if !flow.valid()[i] {
                continue;
            }
            let (u, v) = (flow.u()[i], flow.v()[i]);
            let m = u.hypot(v);
            stats.magnitude[magnitude_bin(m)] += 1;
            if m >= MIN_DIRECTION_MAGNITUDE {
                stats.direction[direction_bin(u, v)] += 1;
            }
            magnitudes.push(m);
        }
    }
    if stats.samples == 0 {
        return Err(CliError::Failure(format!("{}: no readable samples", dir.display())));
    }
    stats.pixels = magnitudes.len();
    magnitudes.sort_by(f64::total_cmp);
    if !magnitudes.is_empty() {
        stats.magnitude_quantiles =
            [0.05, 0.5, 0.95, 1.0].iter().map(|&q| (q, nearest_rank(&magnitudes, q))).collect();
    }
    Ok(stats)
}

fn bar(count: usize, total: usize) -> String {
    let width = if total == 0 { 0 } else { (40 * count).div_ceil(total) };
    "#".repeat(width)
}

fn print_histogram(title: &str, labels: &[String], counts: &[usize]) {
    let total: usize = counts.iter().sum();
    println!("{title}");
    for (label, &c) in labels.iter().zip(counts) {
        println!("  {label:>14} {c:>12} {}", bar(c, total));
    }
}

pub fn run(args: &StatsArgs) -> Result<(), CliError> {
    let stats = collect_stats(&args.sample_dir)?;
    println!("samples {}  skipped {}  valid flow pixels {}", stats.samples, stats.skipped.len(), stats.pixels);
    let mut mag_labels = Vec::new();
    let mut lo = 0.0;
    for &e in &MAGNITUDE_EDGES {
        mag_labels.push(format!("[{lo}, {e}) px"));
        lo = e;
    }
    mag_labels.push(format!(">= {lo} px"));
    print_histogram("flow magnitude", &mag_labels, &stats.magnitude);
    let dir_labels: Vec<String> =
        (0..DIRECTION_BINS).map(|i| format!("{} deg", i * 360 / DIRECTION_BINS)).collect();
    print_histogram("flow direction (image axes, y down)", &dir_labels, &stats.direction);
    let frac_labels: Vec<String> = (0..FRACTION_BINS)
        .map(|i| format!("[{:.1}, {:.1})", i as f64 / 10.0, (i + 1) as f64 / 10.0))
        .collect();
    print_histogram("coverage fraction", &frac_labels, &stats.coverage);
    print_histogram("inpainted fraction", &frac_labels, &stats.inpaint);
    for (q, v) in &stats.magnitude_quantiles {
        println!("magnitude q{:<4} {v:.3} px", q * 100.0);
    }
    write_json(&args.json, &stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins() {
        assert_eq!(magnitude_bin(0.0), 0);
        assert_eq!(magnitude_bin(1.0), 1);
        assert_eq!(magnitude_bin(1000.0), MAGNITUDE_EDGES.len());
        assert_eq!(direction_bin(1.0, 0.0), 0);
        assert_eq!(direction_bin(1.0, -0.1), 0);
        assert_eq!(direction_bin(0.0, 1.0), 2);
        assert_eq!(direction_bin(-1.0, 0.0), 4);
        assert_eq!(direction_bin(0.0, -1.0), 6);
        assert_eq!(fraction_bin(1.0), 9);
        assert_eq!(nearest_rank(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.0);
    }
}
