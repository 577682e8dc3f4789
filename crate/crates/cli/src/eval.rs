//! `flowgen eval`: EPE, >3 px and Fl for predictions against ground truth,
//! matched by file stem.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;

use flowgen_core::dataio::{read_flo, read_kitti_png};
use flowgen_core::metrics::{accumulate, FlowMetrics, MetricsAccumulator};
use flowgen_core::FlowField;

use crate::{write_json, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalFormat {
    /// Decide per file by extension.
    Auto,
    Flo,
    Kitti,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    pub pred_dir: PathBuf,
    pub gt_dir: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub format: EvalFormat,
    /// Write per-file and aggregate metrics as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileMetrics {
    pub stem: String,
    #[serde(flatten)]
    pub metrics: FlowMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub files: Vec<FileMetrics>,
    pub aggregate: Option<FlowMetrics>,
    pub missing_predictions: Vec<String>,
    pub unmatched_predictions: Vec<String>,
}

fn accepts(format: EvalFormat, path: &Path) -> bool {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match format {
        EvalFormat::Auto => ext == "flo" || ext == "png",
        EvalFormat::Flo => ext == "flo",
        EvalFormat::Kitti => ext == "png",
    }
}

/// Flow files of a directory keyed by stem.
pub fn flow_files(dir: &Path, format: EvalFormat) -> Result<BTreeMap<String, PathBuf>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Failure(format!("{}: {e}", dir.display())))?;
    let mut map = BTreeMap::new();
    for entry in entries.filter_map(Result::ok) {
        let path = entry.path();
        if !path.is_file() || !accepts(format, &path) {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        if let Some(prev) = map.insert(stem.clone(), path.clone()) {
            return Err(CliError::Failure(format!(
                "stem `{stem}` is ambiguous: {} and {}",
                prev.display(),
                path.display()
            )));
        }
    }
    Ok(map)
}

/// Reads a flow file by extension.
pub fn read_flow(path: &Path) -> Result<FlowField, String> {
    let result = match path.extension().and_then(|e| e.to_str()) {
        Some("flo") => read_flo(path),
        Some("png") => read_kitti_png(path),
        _ => return Err(format!("{}: unknown flow format", path.display())),
    };
    result.map_err(|e| format!("{}: {e}", path.display()))
}

pub fn evaluate_dirs(pred_dir: &Path, gt_dir: &Path, format: EvalFormat) -> Result<EvalReport, CliError> {
    let preds = flow_files(pred_dir, format)?;
    let gts = flow_files(gt_dir, format)?;
    let missing: Vec<String> = gts.keys().filter(|s| !preds.contains_key(*s)).cloned().collect();
    let unmatched: Vec<String> = preds.keys().filter(|s| !gts.contains_key(*s)).cloned().collect();
    let mut total = MetricsAccumulator::default();
    let mut files = Vec::new();
    for (stem, gt_path) in &gts {
        let Some(pred_path) = preds.get(stem) else { continue };
        let gt = read_flow(gt_path).map_err(CliError::Failure)?;
        let pred = read_flow(pred_path).map_err(CliError::Failure)?;
        let acc = accumulate(&pred, &gt, None).map_err(|e| CliError::Failure(format!("{stem}: {e}")))?;
        total.merge(&acc);
        if let Ok(metrics) = acc.finish() {
            files.push(FileMetrics { stem: stem.clone(), metrics });
        } else {
            log::warn!("{stem}: no valid ground-truth pixels");
        }
    }
    Ok(EvalReport {
        files,
        aggregate: total.finish().ok(),
        missing_predictions: missing,
        unmatched_predictions: unmatched,
    })
}

pub fn run(args: &EvalArgs) -> Result<(), CliError> {
    let report = evaluate_dirs(&args.pred_dir, &args.gt_dir, args.format)?;
    println!("{:<32} {:>10} {:>8} {:>8} {:>10}", "file", "EPE", ">3px", "Fl", "pixels");
    for f in &report.files {
        let m = &f.metrics;
        println!(
            "{:<32} {:>10.4} {:>7.2}% {:>7.2}% {:>10}",
            f.stem,
            m.epe_mean,
            m.gt3_rate * 100.0,
            m.fl_rate * 100.0,
            m.count
        );
    }
    if let Some(m) = &report.aggregate {
        println!(
            "{:<32} {:>10.4} {:>7.2}% {:>7.2}% {:>10}",
            "ALL",
            m.epe_mean,
            m.gt3_rate * 100.0,
            m.fl_rate * 100.0,
            m.count
        );
    }
    write_json(&args.json, &report)?;
    let mut problems = Vec::new();
    if !report.missing_predictions.is_empty() {
        problems.push(format!("missing predictions for: {}", report.missing_predictions.join(", ")));
    }
    if !report.unmatched_predictions.is_empty() {
        problems.push(format!("no ground truth for: {}", report.unmatched_predictions.join(", ")));
    }
    if report.aggregate.is_none() {
        problems.push("no valid ground-truth pixels to evaluate".into());
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failure(problems.join("; ")))
    }
}
