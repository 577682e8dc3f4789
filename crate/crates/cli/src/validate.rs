//! `flowgen validate`: renders scene specs and compares the flow with the
//! brute-force oracle.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde::Serialize;

use flowgen_core::oracle::{make_scene, SceneSpec, SyntheticScene};
use flowgen_core::renderer::{generate_with_poses, PosePlan, SampleConfig};

use crate::{write_json, CliError};

/// Maximum per-pixel flow error allowed on plane-aligned scenes.
pub const MAX_ERROR_TOLERANCE: f64 = 0.05;
/// Mean flow error allowed on plane-aligned scenes.
pub const MEAN_ERROR_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Scene spec files, or directories searched for `*.scene`.
    pub specs: Vec<PathBuf>,
    /// Plane count for scenes that do not declare their planes.
    #[arg(long, default_value_t = 64)]
    pub planes: usize,
    /// Write the per-scene report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneCheck {
    pub name: String,
    pub max_error: f64,
    pub mean_error: f64,
    pub compared_pixels: usize,
    /// Pixels valid in exactly one of the two flows.
    pub validity_mismatches: usize,
    pub seconds: f64,
    pub passed: bool,
}

/// Renders `scene` with its spec's poses and measures the flow error
/// against the oracle over pixels valid in both.
pub fn check_scene(scene: &SyntheticScene, default_planes: usize) -> Result<SceneCheck, String> {
    let start = Instant::now();
    let spec = &scene.spec;
    let (n_planes, depth_range) = match spec.planes {
        Some((near, far, n)) => (n, Some((near, far))),
        None => (default_planes, None),
    };
    let config = SampleConfig {
        n_planes,
        depth_range,
        // only the flow matters here, however sparse the novel view
        coverage_floor: f64::MIN_POSITIVE,
        ..SampleConfig::default()
    };
    let plan = PosePlan {
        background: spec.render_background_pose(),
        objects: vec![spec.render_object_pose()],
    };
    let sample = generate_with_poses(&scene.image, &scene.depth, &scene.object_mask, &scene.intrinsics, &config, &plan)
        .map_err(|e| e.to_string())?;
    let oracle = scene.oracle_flow();
    let (mut max_error, mut sum, mut count, mut mismatches) = (0.0f64, 0.0, 0usize, 0usize);
    for i in 0..oracle.valid().len() {
        match (sample.flow.valid()[i], oracle.valid()[i]) {
            (true, true) => {
                let e = (sample.flow.u()[i] - oracle.u()[i]).hypot(sample.flow.v()[i] - oracle.v()[i]);
                max_error = max_error.max(e);
                sum += e;
                count += 1;
            }
            (false, false) => {}
            _ => mismatches += 1,
        }
    }
    let mean_error = if count == 0 { 0.0 } else { sum / count as f64 };
    let passed = count > 0 && mismatches == 0 && max_error <= MAX_ERROR_TOLERANCE && mean_error <= MEAN_ERROR_TOLERANCE;
    Ok(SceneCheck {
        name: spec.name.clone(),
        max_error,
        mean_error,
        compared_pixels: count,
        validity_mismatches: mismatches,
        seconds: start.elapsed().as_secs_f64(),
        passed,
    })
}

/// Expands directories into their `*.scene` files, sorted by name.
pub fn collect_specs(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| CliError::Failure(format!("{}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "scene"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

pub fn load_scene(path: &Path) -> Result<SyntheticScene, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let spec = SceneSpec::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    make_scene(&spec).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn run(args: &ValidateArgs) -> Result<(), CliError> {
    let specs = collect_specs(&args.specs)?;
    if specs.is_empty() {
        return Err(CliError::Usage("no scenes".into()));
    }
    let mut checks = Vec::new();
    let mut failures = Vec::new();
    for path in &specs {
        let check = load_scene(path).and_then(|scene| check_scene(&scene, args.planes));
        match check {
            Ok(c) => {
                println!(
                    "{:<5} {:<28} max {:.6} px  mean {:.6} px  pixels {}  mismatched {}  {:.2}s",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.max_error,
                    c.mean_error,
                    c.compared_pixels,
                    c.validity_mismatches,
                    c.seconds
                );
                if !c.passed {
                    failures.push(format!("{} (max {:.4}, mean {:.4})", c.name, c.max_error, c.mean_error));
                }
                checks.push(c);
            }
            Err(e) => {
                println!("ERROR {e}");
                failures.push(e);
            }
        }
    }
    write_json(&args.json, &checks)?;
    if failures.is_empty() {
        println!("all {} scenes within tolerance", checks.len());
        Ok(())
    } else {
        Err(CliError::Failure(format!("failing scenes: {}", failures.join("; "))))
    }
}
