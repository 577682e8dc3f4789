//! `flowgen generate`: training pairs for every record of an input list.
//!
//! Each `(input, pair)` sample draws its motion from its own random stream
//! derived from the seed and both indices, so the output does not depend on
//! the worker count or on how many pairs are requested.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;

use flowgen_core::camera::CameraPreset;
use flowgen_core::dataio::{
    kitti_encodable, read_depth, read_mask, read_rgb, write_flo, write_kitti_png, write_manifest, write_mask,
    write_rgb, BitDepth, ManifestPose, SampleManifest, SourceRecord,
};
use flowgen_core::mpi::depth_range;
use flowgen_core::renderer::{generate_indexed, GeneratedSample, InpaintMode, RenderError, SampleConfig};
use flowgen_core::{CameraIntrinsics, DepthMap, MaskImage, Raster, GENERATOR_VERSION};

use crate::{workers_from_env, CliError, FlowFormat, InpaintArg};

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Input list: one `image depth [mask]` record per line; relative paths
    /// resolve against the list's directory.
    pub inputs: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub planes: usize,
    /// Built-in preset name (`driving`, `generic`) or a preset TOML file.
    #[arg(long, default_value = "driving")]
    pub preset: String,
    /// Pairs generated per input.
    #[arg(long, default_value_t = 4)]
    pub pairs: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Minimum covered fraction of the novel view; sparser samples are skipped.
    #[arg(long, default_value_t = 0.6)]
    pub coverage_floor: f64,
    /// Move objects with the background camera.
    #[arg(long)]
    pub no_object_motion: bool,
    /// Give every connected mask component its own motion.
    #[arg(long)]
    pub multi_object: bool,
    #[arg(long, value_enum, default_value = "builtin")]
    pub inpaint: InpaintArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub format: FlowFormat,
    /// Scene units per stored depth unit (16-bit PNG depth).
    #[arg(long, default_value_t = 1.0)]
    pub depth_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputRecord {
    pub image: PathBuf,
    pub depth: PathBuf,
    pub mask: Option<PathBuf>,
}

/// Parses an input list. Blank lines and `#` comments are ignored.
pub fn parse_input_list(text: &str, base: &Path) -> Result<Vec<InputRecord>, String> {
    let mut records = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(format!("line {}: expected `image depth [mask]`, found {} fields", n + 1, fields.len()));
        }
        let path = |s: &str| base.join(s);
        records.push(InputRecord {
            image: path(fields[0]),
            depth: path(fields[1]),
            mask: fields.get(2).map(|s| path(s)),
        });
    }
    Ok(records)
}

/// Everything a worker needs; shared read-only.
#[derive(Debug, Clone)]
pub struct GenerateJob {
    pub config: SampleConfig,
    pub preset: CameraPreset,
    pub pairs: u64,
    pub seed: u64,
    pub format: FlowFormat,
    pub depth_scale: f64,
    pub out: PathBuf,
}

impl GenerateJob {
    pub fn from_args(args: &GenerateArgs) -> Result<Self, CliError> {
        let preset = CameraPreset::resolve(&args.preset).map_err(|e| CliError::Usage(e.to_string()))?;
        if args.pairs == 0 {
            return Err(CliError::Usage("--pairs must be at least 1".into()));
        }
        if !(args.depth_scale.is_finite() && args.depth_scale > 0.0) {
            return Err(CliError::Usage("--depth-scale must be positive".into()));
        }
        let config = SampleConfig {
            n_planes: args.planes,
            preset: preset.name.clone(),
            ranges: preset.ranges,
            object_motion: !args.no_object_motion,
            multi_object: args.multi_object,
            coverage_floor: args.coverage_floor,
            inpaint: args.inpaint.into(),
            depth_range: None,
        };
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(Self {
            config,
            preset,
            pairs: args.pairs,
            seed: args.seed,
            format: args.format,
            depth_scale: args.depth_scale,
            out: args.out.clone(),
        })
    }
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct GenerateReport {
    pub written: Vec<PathBuf>,
    pub skipped: Vec<String>,
    pub errors: Vec<String>,
}

struct LoadedInput {
    image: Raster,
    depth: DepthMap,
    mask: MaskImage,
    intrinsics: CameraIntrinsics,
}

fn load_input(job: &GenerateJob, rec: &InputRecord) -> Result<LoadedInput, String> {
    let describe = |p: &Path, e: &dyn std::fmt::Display| format!("{}: {e}", p.display());
    let image = read_rgb(&rec.image).map_err(|e| describe(&rec.image, &e))?;
    let depth = read_depth(&rec.depth, job.depth_scale).map_err(|e| describe(&rec.depth, &e))?.depth;
    let (w, h) = image.dims();
    if depth.dims() != (w, h) {
        return Err(format!("{}: depth is {:?}, image is {:?}", rec.depth.display(), depth.dims(), (w, h)));
    }
    let mask = match &rec.mask {
        Some(p) => {
            let m = read_mask(p).map_err(|e| describe(p, &e))?;
            if m.dims() != (w, h) {
                return Err(format!("{}: mask is {:?}, image is {:?}", p.display(), m.dims(), (w, h)));
            }
            m
        }
        None => MaskImage::zeros(w, h),
    };
    let intrinsics = job.preset.intrinsics(w, h).map_err(|e| e.to_string())?;
    Ok(LoadedInput { image, depth, mask, intrinsics })
}

fn write_sample(
    job: &GenerateJob,
    rec: &InputRecord,
    input: &LoadedInput,
    sample: &GeneratedSample,
    stem: &str,
) -> Result<PathBuf, String> {
    let out = &job.out;
    let mut outputs = BTreeMap::new();
    let mut put = |role: &str, suffix: &str| {
        let name = format!("{stem}_{suffix}");
        outputs.insert(role.to_string(), name.clone());
        out.join(name)
    };
    let fail = |e: flowgen_core::dataio::DataError| e.to_string();
    write_rgb(&sample.source_image, &put("image1", "img1.png"), BitDepth::Eight).map_err(fail)?;
    write_rgb(&sample.novel_image, &put("image2", "img2.png"), BitDepth::Eight).map_err(fail)?;
    write_mask(&sample.occlusion_mask, &put("occlusion_mask", "occ.png")).map_err(fail)?;
    write_mask(&sample.inpaint_mask, &put("inpaint_mask", "inpaint.png")).map_err(fail)?;
    write_mask(&sample.source_mask, &put("object_mask", "mask.png")).map_err(fail)?;

    let encodable = kitti_encodable(&sample.flow);
    let want_kitti = matches!(job.format, FlowFormat::Kitti | FlowFormat::Both);
    let want_flo = matches!(job.format, FlowFormat::Flo | FlowFormat::Both) || (want_kitti && !encodable);
    if want_kitti && !encodable {
        log::info!("{stem}: flow exceeds the KITTI range (max |component| {:.1}); KITTI PNG skipped", sample.flow.max_abs_component());
    }
    if want_flo {
        write_flo(&sample.flow, &put("flow_flo", "flow.flo")).map_err(fail)?;
    }
    if want_kitti && encodable {
        write_kitti_png(&sample.flow, &put("flow_kitti", "flow.png")).map_err(fail)?;
    }

    let (near, far) = match job.config.depth_range {
        Some(r) => r,
        None => depth_range(&input.depth).map_err(|e| e.to_string())?,
    };
    let manifest = SampleManifest {
        generator: GENERATOR_VERSION.to_string(),
        source: SourceRecord {
            image: rec.image.display().to_string(),
            depth: rec.depth.display().to_string(),
            mask: rec.mask.as_ref().map(|p| p.display().to_string()),
            depth_scale: job.depth_scale,
        },
        outputs,
        intrinsics: input.intrinsics,
        background_pose: ManifestPose::from(&sample.poses.background),
        object_poses: sample.poses.objects.iter().map(ManifestPose::from).collect(),
        planes: job.config.n_planes,
        depth_range: [near, far],
        seed: sample.provenance.seed,
        input_index: sample.provenance.input_index,
        pair_index: sample.provenance.pair_index,
        preset: sample.provenance.preset.clone(),
        object_motion: job.config.object_motion,
        multi_object: job.config.multi_object,
        inpaint: match job.config.inpaint {
            InpaintMode::Builtin => "builtin".into(),
            InpaintMode::Export => "export".into(),
        },
        coverage_fraction: sample.coverage_fraction,
        occlusion_fraction: sample.occlusion_mask.set_fraction(),
        inpaint_fraction: sample.inpaint_mask.set_fraction(),
    };
    let path = out.join(format!("{stem}_manifest.json"));
    write_manifest(&manifest, &path).map_err(fail)?;
    Ok(path)
}

enum PairOutcome {
    Written(PathBuf),
    Skipped(String),
    Failed(String),
}

fn process_input(job: &GenerateJob, index: usize, rec: &InputRecord) -> Vec<PairOutcome> {
    let input = match load_input(job, rec) {
        Ok(i) => i,
        Err(e) => return vec![PairOutcome::Failed(e)],
    };
    (0..job.pairs)
        .into_par_iter()
        .map(|pair| {
            let stem = format!("{index:05}_{pair:02}");
            let result = generate_indexed(
                &input.image,
                &input.depth,
                &input.mask,
                &input.intrinsics,
                &job.config,
                job.seed,
                index as u64,
                pair,
            );
            match result {
                Ok(sample) => match write_sample(job, rec, &input, &sample, &stem) {
                    Ok(p) => PairOutcome::Written(p),
                    Err(e) => PairOutcome::Failed(format!("{stem}: {e}")),
                },
                Err(RenderError::DegenerateSample { coverage, floor }) => PairOutcome::Skipped(format!(
                    "{stem} ({}): coverage {coverage:.3} below floor {floor:.3}",
                    rec.image.display()
                )),
                Err(e) => PairOutcome::Failed(format!("{stem} ({}): {e}", rec.image.display())),
            }
        })
        .collect()
}

/// Runs a whole job on a pool of `workers` threads.
pub fn generate_all(job: &GenerateJob, records: &[InputRecord], workers: usize) -> Result<GenerateReport, CliError> {
    fs::create_dir_all(&job.out).map_err(|e| CliError::Failure(format!("{}: {e}", job.out.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Failure(e.to_string()))?;
    let outcomes: Vec<Vec<PairOutcome>> =
        pool.install(|| records.par_iter().enumerate().map(|(i, rec)| process_input(job, i, rec)).collect());
    let mut report = GenerateReport::default();
    for outcome in outcomes.into_iter().flatten() {
        match outcome {
            PairOutcome::Written(p) => report.written.push(p),
            PairOutcome::Skipped(s) => report.skipped.push(s),
            PairOutcome::Failed(e) => report.errors.push(e),
        }
    }
    Ok(report)
}

pub fn run(args: &GenerateArgs) -> Result<(), CliError> {
    let job = GenerateJob::from_args(args)?;
    let workers = workers_from_env()?;
    let text = fs::read_to_string(&args.inputs)
        .map_err(|e| CliError::Failure(format!("{}: {e}", args.inputs.display())))?;
    let base = args.inputs.parent().unwrap_or(Path::new(""));
    let records = parse_input_list(&text, base).map_err(|e| CliError::Usage(format!("{}: {e}", args.inputs.display())))?;
    if records.is_empty() {
        return Err(CliError::Usage(format!("{}: no input records", args.inputs.display())));
    }
    let report = generate_all(&job, &records, workers)?;
    for s in &report.skipped {
        log::warn!("skipped degenerate sample {s}");
    }
    for e in &report.errors {
        log::error!("{e}");
    }
    println!(
        "generated {} samples, skipped {}, failed {}",
        report.written.len(),
        report.skipped.len(),
        report.errors.len()
    );
    if report.errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failure(format!("{} sample(s) failed", report.errors.len())))
    }
}
