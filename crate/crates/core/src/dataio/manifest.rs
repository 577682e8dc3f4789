//! Per-sample JSON manifest: everything needed to regenerate a sample
//! exactly, plus summary statistics.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{io_err, DataError};
use crate::camera::{CameraIntrinsics, CameraPose};

/// A rigid motion as a row-major 3x4 matrix `[R | t]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ManifestPose(pub [[f64; 4]; 3]);

impl From<&CameraPose> for ManifestPose {
    fn from(p: &CameraPose) -> Self {
        ManifestPose(std::array::from_fn(|r| {
            [p.rotation[(r, 0)], p.rotation[(r, 1)], p.rotation[(r, 2)], p.translation[r]]
        }))
    }
}

impl ManifestPose {
    pub fn to_pose(&self) -> CameraPose {
        let m = &self.0;
        CameraPose {
            rotation: Matrix3::from_fn(|r, c| m[r][c]),
            translation: Vector3::new(m[0][3], m[1][3], m[2][3]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub image: String,
    pub depth: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
    /// Scene units per stored depth unit.
    pub depth_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleManifest {
    pub generator: String,
    pub source: SourceRecord,
    /// Output files by role, relative to the manifest's directory.
    pub outputs: BTreeMap<String, String>,
    pub intrinsics: CameraIntrinsics,
    pub background_pose: ManifestPose,
    /// One pose per moving object, in component order.
    pub object_poses: Vec<ManifestPose>,
    pub planes: usize,
    /// Near and far plane depth actually used.
    pub depth_range: [f64; 2],
    pub seed: Option<u64>,
    pub input_index: u64,
    pub pair_index: u64,
    pub preset: String,
    pub object_motion: bool,
    pub multi_object: bool,
    pub inpaint: String,
    pub coverage_fraction: f64,
    pub occlusion_fraction: f64,
    pub inpaint_fraction: f64,
}

/// Writes pretty-printed JSON. Every entry of `outputs` must already exist
/// next to the manifest.
pub fn write_manifest(manifest: &SampleManifest, path: &Path) -> Result<(), DataError> {
    let base = path.parent().unwrap_or(Path::new(""));
    for rel in manifest.outputs.values() {
        let p = base.join(rel);
        if !p.exists() {
            return Err(DataError::MissingOutput(p));
        }
    }
    let mut text = serde_json::to_string_pretty(manifest).map_err(|e| DataError::Invalid(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_manifest(path: &Path) -> Result<SampleManifest, DataError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_manifest(&text)
}

pub(crate) fn parse_manifest(text: &str) -> Result<SampleManifest, DataError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    match serde_path_to_error::deserialize::<_, SampleManifest>(de) {
        Ok(m) => Ok(m),
        Err(e) => {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if inner.is_eof() {
                if let Some(missing) = missing_after_truncation(text) {
                    return Err(DataError::ParseFailure {
                        line: inner.line(),
                        column: inner.column(),
                        message: format!("file is truncated; {missing}"),
                    });
                }
            }
            let message = if path == "." || path.is_empty() { inner.to_string() } else { format!("{path}: {inner}") };
            Err(DataError::ParseFailure { line: inner.line(), column: inner.column(), message })
        }
    }
}

/// For a truncated file: closes the longest complete-line prefix and
/// reports the first field that is then missing.
fn missing_after_truncation(text: &str) -> Option<String> {
    let lines: Vec<&str> = text.lines().collect();
    for keep in (1..lines.len()).rev() {
        let mut prefix = lines[..keep].join("\n");
        let trimmed = prefix.trim_end().trim_end_matches(',').len();
        prefix.truncate(trimmed);
        let Some(closers) = closing_brackets(&prefix) else { continue };
        prefix.push_str(&closers);
        if serde_json::from_str::<serde_json::Value>(&prefix).is_err() {
            continue;
        }
        let de = &mut serde_json::Deserializer::from_str(&prefix);
        return match serde_path_to_error::deserialize::<_, SampleManifest>(de) {
            Ok(_) => None,
            Err(e) => {
                let path = e.path().to_string();
                let inner = e.into_inner().to_string();
                let inner = inner.split(" at line").next().unwrap_or(&inner).to_string();
                Some(if path == "." { inner } else { format!("{path}: {inner}") })
            }
        };
    }
    None
}

fn closing_brackets(prefix: &str) -> Option<String> {
    let mut stack = Vec::new();
    let (mut in_string, mut escaped) = (false, false);
    for ch in prefix.chars() {
        if in_string {
            match (escaped, ch) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_string = false,
                _ => {}
            }
            continue;
        }
        match ch {
            '"' => in_string = true,
            '{' => stack.push('}'),
            '[' => stack.push(']'),
            '}' | ']' if stack.pop() != Some(ch) => return None,
            _ => {}
        }
    }
    (!in_string).then(|| stack.iter().rev().collect())
}
