#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flowgen_core::dataio::{write_mask, write_pfm, write_rgb, BitDepth};
use flowgen_core::oracle::{make_scene, SceneSpec, SyntheticScene};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn flowgen(args: &[&str], workers: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_flowgen"));
    cmd.args(args).env("RUST_LOG", "warn");
    match workers {
        Some(n) => cmd.env("FLOWGEN_WORKERS", n.to_string()),
        None => cmd.env_remove("FLOWGEN_WORKERS"),
    };
    cmd.output().expect("flowgen runs")
}

pub fn small_scene(seed: u64) -> SyntheticScene {
    let spec = SceneSpec::parse(&format!(
        "name small\nsize 96 72\nwall 30\nrect 20 15 50 45 4 object\ndisc 70 40 10 9\ntexture {seed}\n"
    ))
    .unwrap();
    make_scene(&spec).unwrap()
}

/// Writes image, PFM depth and mask for `scene` and an input list naming
/// them; returns the list path.
pub fn write_inputs(dir: &Path, scenes: &[SyntheticScene]) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    let mut list = String::new();
    for (i, s) in scenes.iter().enumerate() {
        write_rgb(&s.image, &dir.join(format!("img{i}.png")), BitDepth::Eight).unwrap();
        write_pfm(&s.depth, &dir.join(format!("depth{i}.pfm"))).unwrap();
        write_mask(&s.object_mask, &dir.join(format!("mask{i}.png"))).unwrap();
        list.push_str(&format!("img{i}.png depth{i}.pfm mask{i}.png\n"));
    }
    let path = dir.join("inputs.txt");
    fs::write(&path, list).unwrap();
    path
}

/// Every regular file under `dir` with its bytes, sorted by name.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}
