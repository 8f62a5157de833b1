#![allow(dead_code)]

use std::path::{Path, PathBuf};

use gradprobe::synthetic::{simulate_readouts, LatentStateModel};
use gradprobe::trace_io::read_series;
use gradprobe::TrajectorySeries;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

pub fn series_files() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(fixtures().join("series"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    files
}

/// Every series fixture on disk plus a few latent-simulator runs.
pub fn series_corpus() -> Vec<(String, TrajectorySeries)> {
    let mut out: Vec<(String, TrajectorySeries)> = series_files()
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, read_series(&p).unwrap().to_trajectory().unwrap())
        })
        .collect();
    for seed in 0..4 {
        let t = simulate_readouts(&LatentStateModel::default(), 300, seed).unwrap();
        out.push((format!("latent-{seed}"), t.to_trajectory().unwrap()));
    }
    out
}
