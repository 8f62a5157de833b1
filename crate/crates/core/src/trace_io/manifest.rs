use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probe::Mode;
use crate::trajectory::Orientation;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub step: u64,
    /// Trace files for this checkpoint, relative to the manifest directory.
    /// More than one means repeated probes to be median-aggregated.
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub task: Mode,
    pub classes: usize,
    pub dim: usize,
    pub probe_batch: usize,
    pub orientation: Orientation,
    pub checkpoints: Vec<CheckpointEntry>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn repeats(&self) -> usize {
        self.checkpoints.first().map_or(0, |c| c.files.len())
    }

    /// Checks step order, and when `dir` is given that every listed file exists.
    pub fn validate(&self, dir: Option<&Path>) -> Result<()> {
        for (i, w) in self.checkpoints.windows(2).enumerate() {
            if w[1].step <= w[0].step {
                return Err(Error::Invalid(format!(
                    "manifest checkpoint {} has step {} after {}",
                    i + 1,
                    w[1].step,
                    w[0].step
                )));
            }
        }
        if let Some(c) = self.checkpoints.iter().find(|c| c.files.is_empty()) {
            return Err(Error::Invalid(format!("checkpoint at step {} lists no files", c.step)));
        }
        if let Some(dir) = dir {
            for c in &self.checkpoints {
                for f in &c.files {
                    let p = dir.join(f);
                    if !p.is_file() {
                        return Err(Error::io(
                            p,
                            std::io::Error::new(std::io::ErrorKind::NotFound, "listed trace file is missing"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn write_manifest(path: impl AsRef<Path>, manifest: &RunManifest) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<RunManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m: RunManifest = serde_json::from_str(&text)?;
    m.validate(path.parent())?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(steps: &[u64]) -> RunManifest {
        RunManifest {
            run_id: "r".into(),
            task: Mode::Classification,
            classes: 2,
            dim: 1,
            probe_batch: 1,
            orientation: Orientation::HigherIsBetter,
            checkpoints: steps
                .iter()
                .map(|s| CheckpointEntry { step: *s, files: vec![format!("{s}.hgp")] })
                .collect(),
            notes: vec![],
        }
    }

    #[test]
    fn step_order_is_checked() {
        assert!(manifest(&[0, 5, 10]).validate(None).is_ok());
        assert!(manifest(&[0, 5, 5]).validate(None).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        write_manifest(&path, &manifest(&[1])).unwrap();
        assert!(matches!(read_manifest(&path), Err(Error::Io { .. })));
        fs::write(dir.path().join("1.hgp"), b"x").unwrap();
        assert_eq!(read_manifest(&path).unwrap(), manifest(&[1]));
    }
}
