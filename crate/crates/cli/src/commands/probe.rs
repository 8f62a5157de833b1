use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use gradprobe::trace_io::{read_trace, write_series, RunManifest, SeriesRow, SeriesTable, MANIFEST_FILE};
use gradprobe::{probe, Error, ProbeScore, Result, ScoreKind};
use serde::Serialize;
use serde_json::json;

use super::{ensure_dir, io_error, median, write_json};
use crate::args::ProbeCmd;

const EXTRA_COLUMNS: [ScoreKind; 9] = ScoreKind::ALL;

struct Checkpoint {
    step: u64,
    /// As listed, for reports.
    names: Vec<String>,
    paths: Vec<PathBuf>,
}

#[derive(Serialize)]
struct CheckpointBody {
    step: u64,
    files: Vec<String>,
    scores: Vec<ProbeScore>,
}

#[derive(Serialize)]
struct ProbeBody {
    checkpoints: Vec<CheckpointBody>,
    errors: Vec<String>,
}

fn read_manifest_lenient(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let manifest: RunManifest = serde_json::from_str(&text)?;
    manifest.validate(None)?;
    Ok(manifest)
}

fn from_manifest(path: &Path) -> Result<Vec<Checkpoint>> {
    let manifest = read_manifest_lenient(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    Ok(manifest
        .checkpoints
        .into_iter()
        .map(|c| Checkpoint {
            step: c.step,
            paths: c.files.iter().map(|f| dir.join(f)).collect(),
            names: c.files,
        })
        .collect())
}

/// Groups loose trace files by the step in their header.
fn from_traces(paths: &[PathBuf], errors: &mut Vec<Error>) -> Vec<Checkpoint> {
    let mut by_step: BTreeMap<u64, Checkpoint> = BTreeMap::new();
    for p in paths {
        match read_trace(p) {
            Ok(t) => {
                let c = by_step.entry(t.step).or_insert_with(|| Checkpoint {
                    step: t.step,
                    names: Vec::new(),
                    paths: Vec::new(),
                });
                c.names.push(p.display().to_string());
                c.paths.push(p.clone());
            }
            Err(e) => errors.push(e),
        }
    }
    by_step.into_values().collect()
}

fn probe_checkpoint(c: &Checkpoint, cmd: &ProbeCmd) -> Result<(SeriesRow, Vec<ProbeScore>)> {
    let mut scores = Vec::with_capacity(c.paths.len());
    let mut metrics = Vec::new();
    let mut aux = Vec::new();
    for p in &c.paths {
        let trace = read_trace(p)?;
        if trace.step != c.step {
            return Err(Error::Invalid(format!(
                "{}: header step {} does not match checkpoint step {}",
                p.display(),
                trace.step,
                c.step
            )));
        }
        metrics.extend(trace.metric);
        aux.extend(trace.aux_loss);
        scores.push(probe(&trace.to_batch()?, cmd.options())?);
    }
    let readout = |kind: ScoreKind| -> Result<Option<f64>> {
        let values: Option<Vec<f64>> = scores.iter().map(|s| s.value(kind)).collect();
        values.map(|v| median(&v)).transpose()
    };
    let score = readout(cmd.score)?.ok_or_else(|| {
        Error::Invalid(format!("score {} is undefined for {:?} traces at step {}", cmd.score.name(), scores[0].mode, c.step))
    })?;
    let extras = EXTRA_COLUMNS.iter().map(|&k| readout(k)).collect::<Result<Vec<_>>>()?;
    let opt_median = |v: &[f64]| if v.is_empty() { Ok(None) } else { median(v).map(Some) };
    let row = SeriesRow {
        step: c.step,
        score,
        metric: opt_median(&metrics)?,
        aux_loss: opt_median(&aux)?,
        extras,
    };
    Ok((row, scores))
}

fn resolve(cmd: &ProbeCmd, errors: &mut Vec<Error>) -> Result<Vec<Checkpoint>> {
    if let [single] = cmd.inputs.as_slice() {
        if single.is_dir() {
            return from_manifest(&single.join(MANIFEST_FILE));
        }
        if single.extension().is_some_and(|e| e == "json") {
            return from_manifest(single);
        }
    }
    Ok(from_traces(&cmd.inputs, errors))
}

pub fn run(cmd: &ProbeCmd) -> Result<()> {
    let mut errors = Vec::new();
    let checkpoints = resolve(cmd, &mut errors)?;
    if let Some(k) = cmd.repeats {
        if let Some(c) = checkpoints.iter().find(|c| c.paths.len() != k) {
            return Err(Error::Invalid(format!(
                "checkpoint at step {} has {} trace files, expected {k} repeats",
                c.step,
                c.paths.len()
            )));
        }
    }
    if !cmd.keep_going && !errors.is_empty() {
        return Err(errors.swap_remove(0));
    }

    let mut rows = Vec::new();
    let mut bodies = Vec::new();
    for c in &checkpoints {
        match probe_checkpoint(c, cmd) {
            Ok((row, scores)) => {
                rows.push(row);
                bodies.push(CheckpointBody { step: c.step, files: c.names.clone(), scores });
            }
            Err(e) if cmd.keep_going => errors.push(e),
            Err(e) => return Err(e),
        }
    }
    if rows.is_empty() && errors.is_empty() {
        return Err(Error::Invalid("no trace files to probe".into()));
    }

    let out = &cmd.out.out;
    ensure_dir(out)?;
    let total = rows.len() + errors.len();
    if !rows.is_empty() {
        let table = SeriesTable {
            extra_columns: EXTRA_COLUMNS.iter().map(|k| k.name().to_string()).collect(),
            rows,
        };
        write_series(out.join("series.csv"), &table)?;
        let body = ProbeBody { checkpoints: bodies, errors: errors.iter().map(|e| e.to_string()).collect() };
        let config = json!({
            "score": cmd.score.name(),
            "eps_z": cmd.eps_z,
            "eps_w": cmd.eps_w,
            "repeats": cmd.repeats,
        });
        write_json(out, "probe.json", "probe", None, config, &body)?;
        println!(
            "probe: {} of {total} checkpoints scored ({}) -> {}",
            table.rows.len(),
            cmd.score.name(),
            out.join("series.csv").display()
        );
    }

    let mut errors = errors.into_iter();
    match errors.next() {
        None => Ok(()),
        Some(first) => {
            for e in errors {
                eprintln!("skipped: {e}");
            }
            Err(first)
        }
    }
}
