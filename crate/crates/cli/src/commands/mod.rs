pub mod correlate;
pub mod probe;
pub mod report;
pub mod select;
pub mod simulate;
pub mod sweep;

use std::fs;
use std::path::{Path, PathBuf};

use gradprobe::trace_io::{read_model_table, read_series, write_report, Report, SeriesTable};
use gradprobe::trajectory::median_aggregate;
use gradprobe::{stats::ModelEntry, Error, Result};
use serde::Serialize;
use serde_json::Value;

pub fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

pub fn write_json<T: Serialize>(
    dir: &Path,
    file: &str,
    kind: &str,
    seed: Option<u64>,
    config: Value,
    body: &T,
) -> Result<PathBuf> {
    let path = dir.join(file);
    write_report(&path, &Report::new(kind, seed, config, body))?;
    Ok(path)
}

pub fn median(values: &[f64]) -> Result<f64> {
    let repeated: Vec<Vec<f64>> = values.iter().map(|v| vec![*v]).collect();
    Ok(median_aggregate(&repeated)?[0])
}

/// A CSV input that is either a probe series or a `name,score,metric` table.
pub enum Table {
    Series(SeriesTable),
    Models(Vec<ModelEntry>),
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    if gradprobe::trace_io::series::is_model_table(&text) {
        Ok(Table::Models(read_model_table(path)?))
    } else {
        Ok(Table::Series(read_series(path)?))
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |g| format!("{g:.6}"))
}
