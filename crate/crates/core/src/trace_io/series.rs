//! CSV series tables: `step,score,metric,aux_loss[,extra...]`.
//!
//! Absent values are written as `NaN`; empty cells and `nan` are accepted on read.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::stats::ModelEntry;
use crate::trajectory::{Record, TrajectorySeries};

pub const SERIES_COLUMNS: [&str; 4] = ["step", "score", "metric", "aux_loss"];

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub step: u64,
    pub score: f64,
    pub metric: Option<f64>,
    pub aux_loss: Option<f64>,
    pub extras: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeriesTable {
    pub extra_columns: Vec<String>,
    pub rows: Vec<SeriesRow>,
}

impl SeriesTable {
    pub fn from_trajectory(series: &TrajectorySeries) -> Self {
        let rows = series
            .records()
            .iter()
            .map(|r| SeriesRow {
                step: r.step,
                score: r.score,
                metric: r.metric,
                aux_loss: r.aux_loss,
                extras: Vec::new(),
            })
            .collect();
        Self { extra_columns: Vec::new(), rows }
    }

    pub fn to_trajectory(&self) -> Result<TrajectorySeries> {
        TrajectorySeries::new(
            self.rows
                .iter()
                .map(|r| Record { step: r.step, score: r.score, metric: r.metric, aux_loss: r.aux_loss })
                .collect(),
        )
    }

    /// Values of an extra column, `None` for unknown names.
    pub fn extra(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.extra_columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r.extras[k]).collect())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = SERIES_COLUMNS.join(",");
        for c in &self.extra_columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.step.to_string());
            out.push(',');
            out.push_str(&fmt_f64(r.score));
            for v in [r.metric, r.aux_loss].iter().chain(&r.extras) {
                out.push(',');
                out.push_str(&fmt_opt(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |row: usize, detail: String| Error::Series { path: path.to_path_buf(), row, detail };
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| err(0, e.to_string()))?.clone();
        let names: Vec<&str> = header.iter().collect();
        let fixed = names.iter().zip(SERIES_COLUMNS).take_while(|(a, b)| **a == *b).count();
        if fixed < 2 {
            return Err(err(0, format!("header must start with step,score; got {:?}", names)));
        }
        if fixed < SERIES_COLUMNS.len() && names.len() > fixed {
            return Err(err(0, format!("unexpected column {:?} at position {fixed}", names[fixed])));
        }
        let extra_columns: Vec<String> = names[fixed..].iter().map(|s| s.to_string()).collect();

        let mut rows: Vec<SeriesRow> = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| err(row, e.to_string()))?;
            if rec.len() != names.len() {
                return Err(err(row, format!("expected {} fields, found {}", names.len(), rec.len())));
            }
            let step: u64 = rec[0].parse().map_err(|_| err(row, format!("bad step {:?}", &rec[0])))?;
            let score = parse_cell(&rec[1])
                .map_err(|d| err(row, format!("score: {d}")))?
                .ok_or_else(|| err(row, "score is missing".into()))?;
            let opt = |k: usize, name: &str| -> Result<Option<f64>> {
                if k >= fixed {
                    return Ok(None);
                }
                parse_cell(&rec[k]).map_err(|d| err(row, format!("{name}: {d}")))
            };
            let metric = opt(2, "metric")?;
            let aux_loss = opt(3, "aux_loss")?;
            let extras = (fixed..names.len())
                .map(|k| parse_cell(&rec[k]).map_err(|d| err(row, format!("{}: {d}", names[k]))))
                .collect::<Result<Vec<_>>>()?;
            if let Some(prev) = rows.last() {
                if step <= prev.step {
                    return Err(err(row, format!("step {step} does not increase past {}", prev.step)));
                }
            }
            rows.push(SeriesRow { step, score, metric, aux_loss, extras });
        }
        Ok(Self { extra_columns, rows })
    }
}

fn parse_cell(cell: &str) -> std::result::Result<Option<f64>, String> {
    if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    let v: f64 = cell.parse().map_err(|_| format!("malformed number {cell:?}"))?;
    if v.is_finite() {
        Ok(Some(v))
    } else {
        Err(format!("non-finite value {cell:?}"))
    }
}

/// Shortest representation that parses back to the same f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_else(|| "NaN".to_string())
}

pub fn read_series(path: impl AsRef<Path>) -> Result<SeriesTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SeriesTable::parse(&text, path)
}

pub fn write_series(path: impl AsRef<Path>, table: &SeriesTable) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, table.to_csv_string()).map_err(|e| Error::io(path, e))
}

/// Reads a `name,score,metric` table of models.
pub fn read_model_table(path: impl AsRef<Path>) -> Result<Vec<ModelEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model_table(&text, path)
}

pub fn parse_model_table(text: &str, path: &Path) -> Result<Vec<ModelEntry>> {
    let err = |row: usize, detail: String| Error::Series { path: path.to_path_buf(), row, detail };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| err(0, e.to_string()))?.clone();
    if header.iter().take(3).collect::<Vec<_>>() != ["name", "score", "metric"] {
        return Err(err(0, "model table header must be name,score,metric".into()));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| err(row, e.to_string()))?;
        let num = |k: usize| -> Result<f64> {
            parse_cell(&rec[k])
                .map_err(|d| err(row, d))?
                .ok_or_else(|| err(row, format!("missing {}", ["name", "score", "metric"][k])))
        };
        out.push(ModelEntry { name: rec[0].to_string(), score: num(1)?, metric: num(2)? });
    }
    Ok(out)
}

/// True when the CSV header looks like a model table rather than a series.
pub fn is_model_table(text: &str) -> bool {
    text.lines().next().is_some_and(|h| h.trim_start().starts_with("name,"))
}
