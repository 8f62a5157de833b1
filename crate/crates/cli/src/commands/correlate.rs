use gradprobe::stats::{correlation_report, ols_with_covariate, rank_models, RankingReport};
use gradprobe::{CorrelationReport, Error, PairedSample, RegressionReport, Result};
use serde::Serialize;
use serde_json::json;

use super::{ensure_dir, read_table, write_json, Table};
use crate::args::CorrelateCmd;

#[derive(Serialize)]
struct CorrelateBody {
    input_kind: &'static str,
    /// Series rows dropped for lacking a metric.
    rows_without_metric: usize,
    correlation: CorrelationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    regression: Option<RegressionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    regression_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ranking: Option<RankingReport>,
}

pub fn run(cmd: &CorrelateCmd) -> Result<()> {
    let options = cmd.stats.options();
    let body = match read_table(&cmd.input)? {
        Table::Models(entries) => {
            let sample = PairedSample::new(
                entries.iter().map(|e| e.score).collect(),
                entries.iter().map(|e| e.metric).collect(),
            )?
            .with_labels(entries.iter().map(|e| e.name.clone()).collect())?;
            CorrelateBody {
                input_kind: "models",
                rows_without_metric: 0,
                correlation: correlation_report(&sample, options)?,
                regression: None,
                regression_error: None,
                ranking: Some(rank_models(&entries, cmd.orientation.get())?),
            }
        }
        Table::Series(table) => {
            let rows: Vec<_> = table.rows.iter().filter(|r| r.metric.is_some()).collect();
            if rows.is_empty() {
                return Err(Error::Invalid(format!("{}: no row has a metric", cmd.input.display())));
            }
            let score: Vec<f64> = rows.iter().map(|r| r.score).collect();
            let metric: Vec<f64> = rows.iter().filter_map(|r| r.metric).collect();
            let steps: Vec<f64> = rows.iter().map(|r| r.step as f64).collect();
            let sample = PairedSample::new(score.clone(), metric.clone())?;
            let correlation = correlation_report(&sample, options)?;
            let (regression, regression_error) = if rows.len() >= 4 {
                match ols_with_covariate(&metric, &score, &steps) {
                    Ok(r) => (Some(r), None),
                    Err(e) => (None, Some(e.to_string())),
                }
            } else {
                (None, Some("regression needs at least 4 rows".into()))
            };
            CorrelateBody {
                input_kind: "series",
                rows_without_metric: table.rows.len() - rows.len(),
                correlation,
                regression,
                regression_error,
                ranking: None,
            }
        }
    };
    ensure_dir(&cmd.out.out)?;
    let config = json!({
        "input": cmd.input.file_name().map(|f| f.to_string_lossy()),
        "resamples": options.n_resamples,
        "orientation": cmd.orientation.get(),
    });
    let path = write_json(&cmd.out.out, "correlation.json", "correlation", Some(options.seed), config, &body)?;
    let c = &body.correlation;
    println!(
        "correlate: n={} pearson {:.4} [{:.4}, {:.4}] spearman {:.4} -> {}",
        c.n,
        c.pearson_r,
        c.ci_low,
        c.ci_high,
        c.spearman_rho,
        path.display()
    );
    Ok(())
}
