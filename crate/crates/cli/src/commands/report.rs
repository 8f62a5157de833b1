use std::fs;

use gradprobe::stats::correlation_report;
use gradprobe::trace_io::{emit_scatter, LineFit, ScatterOptions};
use gradprobe::trajectory::{evaluate_strategies, StrategyReport};
use gradprobe::{CorrelationReport, Error, Orientation, PairedSample, Result};
use serde::Serialize;
use serde_json::json;

use super::{ensure_dir, io_error, read_table, write_json, Table};
use crate::args::ReportCmd;

#[derive(Serialize)]
struct SummaryBody {
    input_kind: &'static str,
    points: usize,
    log10_x: bool,
    fit: LineFit,
    correlation: CorrelationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    selection: Option<StrategyReport>,
}

pub fn run(cmd: &ReportCmd) -> Result<()> {
    let config = cmd.select.config();
    let (input_kind, sample, selection) = match read_table(&cmd.input)? {
        Table::Models(entries) => {
            let sample = PairedSample::new(
                entries.iter().map(|e| e.score).collect(),
                entries.iter().map(|e| e.metric).collect(),
            )?
            .with_labels(entries.iter().map(|e| e.name.clone()).collect())?;
            ("models", sample, None)
        }
        Table::Series(table) => {
            let series = table.to_trajectory()?;
            let rows: Vec<_> = table.rows.iter().filter(|r| r.metric.is_some()).collect();
            if rows.is_empty() {
                return Err(Error::Invalid(format!("{}: no row has a metric", cmd.input.display())));
            }
            let sample = PairedSample::new(
                rows.iter().map(|r| r.score).collect(),
                rows.iter().filter_map(|r| r.metric).collect(),
            )?;
            ("series", sample, Some(evaluate_strategies(&series, &config)?))
        }
    };
    let options = ScatterOptions {
        title: cmd.title.clone(),
        log10_x: cmd.log10_x,
        x_label: if cmd.log10_x { "log10 score".into() } else { "score".into() },
        lower_is_better: config.orientation == Orientation::LowerIsBetter,
        ..ScatterOptions::default()
    };
    let plot = emit_scatter(&sample, &options)?;
    let body = SummaryBody {
        input_kind,
        points: sample.len(),
        log10_x: cmd.log10_x,
        fit: plot.fit,
        correlation: correlation_report(&sample, cmd.stats.options())?,
        selection,
    };

    let out = &cmd.out.out;
    ensure_dir(out)?;
    let svg_path = out.join("scatter.svg");
    fs::write(&svg_path, &plot.svg).map_err(|e| io_error(&svg_path, e))?;
    let json_config = json!({
        "input": cmd.input.file_name().map(|f| f.to_string_lossy()),
        "title": cmd.title,
        "log10_x": cmd.log10_x,
        "resamples": cmd.stats.resamples,
        "selection": config,
    });
    write_json(out, "summary.json", "summary", Some(cmd.stats.seed), json_config, &body)?;
    println!(
        "report: {} points, slope {:.6}, pearson {:.4} -> {}",
        body.points,
        body.fit.slope,
        body.correlation.pearson_r,
        svg_path.display()
    );
    Ok(())
}
