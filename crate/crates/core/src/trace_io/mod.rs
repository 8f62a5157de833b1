//! On-disk formats: binary probe traces, run manifests, CSV series, JSON
//! reports and SVG scatter plots.

pub mod manifest;
pub mod report;
pub mod scatter;
pub mod series;
pub mod trace;

pub use manifest::{read_manifest, write_manifest, CheckpointEntry, RunManifest, MANIFEST_FILE};
pub use report::{check_report_schema, read_report, to_json_string, write_report, Report};
pub use scatter::{emit_scatter, fit_line, LineFit, ScatterOptions, ScatterPlot};
pub use series::{read_model_table, read_series, write_series, SeriesRow, SeriesTable};
pub use trace::{read_trace, write_trace, ProbeTraceFile, TraceTargets};
