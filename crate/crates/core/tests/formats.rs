mod common;

use std::fs;

use gradprobe::stats::{correlation_report, CorrelationOptions, PairedSample};
use gradprobe::trace_io::{
    check_report_schema, emit_scatter, read_report, read_series, read_trace, to_json_string, write_report,
    write_series, write_trace, ProbeTraceFile, Report, ScatterOptions, SeriesTable, TraceTargets,
};
use gradprobe::{probe, Error, ProbeOptions, TraceError};
use serde_json::json;

fn trace_files() -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = fs::read_dir(common::fixtures().join("traces")).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn trace_fixtures_round_trip_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    for path in trace_files() {
        let bytes = fs::read(&path).unwrap();
        let trace = read_trace(&path).unwrap();
        assert_eq!(trace.to_bytes(), bytes, "{}", path.display());
        let copy = dir.path().join(path.file_name().unwrap());
        write_trace(&copy, &trace).unwrap();
        assert_eq!(fs::read(&copy).unwrap(), bytes);
        assert_eq!(read_trace(&copy).unwrap(), trace);
    }
}

#[test]
fn zero_weight_fixture_layout() {
    let path = common::fixtures().join("traces/binary_zero_weight.hgp");
    assert_eq!(fs::metadata(&path).unwrap().len(), 4 + 2 + 1 + 1 + 4 + 4 + 4 + 8 + 8 + 8 + 8 + 4 + 4);
    let trace = read_trace(&path).unwrap();
    assert_eq!((trace.classes, trace.dim, trace.batch), (2, 1, 1));
    assert_eq!(trace.metric, None);
    assert_eq!(trace.targets, TraceTargets::Labels(vec![0]));
    let s = probe(&trace.to_batch().unwrap(), ProbeOptions::default()).unwrap();
    assert!((s.grad_fro - 0.5f64.sqrt()).abs() < 1e-12);
    assert!((s.loss - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn corrupt_traces_give_distinct_errors() {
    let good = fs::read(common::fixtures().join("traces/classification_3x4x5.hgp")).unwrap();
    let mut cases: Vec<(Vec<u8>, u8)> = Vec::new();
    let mut magic = good.clone();
    magic[0] = b'X';
    cases.push((magic, 10));
    let mut version = good.clone();
    version[4] = 9;
    cases.push((version, 11));
    let mut dtype = good.clone();
    dtype[7] = 1;
    cases.push((dtype, 12));
    let mut mode = good.clone();
    mode[6] = 4;
    cases.push((mode, 13));
    cases.push((good[..44].to_vec(), 14));
    cases.push((good[..10].to_vec(), 14));
    let mut trailing = good.clone();
    trailing.push(0);
    cases.push((trailing, 15));
    let mut label = good.clone();
    let n = label.len();
    label[n - 4..].copy_from_slice(&7u32.to_le_bytes());
    cases.push((label, 16));
    for (bytes, code) in cases {
        let err = ProbeTraceFile::from_bytes(&bytes).unwrap_err();
        assert_eq!(err.code(), code, "{err}");
    }
    assert!(matches!(ProbeTraceFile::from_bytes(&good[..44]), Err(TraceError::Truncated { .. })));

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.hgp");
    fs::write(&p, &good[..20]).unwrap();
    let err = read_trace(&p).unwrap_err();
    assert!(matches!(err, Error::Trace { .. }));
    assert!(err.to_string().contains("bad.hgp"));
}

#[test]
fn scores_from_file_equal_scores_in_memory() {
    for path in trace_files() {
        let trace = read_trace(&path).unwrap();
        let batch = trace.to_batch().unwrap();
        let again = ProbeTraceFile::from_batch(&batch, trace.step, trace.metric, trace.aux_loss);
        assert_eq!(again, trace);
        let a = probe(&batch, ProbeOptions::default()).unwrap();
        let b = probe(&ProbeTraceFile::from_bytes(&again.to_bytes()).unwrap().to_batch().unwrap(), ProbeOptions::default())
            .unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn series_fixtures_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for path in common::series_files() {
        let text = fs::read_to_string(&path).unwrap();
        let table = read_series(&path).unwrap();
        assert_eq!(table.to_csv_string(), text, "{}", path.display());
        let copy = dir.path().join(path.file_name().unwrap());
        write_series(&copy, &table).unwrap();
        let back = read_series(&copy).unwrap();
        assert_eq!(back, table);
        write_series(&copy, &back).unwrap();
        assert_eq!(fs::read_to_string(&copy).unwrap(), text);
    }
}

#[test]
fn series_errors_name_rows() {
    let p = std::path::Path::new("inline.csv");
    let err = SeriesTable::parse("step,score,metric,aux_loss\n0,1,0.5,NaN\n5,x,0.5,NaN\n", p).unwrap_err();
    assert!(err.to_string().contains("row 2"), "{err}");
    let err = SeriesTable::parse("step,score,metric,aux_loss\n5,1,NaN,NaN\n5,1,NaN,NaN\n", p).unwrap_err();
    assert!(err.to_string().contains("row 2"), "{err}");
}

#[test]
fn report_fixtures_round_trip_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(common::fixtures().join("reports")).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let value = read_report(&path).unwrap();
        check_report_schema(&value).unwrap();
        assert_eq!(to_json_string(&value).unwrap(), text);
        let copy = dir.path().join("copy.json");
        write_report(&copy, &value).unwrap();
        let again = read_report(&copy).unwrap();
        write_report(&copy, &again).unwrap();
        assert_eq!(fs::read_to_string(&copy).unwrap(), text);
    }
}

#[test]
fn generated_correlation_report_is_deterministic_and_valid() {
    let x: Vec<f64> = (0..15).map(|i| (i as f64 * 0.37).sin() + i as f64 * 0.1).collect();
    let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| -v + 0.2 * (i as f64).cos()).collect();
    let sample = PairedSample::new(x, y).unwrap();
    let opts = CorrelationOptions { n_resamples: 1000, seed: 11 };
    let make = || {
        let corr = correlation_report(&sample, opts).unwrap();
        let body = json!({ "correlation": corr });
        to_json_string(&Report::new("correlation", Some(11), json!({"resamples": 1000}), &body)).unwrap()
    };
    let a = make();
    assert_eq!(a, make());
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    check_report_schema(&v).unwrap();
    let c = &v["body"]["correlation"];
    assert!(c["ci_low"].as_f64().unwrap() <= c["pearson_r"].as_f64().unwrap());
    assert!(c["pearson_r"].as_f64().unwrap() <= c["ci_high"].as_f64().unwrap());
}

#[test]
fn scatter_fit_and_determinism() {
    let two = PairedSample::new(vec![1.0, 3.0], vec![2.0, -2.0]).unwrap();
    let plot = emit_scatter(&two, &ScatterOptions::default()).unwrap();
    assert!((plot.fit.eval(1.0) - 2.0).abs() < 1e-12 && (plot.fit.eval(3.0) + 2.0).abs() < 1e-12);

    let logs = PairedSample::new(vec![10.0, 100.0, 1000.0], vec![3.0, 5.0, 7.0]).unwrap();
    let opts = ScatterOptions { log10_x: true, lower_is_better: true, title: "a < b".into(), ..Default::default() };
    let plot = emit_scatter(&logs, &opts).unwrap();
    assert!((plot.fit.slope - 2.0).abs() < 1e-12 && (plot.fit.intercept - 1.0).abs() < 1e-12);
    assert_eq!(plot.svg, emit_scatter(&logs, &opts).unwrap().svg);
    assert!(plot.svg.contains("lower is better"));
    assert!(plot.svg.contains("a &lt; b"));
    assert_eq!(plot.svg.matches("<circle").count(), 3);
    assert!(plot.svg.contains(r#"data-x="100.0""#));

    let bad = PairedSample::new(vec![1.0, 0.0, -2.0], vec![1.0, 2.0, 3.0]).unwrap();
    let err = emit_scatter(&bad, &opts).unwrap_err().to_string();
    assert!(err.contains("#1") && err.contains("#2") && !err.contains("#0"), "{err}");
}
