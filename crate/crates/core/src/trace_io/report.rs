//! JSON report envelope.
//!
//! Every report is an object with these keys, in this order:
//!
//! - `tool`: always `"gradprobe"`
//! - `version`: crate version string
//! - `kind`: one of `probe`, `selection`, `correlation`, `sweep`, `summary`
//! - `seed`: unsigned integer or `null`
//! - `config`: object echoing the options used
//! - `body`: kind-specific object; `correlation` bodies carry a `correlation`
//!   object with `pearson_r`, `ci_low`, `ci_high`, `n_resamples` and `seed`

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

pub const TOOL: &str = "gradprobe";
pub const REPORT_KINDS: [&str; 5] = ["probe", "selection", "correlation", "sweep", "summary"];

#[derive(Debug, Clone, Serialize)]
pub struct Report<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub kind: &'a str,
    pub seed: Option<u64>,
    pub config: Value,
    pub body: &'a T,
}

impl<'a, T: Serialize> Report<'a, T> {
    pub fn new(kind: &'a str, seed: Option<u64>, config: Value, body: &'a T) -> Self {
        Self { tool: TOOL, version: env!("CARGO_PKG_VERSION"), kind, seed, config, body }
    }
}

/// Pretty JSON with a trailing newline. Field order follows declaration order.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_report<T: Serialize + ?Sized>(path: impl AsRef<Path>, report: &T) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_json_string(report)?).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<Value> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Checks a parsed report against the envelope schema above.
pub fn check_report_schema(value: &Value) -> std::result::Result<(), String> {
    let obj = value.as_object().ok_or("report is not an object")?;
    let keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    if keys != ["tool", "version", "kind", "seed", "config", "body"] {
        return Err(format!("unexpected top-level keys {keys:?}"));
    }
    if obj["tool"] != TOOL {
        return Err("tool must be \"gradprobe\"".into());
    }
    if !obj["version"].is_string() {
        return Err("version must be a string".into());
    }
    let kind = obj["kind"].as_str().ok_or("kind must be a string")?;
    if !REPORT_KINDS.contains(&kind) {
        return Err(format!("unknown kind {kind:?}"));
    }
    if !(obj["seed"].is_u64() || obj["seed"].is_null()) {
        return Err("seed must be an unsigned integer or null".into());
    }
    if !obj["config"].is_object() {
        return Err("config must be an object".into());
    }
    let body = obj["body"].as_object().ok_or("body must be an object")?;
    if kind == "correlation" {
        let corr = body.get("correlation").and_then(Value::as_object).ok_or("missing correlation")?;
        for k in ["pearson_r", "ci_low", "ci_high"] {
            if !corr.get(k).is_some_and(Value::is_number) {
                return Err(format!("correlation.{k} must be a number"));
            }
        }
        for k in ["n_resamples", "seed"] {
            if !corr.get(k).is_some_and(Value::is_u64) {
                return Err(format!("correlation.{k} must be an unsigned integer"));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn envelope_is_stable_and_valid() {
        let body = json!({"correlation": {"pearson_r": -0.9, "ci_low": -0.95, "ci_high": -0.8, "n_resamples": 100, "seed": 3}});
        let r = Report::new("correlation", Some(3), json!({"resamples": 100}), &body);
        let a = to_json_string(&r).unwrap();
        let b = to_json_string(&r).unwrap();
        assert_eq!(a, b);
        let v: Value = serde_json::from_str(&a).unwrap();
        check_report_schema(&v).unwrap();
        assert_eq!(to_json_string(&v).unwrap(), a);
    }

    #[test]
    fn schema_rejects_bad_reports() {
        let body = json!({});
        let v = serde_json::to_value(Report::new("correlation", None, json!({}), &body)).unwrap();
        assert!(check_report_schema(&v).is_err());
        let v = serde_json::to_value(Report::new("bogus", None, json!({}), &body)).unwrap();
        assert!(check_report_schema(&v).is_err());
        assert!(check_report_schema(&json!([1, 2])).is_err());
    }
}
