//! Self-contained SVG scatter plot with a least-squares line.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::PairedSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterOptions {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Fit and plot against `log10(x)`.
    pub log10_x: bool,
    /// Marks the y axis with a downward arrow.
    pub lower_is_better: bool,
    pub width: u32,
    pub height: u32,
}

impl Default for ScatterOptions {
    fn default() -> Self {
        Self {
            title: String::new(),
            x_label: "score".into(),
            y_label: "metric".into(),
            log10_x: false,
            lower_is_better: false,
            width: 640,
            height: 480,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

impl LineFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Ordinary least-squares line `y = intercept + slope·x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all x values are equal; no fit line".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok(LineFit { slope, intercept: my - slope * mx })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPlot {
    pub svg: String,
    /// Fit in plotted coordinates (log10 x when requested).
    pub fit: LineFit,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn padded_range(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5f64.max(lo.abs() * 0.05) };
    (lo - pad, hi + pad)
}

pub fn emit_scatter(sample: &PairedSample, options: &ScatterOptions) -> Result<ScatterPlot> {
    let x_raw = sample.x();
    let y = sample.y();
    let x: Vec<f64> = if options.log10_x {
        let bad: Vec<String> = x_raw
            .iter()
            .enumerate()
            .filter(|(_, v)| **v <= 0.0)
            .map(|(i, v)| format!("#{i} (x = {v})"))
            .collect();
        if !bad.is_empty() {
            return Err(Error::Invalid(format!("log10 axis needs x > 0; offending points: {}", bad.join(", "))));
        }
        x_raw.iter().map(|v| v.log10()).collect()
    } else {
        x_raw.to_vec()
    };
    let fit = fit_line(&x, y)?;

    let (w, h) = (options.width as f64, options.height as f64);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 60.0);
    let (x0, x1) = padded_range(&x);
    let (y0, y1) = padded_range(y);
    let px = |v: f64| left + (v - x0) / (x1 - x0) * (w - left - right);
    let py = |v: f64| h - bottom - (v - y0) / (y1 - y0) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        options.width, options.height, options.width, options.height
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if !options.title.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
            w / 2.0,
            escape(&options.title)
        );
    }
    let _ = writeln!(
        s,
        r#"<g stroke="black" stroke-width="1"><line x1="{left:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/><line x1="{left:.2}" y1="{top:.2}" x2="{left:.2}" y2="{:.2}"/></g>"#,
        h - bottom,
        w - right,
        h - bottom,
        h - bottom
    );
    for (v, anchor_x) in [(x0, px(x0)), (x1, px(x1))] {
        let _ = writeln!(
            s,
            r#"<text x="{anchor_x:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#,
            h - bottom + 16.0,
            tick(v, options.log10_x)
        );
    }
    for v in [y0, y1] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#,
            left - 6.0,
            py(v) + 4.0,
            tick(v, false)
        );
    }
    let x_label = if options.log10_x { format!("log10({})", options.x_label) } else { options.x_label.clone() };
    let y_label = if options.lower_is_better { format!("{} ↓ (lower is better)", options.y_label) } else { options.y_label.clone() };
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>"#,
        left + (w - left - right) / 2.0,
        h - 16.0,
        escape(&x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 {:.2})" data-lower-is-better="{}">{}</text>"#,
        top + (h - top - bottom) / 2.0,
        top + (h - top - bottom) / 2.0,
        options.lower_is_better,
        escape(&y_label)
    );
    let _ = writeln!(
        s,
        r#"<line class="fit" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="crimson" stroke-width="1.5" data-slope="{:?}" data-intercept="{:?}"/>"#,
        px(x0),
        py(fit.eval(x0)),
        px(x1),
        py(fit.eval(x1)),
        fit.slope,
        fit.intercept
    );
    let labels = sample.labels();
    for i in 0..x.len() {
        let _ = write!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="steelblue" data-x="{:?}" data-y="{:?}""#,
            px(x[i]),
            py(y[i]),
            x_raw[i],
            y[i]
        );
        match labels {
            Some(l) => {
                let _ = writeln!(s, "><title>{}</title></circle>", escape(&l[i]));
            }
            None => {
                let _ = writeln!(s, "/>");
            }
        }
    }
    s.push_str("</svg>\n");
    Ok(ScatterPlot { svg: s, fit })
}

fn tick(v: f64, log: bool) -> String {
    if log {
        format!("1e{v:.2}")
    } else {
        format!("{v:.4}")
    }
}
