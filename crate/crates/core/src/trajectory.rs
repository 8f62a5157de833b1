//! Validation-free checkpoint selection over a score trajectory.
//!
//! The selectors only ever read `step`, `score` and (for lead-lag alignment)
//! `aux_loss`. The `metric` column is touched exclusively when computing the
//! gap to the oracle.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::pearson_slices;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub step: u64,
    pub score: f64,
    pub metric: Option<f64>,
    pub aux_loss: Option<f64>,
}

impl Record {
    pub fn new(step: u64, score: f64) -> Self {
        Self { step, score, metric: None, aux_loss: None }
    }
}

/// Ordered per-checkpoint records of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySeries {
    records: Vec<Record>,
}

impl TrajectorySeries {
    pub fn new(records: Vec<Record>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Invalid("trajectory needs at least one record".into()));
        }
        for (i, r) in records.iter().enumerate() {
            if !r.score.is_finite() {
                return Err(Error::Invalid(format!("non-finite score at record {i}")));
            }
            if i > 0 && r.step <= records[i - 1].step {
                return Err(Error::Invalid(format!(
                    "steps must be strictly increasing: record {i} has step {} after {}",
                    r.step,
                    records[i - 1].step
                )));
            }
        }
        Ok(Self { records })
    }

    /// Convenience constructor: steps 0, 1, 2, ... with no metric.
    pub fn from_scores(scores: &[f64]) -> Result<Self> {
        Self::new(scores.iter().enumerate().map(|(i, &s)| Record::new(i as u64, s)).collect())
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.score).collect()
    }

    pub fn steps(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.step).collect()
    }

    /// Metric values if every record carries one.
    pub fn metrics(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.metric).collect()
    }

    pub fn aux_losses(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.aux_loss).collect()
    }

    pub fn with_metrics(mut self, metrics: &[f64]) -> Result<Self> {
        if metrics.len() != self.records.len() {
            return Err(Error::Shape(format!(
                "{} metrics for {} records",
                metrics.len(),
                self.records.len()
            )));
        }
        for (r, &m) in self.records.iter_mut().zip(metrics) {
            r.metric = Some(m);
        }
        Ok(self)
    }

    pub fn without_metric(&self) -> Self {
        let records = self.records.iter().map(|r| Record { metric: None, ..*r }).collect();
        Self { records }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    HigherIsBetter,
    LowerIsBetter,
}

impl Orientation {
    /// Maps a metric so that larger is always better.
    fn oriented(self, m: f64) -> f64 {
        match self {
            Orientation::HigherIsBetter => m,
            Orientation::LowerIsBetter => -m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub ema_span: Option<usize>,
    pub ema_beta: Option<f64>,
    pub tail_size: Option<usize>,
    pub tail_fraction: Option<f64>,
    pub quantile: f64,
    pub patience: usize,
    pub max_lag: usize,
    pub repeats: usize,
    pub orientation: Orientation,
}

pub const DEFAULT_TAIL_FRACTION: f64 = 0.2;

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            ema_span: Some(3),
            ema_beta: None,
            tail_size: Some(80),
            tail_fraction: None,
            quantile: 0.1,
            patience: 3,
            max_lag: 10,
            repeats: 1,
            orientation: Orientation::HigherIsBetter,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ema_span.is_some() && self.ema_beta.is_some() {
            return Err(Error::Config("both EMA span and EMA beta supplied".into()));
        }
        if self.ema_span == Some(0) {
            return Err(Error::Config("EMA span must be positive".into()));
        }
        if let Some(b) = self.ema_beta {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("EMA beta must lie in [0, 1), got {b}")));
            }
        }
        if self.tail_size.is_some() && self.tail_fraction.is_some() {
            return Err(Error::Config("both tail size and tail fraction supplied".into()));
        }
        if self.tail_size == Some(0) {
            return Err(Error::Config("tail size must be positive".into()));
        }
        if let Some(f) = self.tail_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!("tail fraction must lie in (0, 1], got {f}")));
            }
        }
        if !(self.quantile > 0.0 && self.quantile <= 1.0) {
            return Err(Error::Config(format!("quantile must lie in (0, 1], got {}", self.quantile)));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be positive".into()));
        }
        Ok(())
    }

    /// EMA decay. A span `k` maps to `1 - 2/(k+1)`; no smoothing when neither is set.
    pub fn decay(&self) -> f64 {
        match (self.ema_beta, self.ema_span) {
            (Some(b), _) => b,
            (None, Some(k)) => 1.0 - 2.0 / (k as f64 + 1.0),
            (None, None) => 0.0,
        }
    }

    pub fn with_span(&self, k: usize) -> Self {
        Self { ema_span: Some(k), ema_beta: None, ..self.clone() }
    }

    pub fn with_tail_size(&self, s: usize) -> Self {
        Self { tail_size: Some(s), tail_fraction: None, ..self.clone() }
    }
}

pub fn ema_smooth(series: &[f64], config: &SelectionConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if series.is_empty() {
        return Err(Error::Invalid("cannot smooth an empty series".into()));
    }
    let beta = config.decay();
    if beta == 0.0 {
        return Ok(series.to_vec());
    }
    let mut out = Vec::with_capacity(series.len());
    let mut s = series[0];
    out.push(s);
    for &x in &series[1..] {
        s = beta * s + (1.0 - beta) * x;
        out.push(s);
    }
    Ok(out)
}

/// Index range of the tail window for a series of `len` records.
pub fn tail_window(len: usize, config: &SelectionConfig) -> Range<usize> {
    let count = match config.tail_size {
        Some(s) => s,
        None => {
            let f = config.tail_fraction.unwrap_or(DEFAULT_TAIL_FRACTION);
            (f * len as f64).ceil() as usize
        }
    };
    let count = count.clamp(1, len.max(1)).min(len);
    len - count..len
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    RawArgmin,
    EmaArgmin,
    Quantile,
    QuantilePatience,
    LeadLag,
    Last,
    LossMin,
    Oracle,
}

impl Strategy {
    pub const ALL: [Strategy; 8] = [
        Strategy::RawArgmin,
        Strategy::EmaArgmin,
        Strategy::Quantile,
        Strategy::QuantilePatience,
        Strategy::LeadLag,
        Strategy::Last,
        Strategy::LossMin,
        Strategy::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::RawArgmin => "raw_argmin",
            Strategy::EmaArgmin => "ema_argmin",
            Strategy::Quantile => "quantile",
            Strategy::QuantilePatience => "quantile_patience",
            Strategy::LeadLag => "lead_lag",
            Strategy::Last => "last",
            Strategy::LossMin => "loss_min",
            Strategy::Oracle => "oracle",
        }
    }

    /// Strategies driven by the probe score.
    pub fn is_head_gradient(self) -> bool {
        matches!(
            self,
            Strategy::RawArgmin
                | Strategy::EmaArgmin
                | Strategy::Quantile
                | Strategy::QuantilePatience
                | Strategy::LeadLag
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub strategy: Strategy,
    pub chosen_index: usize,
    pub chosen_step: u64,
    pub window_start: usize,
    pub window_end: usize,
    /// Steps of the candidate set (quantile strategies) or just the choice.
    pub candidate_steps: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lag: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_step: Option<u64>,
    #[serde(skip)]
    pub smoothed: Vec<f64>,
}

impl SelectionResult {
    fn new(
        strategy: Strategy,
        series: &TrajectorySeries,
        window: &Range<usize>,
        chosen_index: usize,
        candidates: &[usize],
        smoothed: Vec<f64>,
    ) -> Self {
        let steps = series.records();
        Self {
            strategy,
            chosen_index,
            chosen_step: steps[chosen_index].step,
            window_start: window.start,
            window_end: window.end,
            candidate_steps: candidates.iter().map(|&i| steps[i].step).collect(),
            lag: None,
            gap: None,
            oracle_step: None,
            smoothed,
        }
    }
}

/// First index of the minimum of `values[range]`.
fn argmin_in(values: &[f64], range: Range<usize>) -> usize {
    let mut best = range.start;
    for i in range {
        if values[i] < values[best] {
            best = i;
        }
    }
    best
}

/// `argmin_t` of the EMA-smoothed score within the tail window; ties go to
/// the earliest step.
pub fn select_argmin(series: &TrajectorySeries, config: &SelectionConfig) -> Result<SelectionResult> {
    let smoothed = ema_smooth(&series.scores(), config)?;
    let window = tail_window(series.len(), config);
    let chosen = argmin_in(&smoothed, window.clone());
    let strategy = if config.decay() == 0.0 { Strategy::RawArgmin } else { Strategy::EmaArgmin };
    Ok(SelectionResult::new(strategy, series, &window, chosen, &[chosen], smoothed))
}

/// Indices in `window` whose value is at or below the nearest-rank
/// `q`-quantile of the window values.
pub fn quantile_candidates(values: &[f64], window: Range<usize>, q: f64) -> Vec<usize> {
    let mut sorted: Vec<f64> = values[window.clone()].to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    let threshold = sorted[rank - 1];
    window.filter(|&i| values[i] <= threshold).collect()
}

/// Quantile candidates, then an early-stopping scan: the incumbent is the best
/// candidate seen so far and is replaced only by a strictly smaller candidate.
/// It is chosen once it has stayed incumbent for `patience` further records.
/// If the window ends before that happens, the window argmin is returned.
pub fn select_quantile_patience(
    series: &TrajectorySeries,
    config: &SelectionConfig,
) -> Result<SelectionResult> {
    let smoothed = ema_smooth(&series.scores(), config)?;
    let window = tail_window(series.len(), config);
    let candidates = quantile_candidates(&smoothed, window.clone(), config.quantile);
    let mut is_candidate = vec![false; series.len()];
    for &i in &candidates {
        is_candidate[i] = true;
    }

    let mut incumbent: Option<usize> = None;
    let mut since = 0usize;
    let mut confirmed = None;
    for i in window.clone() {
        match incumbent {
            Some(j) if !(is_candidate[i] && smoothed[i] < smoothed[j]) => since += 1,
            _ if is_candidate[i] => {
                incumbent = Some(i);
                since = 0;
            }
            _ => {}
        }
        if let Some(j) = incumbent {
            if since >= config.patience {
                confirmed = Some(j);
                break;
            }
        }
    }
    let chosen = confirmed.unwrap_or_else(|| argmin_in(&smoothed, window.clone()));
    Ok(SelectionResult::new(
        Strategy::QuantilePatience,
        series,
        &window,
        chosen,
        &candidates,
        smoothed,
    ))
}

/// Quantile candidates from the smoothed score, resolved by the lowest raw score.
pub fn select_quantile(series: &TrajectorySeries, config: &SelectionConfig) -> Result<SelectionResult> {
    let smoothed = ema_smooth(&series.scores(), config)?;
    let window = tail_window(series.len(), config);
    let candidates = quantile_candidates(&smoothed, window.clone(), config.quantile);
    let raw = series.scores();
    let mut chosen = candidates[0];
    for &i in &candidates {
        if raw[i] < raw[chosen] {
            chosen = i;
        }
    }
    Ok(SelectionResult::new(Strategy::Quantile, series, &window, chosen, &candidates, smoothed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagResult {
    pub lag: i64,
    pub correlation: f64,
    /// Set when the overlap was too short to evaluate any lag.
    pub warning: bool,
}

/// Lag `ℓ ∈ [-L, L]` maximizing `|pearson(score[t], reference[t + ℓ])|` over
/// the overlap. Ties favour the smallest `|ℓ|`, then the negative lag.
pub fn best_lag(score: &[f64], reference: &[f64], max_lag: usize) -> Result<LagResult> {
    if score.len() != reference.len() {
        return Err(Error::Shape(format!(
            "lag alignment needs equal lengths, got {} and {}",
            score.len(),
            reference.len()
        )));
    }
    let n = score.len();
    if n < 3 {
        return Ok(LagResult { lag: 0, correlation: 0.0, warning: true });
    }
    // Keep at least three overlapping points.
    let max_lag = max_lag.min(n - 3) as i64;
    let mut best = LagResult { lag: 0, correlation: 0.0, warning: false };
    let mut best_abs = -1.0;
    let mut lags = vec![0i64];
    for l in 1..=max_lag {
        lags.push(-l);
        lags.push(l);
    }
    for lag in lags {
        let (a, b) = if lag >= 0 {
            let l = lag as usize;
            (&score[..n - l], &reference[l..])
        } else {
            let l = (-lag) as usize;
            (&score[l..], &reference[..n - l])
        };
        let Ok(r) = pearson_slices(a, b) else { continue };
        if r.abs() > best_abs + 1e-12 {
            best_abs = r.abs();
            best = LagResult { lag, correlation: r, warning: false };
        }
    }
    Ok(best)
}

/// Pointwise median over `K` repeated score lists; even `K` uses the midpoint.
pub fn median_aggregate(repeated: &[Vec<f64>]) -> Result<Vec<f64>> {
    let Some(first) = repeated.first() else {
        return Err(Error::Invalid("median of zero repeats".into()));
    };
    let n = first.len();
    if let Some(bad) = repeated.iter().find(|r| r.len() != n) {
        return Err(Error::Shape(format!("repeat lengths differ: {} vs {n}", bad.len())));
    }
    let mut buf = Vec::with_capacity(repeated.len());
    Ok((0..n)
        .map(|t| {
            buf.clear();
            buf.extend(repeated.iter().map(|r| r[t]));
            median(&mut buf)
        })
        .collect())
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

/// Outcome of running every strategy over one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub window_start: usize,
    pub window_end: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_step: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub global_oracle_step: Option<u64>,
    pub results: Vec<SelectionResult>,
}

impl StrategyReport {
    pub fn get(&self, strategy: Strategy) -> Option<&SelectionResult> {
        self.results.iter().find(|r| r.strategy == strategy)
    }
}

fn oracle_index(metrics: &[f64], range: Range<usize>, orientation: Orientation) -> usize {
    let mut best = range.start;
    for i in range {
        if orientation.oriented(metrics[i]) > orientation.oriented(metrics[best]) {
            best = i;
        }
    }
    best
}

/// Runs every selection strategy. Gaps are `metric(tail oracle) − metric(selected)`
/// in the configured orientation and are only filled when every record has a metric.
pub fn evaluate_strategies(
    series: &TrajectorySeries,
    config: &SelectionConfig,
) -> Result<StrategyReport> {
    config.validate()?;
    let window = tail_window(series.len(), config);
    let raw_cfg = SelectionConfig { ema_span: None, ema_beta: None, ..config.clone() };

    let mut results = Vec::with_capacity(Strategy::ALL.len());
    let mut raw = select_argmin(series, &raw_cfg)?;
    raw.strategy = Strategy::RawArgmin;
    results.push(raw);
    let mut ema = select_argmin(series, config)?;
    ema.strategy = Strategy::EmaArgmin;
    let ema_index = ema.chosen_index;
    let ema_smoothed = ema.smoothed.clone();
    results.push(ema);
    results.push(select_quantile(series, config)?);
    results.push(select_quantile_patience(series, config)?);

    // Lead-lag aligns the raw score with the label-free auxiliary loss. The EMA
    // itself delays the score, so aligning the smoothed series would mostly
    // measure the smoother.
    let lag = match series.aux_losses() {
        Some(aux) => best_lag(&series.scores(), &aux, config.max_lag)?.lag,
        None => 0,
    };
    let shifted = (ema_index as i64 + lag).clamp(window.start as i64, window.end as i64 - 1) as usize;
    let mut lead = SelectionResult::new(Strategy::LeadLag, series, &window, shifted, &[shifted], ema_smoothed);
    lead.lag = Some(lag);
    results.push(lead);

    let last = window.end - 1;
    results.push(SelectionResult::new(Strategy::Last, series, &window, last, &[last], Vec::new()));

    let aux: Vec<Option<f64>> = series.records().iter().map(|r| r.aux_loss).collect();
    let loss_min = window
        .clone()
        .filter_map(|i| aux[i].map(|a| (i, a)))
        .fold(None::<(usize, f64)>, |best, (i, a)| match best {
            Some((_, b)) if b <= a => best,
            _ => Some((i, a)),
        });
    if let Some((i, _)) = loss_min {
        results.push(SelectionResult::new(Strategy::LossMin, series, &window, i, &[i], Vec::new()));
    }

    let metrics = series.metrics();
    let (mut oracle_step, mut global_oracle_step) = (None, None);
    if let Some(m) = &metrics {
        let o = oracle_index(m, window.clone(), config.orientation);
        let g = oracle_index(m, 0..series.len(), config.orientation);
        oracle_step = Some(series.records()[o].step);
        global_oracle_step = Some(series.records()[g].step);
        results.push(SelectionResult::new(Strategy::Oracle, series, &window, o, &[o], Vec::new()));
        let best = config.orientation.oriented(m[o]);
        for r in &mut results {
            r.gap = Some(best - config.orientation.oriented(m[r.chosen_index]));
            r.oracle_step = oracle_step;
        }
    }

    Ok(StrategyReport {
        window_start: window.start,
        window_end: window.end,
        oracle_step,
        global_oracle_step,
        results,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub ema_span: usize,
    pub tail_size: usize,
    pub chosen_step: u64,
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub cells: Vec<SweepCell>,
    /// Index of the (3, 80) cell when the grid contains it.
    pub universal: Option<usize>,
    /// Index of the cell with the smallest gap (first on ties).
    pub best: Option<usize>,
}

pub const UNIVERSAL_CELL: (usize, usize) = (3, 80);

/// `{1,3,5,9} × {60,80,100}`.
pub fn default_grid() -> Vec<(usize, usize)> {
    let mut grid = Vec::with_capacity(12);
    for k in [1, 3, 5, 9] {
        for s in [60, 80, 100] {
            grid.push((k, s));
        }
    }
    grid
}

/// EMA-argmin selection for every `(span, tail size)` cell of the grid.
pub fn sweep_configs(
    series: &TrajectorySeries,
    grid: &[(usize, usize)],
    base: &SelectionConfig,
) -> Result<SweepTable> {
    let metrics = series.metrics();
    let cells = grid
        .par_iter()
        .map(|&(k, s)| {
            let cfg = base.with_span(k).with_tail_size(s);
            let sel = select_argmin(series, &cfg)?;
            let gap = metrics.as_ref().map(|m| {
                let window = tail_window(series.len(), &cfg);
                let o = oracle_index(m, window, cfg.orientation);
                cfg.orientation.oriented(m[o]) - cfg.orientation.oriented(m[sel.chosen_index])
            });
            Ok(SweepCell { ema_span: k, tail_size: s, chosen_step: sel.chosen_step, gap })
        })
        .collect::<Result<Vec<_>>>()?;
    let universal = cells
        .iter()
        .position(|c| (c.ema_span, c.tail_size) == UNIVERSAL_CELL);
    let mut best: Option<usize> = None;
    for (i, c) in cells.iter().enumerate() {
        if let Some(g) = c.gap {
            if best.is_none_or(|b| g < cells[b].gap.unwrap_or(f64::INFINITY)) {
                best = Some(i);
            }
        }
    }
    Ok(SweepTable { cells, universal, best })
}
