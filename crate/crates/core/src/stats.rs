//! Correlation and regression statistics: Pearson/Spearman, percentile
//! bootstrap, leave-one-out sensitivity, detrended and partial correlation,
//! and least squares with a step covariate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::trajectory::Orientation;

pub const DEFAULT_RESAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    x: Vec<f64>,
    y: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl PairedSample {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Shape(format!("paired sample lengths {} and {}", x.len(), y.len())));
        }
        if x.len() < 2 {
            return Err(Error::Invalid(format!("paired sample needs n >= 2, got {}", x.len())));
        }
        if let Some(i) = x.iter().chain(&y).position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite value at position {}", i % x.len())));
        }
        Ok(Self { x, y, labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.x.len() {
            return Err(Error::Shape(format!("{} labels for {} points", labels.len(), self.x.len())));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Product-moment correlation of two equal-length slices.
pub fn pearson_slices(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Invalid(format!("pearson needs equal lengths >= 2, got {} and {}", x.len(), y.len())));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if degenerate_spread(sxx, x) || degenerate_spread(syy, y) {
        return Err(Error::Degenerate("zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Treats a sum of squares as zero when it is at rounding level for the data's magnitude.
fn degenerate_spread(ss: f64, v: &[f64]) -> bool {
    let scale = v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    ss == 0.0 || ss.sqrt() <= 1e-14 * scale * (v.len() as f64).sqrt()
}

pub fn pearson(sample: &PairedSample) -> Result<f64> {
    pearson_slices(&sample.x, &sample.y)
}

/// 1-based average ranks; ties share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman_slices(x: &[f64], y: &[f64]) -> Result<f64> {
    pearson_slices(&average_ranks(x), &average_ranks(y))
}

pub fn spearman(sample: &PairedSample) -> Result<f64> {
    spearman_slices(&sample.x, &sample.y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    Pearson,
    Spearman,
}

impl Statistic {
    pub fn eval(self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            Statistic::Pearson => pearson_slices(x, y),
            Statistic::Spearman => spearman_slices(x, y),
        }
    }
}

/// Two-sided p-value of a Pearson r under the t distribution with n − 2 dof.
pub fn pearson_p_value(r: f64, n: usize) -> Option<f64> {
    if n < 3 {
        return None;
    }
    if r.abs() >= 1.0 {
        return Some(0.0);
    }
    let dof = (n - 2) as f64;
    let t = r * (dof / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, dof).ok()?;
    Some((2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub low: f64,
    pub high: f64,
    /// Standard deviation of the bootstrap distribution.
    pub std_error: f64,
    pub n_resamples: usize,
    pub n_degenerate: usize,
    pub seed: u64,
}

/// Linear-interpolated quantile of sorted data.
fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap 95% interval over resampled (x, y) pairs.
///
/// Resample `i` draws from a ChaCha stream keyed by `(seed, i)`, so the result
/// does not depend on how resamples are scheduled across threads.
pub fn bootstrap_ci(
    sample: &PairedSample,
    statistic: Statistic,
    n_resamples: usize,
    seed: u64,
) -> Result<BootstrapCi> {
    let n = sample.len();
    if n < 3 {
        return Err(Error::Invalid(format!("bootstrap needs n >= 3, got {n}")));
    }
    if n_resamples == 0 {
        return Err(Error::Invalid("bootstrap needs at least one resample".into()));
    }
    let draws: Vec<Option<f64>> = (0..n_resamples)
        .into_par_iter()
        .map_init(
            || (Vec::with_capacity(n), Vec::with_capacity(n)),
            |(bx, by), i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                bx.clear();
                by.clear();
                for _ in 0..n {
                    let k = rng.random_range(0..n);
                    bx.push(sample.x[k]);
                    by.push(sample.y[k]);
                }
                statistic.eval(bx, by).ok()
            },
        )
        .collect();
    let mut values: Vec<f64> = draws.iter().flatten().copied().collect();
    let n_degenerate = n_resamples - values.len();
    if 2 * n_degenerate > n_resamples || values.is_empty() {
        return Err(Error::UnstableCi { degenerate: n_degenerate, total: n_resamples });
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let m = mean(&values);
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64
    } else {
        0.0
    };
    Ok(BootstrapCi {
        low: sorted_quantile(&values, 0.025),
        high: sorted_quantile(&values, 0.975),
        std_error: var.sqrt(),
        n_resamples,
        n_degenerate,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooReport {
    pub full: f64,
    /// `statistic(without i) − full`; `None` where dropping `i` made the sample degenerate.
    pub deltas: Vec<Option<f64>>,
    pub max_abs_delta: f64,
    pub argmax: Option<usize>,
}

pub fn loo_sensitivity(sample: &PairedSample, statistic: Statistic) -> Result<LooReport> {
    let n = sample.len();
    if n < 4 {
        return Err(Error::Invalid(format!("leave-one-out needs n >= 4, got {n}")));
    }
    let full = statistic.eval(&sample.x, &sample.y)?;
    let mut deltas = Vec::with_capacity(n);
    let (mut max_abs, mut argmax) = (0.0, None);
    for i in 0..n {
        let x: Vec<f64> = sample.x.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, v)| *v).collect();
        let y: Vec<f64> = sample.y.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, v)| *v).collect();
        let d = statistic.eval(&x, &y).ok().map(|r| r - full);
        if let Some(d) = d {
            if argmax.is_none() || d.abs() > max_abs {
                max_abs = d.abs();
                argmax = Some(i);
            }
        }
        deltas.push(d);
    }
    Ok(LooReport { full, deltas, max_abs_delta: max_abs, argmax })
}

/// Least-squares fit by modified Gram–Schmidt QR.
struct LeastSquares {
    coefficients: Vec<f64>,
    residuals: Vec<f64>,
    /// Diagonal of (XᵀX)⁻¹.
    inv_gram_diag: Vec<f64>,
}

fn least_squares(columns: &[Vec<f64>], target: &[f64]) -> Result<LeastSquares> {
    let n = target.len();
    let p = columns.len();
    if n < p {
        return Err(Error::Collinear(format!("{n} observations for {p} coefficients")));
    }
    let mut q: Vec<Vec<f64>> = columns.to_vec();
    let mut r = vec![vec![0.0; p]; p];
    for j in 0..p {
        let original = q[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        // Two orthogonalization passes keep Q orthonormal for badly scaled columns.
        for _ in 0..2 {
            for k in 0..j {
                let dot: f64 = q[k].iter().zip(&q[j]).map(|(a, b)| a * b).sum();
                r[k][j] += dot;
                let qk = q[k].clone();
                for (v, a) in q[j].iter_mut().zip(&qk) {
                    *v -= dot * a;
                }
            }
        }
        let norm = q[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-10 * original.max(f64::MIN_POSITIVE) {
            return Err(Error::Collinear(format!("column {j} is a linear combination of earlier columns")));
        }
        r[j][j] = norm;
        q[j].iter_mut().for_each(|v| *v /= norm);
    }
    let qty: Vec<f64> = q.iter().map(|col| col.iter().zip(target).map(|(a, b)| a * b).sum()).collect();
    let mut beta = vec![0.0; p];
    for j in (0..p).rev() {
        let s: f64 = (j + 1..p).map(|k| r[j][k] * beta[k]).sum();
        beta[j] = (qty[j] - s) / r[j][j];
    }
    // R⁻¹ by back substitution; (XᵀX)⁻¹ = R⁻¹R⁻ᵀ.
    let mut rinv = vec![vec![0.0; p]; p];
    for i in 0..p {
        rinv[i][i] = 1.0 / r[i][i];
        for j in (0..i).rev() {
            let s: f64 = (j + 1..=i).map(|k| r[j][k] * rinv[k][i]).sum();
            rinv[j][i] = -s / r[j][j];
        }
    }
    let inv_gram_diag = (0..p).map(|j| (j..p).map(|k| rinv[j][k].powi(2)).sum()).collect();
    let residuals = (0..n)
        .map(|i| target[i] - (0..p).map(|j| columns[j][i] * beta[j]).sum::<f64>())
        .collect();
    Ok(LeastSquares { coefficients: beta, residuals, inv_gram_diag })
}

fn step_residuals(values: &[f64], steps: &[f64]) -> Result<Vec<f64>> {
    let ones = vec![1.0; steps.len()];
    match least_squares(&[ones, steps.to_vec()], values) {
        Ok(fit) => Ok(fit.residuals),
        Err(Error::Collinear(_)) => Err(Error::Degenerate("steps are constant".into())),
        Err(e) => Err(e),
    }
}

fn check_lengths(parts: &[(&str, usize)], min: usize) -> Result<usize> {
    let n = parts[0].1;
    if parts.iter().any(|&(_, l)| l != n) {
        let desc: Vec<String> = parts.iter().map(|(name, l)| format!("{name}={l}")).collect();
        return Err(Error::Shape(format!("length mismatch: {}", desc.join(", "))));
    }
    if n < min {
        return Err(Error::Invalid(format!("need at least {min} points, got {n}")));
    }
    Ok(n)
}

/// Pearson correlation of the residuals after removing a linear-in-step
/// trend from each series.
pub fn detrended_correlation(x: &[f64], y: &[f64], steps: &[f64]) -> Result<f64> {
    check_lengths(&[("x", x.len()), ("y", y.len()), ("steps", steps.len())], 3)?;
    let rx = step_residuals(x, steps)?;
    let ry = step_residuals(y, steps)?;
    for (name, raw, res) in [("x", x, &rx), ("y", y, &ry)] {
        let m = mean(raw);
        let total: f64 = raw.iter().map(|v| (v - m).powi(2)).sum();
        let left: f64 = res.iter().map(|v| v * v).sum();
        if left <= 1e-20 * total.max(f64::MIN_POSITIVE) || degenerate_spread(left, raw) {
            return Err(Error::Degenerate(format!("{name} is fully explained by the step trend")));
        }
    }
    pearson_slices(&rx, &ry)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub n: usize,
    pub intercept: f64,
    pub score_coefficient: f64,
    pub step_coefficient: f64,
    pub r_squared: f64,
    /// R² of `target ~ 1 + score`, for comparison with the step-augmented fit.
    pub r_squared_score_only: f64,
    /// `None` when the fit is exact and the standard error vanishes.
    pub score_t_statistic: Option<f64>,
    pub score_p_value: Option<f64>,
    /// Pearson of the step residuals of target and score; `None` when degenerate.
    pub partial_correlation_controlling_step: Option<f64>,
}

fn r_squared(residuals: &[f64], target: &[f64]) -> Result<f64> {
    let m = mean(target);
    let tss: f64 = target.iter().map(|v| (v - m).powi(2)).sum();
    if degenerate_spread(tss, target) {
        return Err(Error::Degenerate("target has zero variance".into()));
    }
    let rss: f64 = residuals.iter().map(|v| v * v).sum();
    Ok((1.0 - rss / tss).clamp(0.0, 1.0))
}

/// `target ~ 1 + score + step` by least squares.
pub fn ols_with_covariate(target: &[f64], score: &[f64], steps: &[f64]) -> Result<RegressionReport> {
    let n = check_lengths(
        &[("target", target.len()), ("score", score.len()), ("steps", steps.len())],
        4,
    )?;
    let ones = vec![1.0; n];
    let fit = least_squares(&[ones.clone(), score.to_vec(), steps.to_vec()], target)?;
    let r2 = r_squared(&fit.residuals, target)?;
    let score_only = least_squares(&[ones, score.to_vec()], target)?;
    let r2_score = r_squared(&score_only.residuals, target)?;

    let dof = (n - 3) as f64;
    let rss: f64 = fit.residuals.iter().map(|v| v * v).sum();
    let se = (rss / dof * fit.inv_gram_diag[1]).sqrt();
    let t = fit.coefficients[1] / se;
    let (t, p) = if t.is_finite() && se > 0.0 {
        let p = StudentsT::new(0.0, 1.0, dof)
            .ok()
            .map(|d| (2.0 * (1.0 - d.cdf(t.abs()))).clamp(0.0, 1.0));
        (Some(t), p)
    } else {
        (None, None)
    };
    Ok(RegressionReport {
        n,
        intercept: fit.coefficients[0],
        score_coefficient: fit.coefficients[1],
        step_coefficient: fit.coefficients[2],
        r_squared: r2,
        r_squared_score_only: r2_score,
        score_t_statistic: t,
        score_p_value: p,
        partial_correlation_controlling_step: detrended_correlation(target, score, steps).ok(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub name: String,
    pub score: f64,
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    /// Entry names ordered by ascending score.
    pub ranking: Vec<String>,
    pub spearman_rho: f64,
    pub score_argmin: String,
    pub metric_best: String,
    /// Whether the lowest-score entry is also the best by metric.
    pub top_match: bool,
}

/// Ranks entries by ascending probe score and compares with the metric ranking.
pub fn rank_models(entries: &[ModelEntry], orientation: Orientation) -> Result<RankingReport> {
    if entries.len() < 2 {
        return Err(Error::Invalid("ranking needs at least two entries".into()));
    }
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by(|&a, &b| entries[a].score.total_cmp(&entries[b].score).then(a.cmp(&b)));
    let scores: Vec<f64> = entries.iter().map(|e| e.score).collect();
    let metrics: Vec<f64> = entries.iter().map(|e| e.metric).collect();
    let rho = spearman_slices(&scores, &metrics)?;
    let oriented = |m: f64| match orientation {
        Orientation::HigherIsBetter => m,
        Orientation::LowerIsBetter => -m,
    };
    let mut best = 0;
    for i in 1..entries.len() {
        if oriented(metrics[i]) > oriented(metrics[best]) {
            best = i;
        }
    }
    let argmin = order[0];
    Ok(RankingReport {
        ranking: order.iter().map(|&i| entries[i].name.clone()).collect(),
        spearman_rho: rho,
        score_argmin: entries[argmin].name.clone(),
        metric_best: entries[best].name.clone(),
        top_match: argmin == best,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationOptions {
    pub n_resamples: usize,
    pub seed: u64,
}

impl Default for CorrelationOptions {
    fn default() -> Self {
        Self { n_resamples: DEFAULT_RESAMPLES, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub n: usize,
    pub pearson_r: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub std_error: f64,
    pub p_value_pearson: Option<f64>,
    pub spearman_rho: f64,
    pub spearman_ci_low: f64,
    pub spearman_ci_high: f64,
    pub spearman_std_error: f64,
    pub n_resamples: usize,
    pub n_degenerate: usize,
    pub seed: u64,
    pub loo_max_shift: Option<f64>,
    pub loo_argmax: Option<usize>,
}

/// Point estimates, bootstrap intervals and LOO sensitivity of the Pearson r.
pub fn correlation_report(sample: &PairedSample, options: CorrelationOptions) -> Result<CorrelationReport> {
    let r = pearson(sample)?;
    let rho = spearman(sample)?;
    let ci = bootstrap_ci(sample, Statistic::Pearson, options.n_resamples, options.seed)?;
    let sci = bootstrap_ci(sample, Statistic::Spearman, options.n_resamples, options.seed)?;
    let loo = if sample.len() >= 4 { Some(loo_sensitivity(sample, Statistic::Pearson)?) } else { None };
    Ok(CorrelationReport {
        n: sample.len(),
        pearson_r: r,
        ci_low: ci.low,
        ci_high: ci.high,
        std_error: ci.std_error,
        p_value_pearson: pearson_p_value(r, sample.len()),
        spearman_rho: rho,
        spearman_ci_low: sci.low,
        spearman_ci_high: sci.high,
        spearman_std_error: sci.std_error,
        n_resamples: options.n_resamples,
        n_degenerate: ci.n_degenerate,
        seed: options.seed,
        loo_max_shift: loo.as_ref().and_then(|l| l.argmax.map(|_| l.max_abs_delta)),
        loo_argmax: loo.and_then(|l| l.argmax),
    })
}
