//! Head-only gradient probe.
//!
//! Everything here is a pure function of one checkpoint's exported tensors:
//! detached features `Z` (d × B), head weights `W` (C × d) and the targets.
//! Backbone parameters never appear; the only gradient produced is the one
//! with respect to `W`, which costs O(C·d·B).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Classification,
    Regression,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// One class index per batch column.
    Labels(Vec<usize>),
    /// C × B real targets.
    Regression(Matrix),
}

/// One checkpoint's probe input.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeBatch {
    features: Matrix,
    head: Matrix,
    targets: Targets,
}

impl ProbeBatch {
    pub fn new(features: Matrix, head: Matrix, targets: Targets) -> Result<Self> {
        let (d, b) = (features.rows(), features.cols());
        let c = head.rows();
        if d == 0 || b == 0 {
            return Err(Error::Shape(format!("features must be non-empty, got {d}x{b}")));
        }
        if head.cols() != d {
            return Err(Error::Shape(format!(
                "head is {}x{} but features have d = {d}",
                c,
                head.cols()
            )));
        }
        if let Some(col) = features.first_non_finite_column() {
            return Err(Error::NonFinite { what: "features", column: col });
        }
        if let Some(col) = head.first_non_finite_column() {
            return Err(Error::NonFinite { what: "head weights", column: col });
        }
        match &targets {
            Targets::Labels(labels) => {
                if c < 2 {
                    return Err(Error::Shape(format!("classification needs C >= 2, got C = {c}")));
                }
                if labels.len() != b {
                    return Err(Error::Shape(format!(
                        "{} labels for batch size B = {b}",
                        labels.len()
                    )));
                }
                if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= c) {
                    return Err(Error::LabelOutOfRange { index, label, classes: c });
                }
            }
            Targets::Regression(y) => {
                if c < 1 {
                    return Err(Error::Shape("regression needs C >= 1".into()));
                }
                if y.rows() != c || y.cols() != b {
                    return Err(Error::Shape(format!(
                        "regression targets are {}x{}, expected C x B = {c}x{b}",
                        y.rows(),
                        y.cols()
                    )));
                }
                if let Some(col) = y.first_non_finite_column() {
                    return Err(Error::NonFinite { what: "regression targets", column: col });
                }
            }
        }
        Ok(Self { features, head, targets })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn head(&self) -> &Matrix {
        &self.head
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn mode(&self) -> Mode {
        match self.targets {
            Targets::Labels(_) => Mode::Classification,
            Targets::Regression(_) => Mode::Regression,
        }
    }

    pub fn classes(&self) -> usize {
        self.head.rows()
    }

    pub fn dim(&self) -> usize {
        self.features.rows()
    }

    pub fn batch_size(&self) -> usize {
        self.features.cols()
    }

    /// Head outputs `W Z` (C × B).
    pub fn logits(&self) -> Matrix {
        self.head.matmul(&self.features).expect("shapes checked at construction")
    }

    /// Returns a copy with a different head, keeping features and targets.
    pub fn with_head(&self, head: Matrix) -> Result<Self> {
        Self::new(self.features.clone(), head, self.targets.clone())
    }
}

/// Column-stochastic C × B matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix(Matrix);

impl ProbMatrix {
    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

/// Column-wise softmax with per-column max subtraction.
pub fn softmax_columns(logits: &Matrix) -> Result<ProbMatrix> {
    if let Some(column) = logits.first_non_finite_column() {
        return Err(Error::NonFinite { what: "logits", column });
    }
    let (c, b) = (logits.rows(), logits.cols());
    let mut p = logits.clone();
    for i in 0..b {
        let max = (0..c).map(|r| logits.get(r, i)).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for r in 0..c {
            let e = (logits.get(r, i) - max).exp();
            p.set(r, i, e);
            sum += e;
        }
        for r in 0..c {
            p.set(r, i, p.get(r, i) / sum);
        }
    }
    Ok(ProbMatrix(p))
}

fn log_sum_exp_column(logits: &Matrix, col: usize) -> f64 {
    let max = (0..logits.rows()).map(|r| logits.get(r, col)).fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = (0..logits.rows()).map(|r| (logits.get(r, col) - max).exp()).sum();
    max + s.ln()
}

/// Mean negative log-likelihood `-(1/B) Σ log P[y_i, i]`, evaluated as
/// `logsumexp(column) - logit[y_i]` so saturated heads stay finite.
pub fn cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<f64> {
    if labels.len() != logits.cols() {
        return Err(Error::Shape(format!(
            "{} labels for {} logit columns",
            labels.len(),
            logits.cols()
        )));
    }
    if let Some(column) = logits.first_non_finite_column() {
        return Err(Error::NonFinite { what: "logits", column });
    }
    let c = logits.rows();
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        if y >= c {
            return Err(Error::LabelOutOfRange { index: i, label: y, classes: c });
        }
        total += log_sum_exp_column(logits, i) - logits.get(y, i);
    }
    Ok(total / labels.len() as f64)
}

/// Mean-reduced loss of the batch: cross-entropy in classification mode,
/// `(1/B) Σ_i ½‖(WZ)_i − y_i‖²` in regression mode.
pub fn batch_loss(batch: &ProbeBatch) -> Result<f64> {
    let logits = batch.logits();
    match batch.targets() {
        Targets::Labels(labels) => cross_entropy(&logits, labels),
        Targets::Regression(y) => {
            let sq: f64 = logits
                .as_slice()
                .iter()
                .zip(y.as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            Ok(0.5 * sq / batch.batch_size() as f64)
        }
    }
}

/// Residual `P − Y` (classification) or `WZ − Y` (regression), C × B.
fn residual(batch: &ProbeBatch, logits: Matrix) -> Result<Matrix> {
    match batch.targets() {
        Targets::Labels(labels) => {
            let mut r = softmax_columns(&logits)?.into_matrix();
            for (i, &y) in labels.iter().enumerate() {
                r.set(y, i, r.get(y, i) - 1.0);
            }
            Ok(r)
        }
        Targets::Regression(y) => {
            let data = logits.as_slice().iter().zip(y.as_slice()).map(|(a, b)| a - b).collect();
            Matrix::from_vec(logits.rows(), logits.cols(), data)
        }
    }
}

/// Gradient of the mean-reduced loss with respect to the head only:
/// `(1/B) R Zᵀ` with `R` the residual above.
pub fn head_gradient(batch: &ProbeBatch) -> Result<Matrix> {
    let r = residual(batch, batch.logits())?;
    let mut g = r.matmul_transpose(batch.features())?;
    g.scale(1.0 / batch.batch_size() as f64);
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientNorms {
    pub l1: f64,
    pub fro: f64,
    pub linf: f64,
}

pub fn gradient_norms(g: &Matrix) -> Result<GradientNorms> {
    if let Some(column) = g.first_non_finite_column() {
        return Err(Error::NonFinite { what: "gradient", column });
    }
    let s = g.as_slice();
    Ok(GradientNorms {
        l1: s.iter().map(|v| v.abs()).sum(),
        fro: g.frobenius(),
        linf: s.iter().fold(0.0, |m, v| m.max(v.abs())),
    })
}

/// Empirical Fisher trace at the observed labels:
/// `(1/B) Σ_i ‖(p_i − e_{y_i}) z_iᵀ‖_F²`.
///
/// The per-example gradient is rank one, so its squared norm factors into
/// `‖p_i − e_{y_i}‖² · ‖z_i‖²`.
pub fn fisher_trace(batch: &ProbeBatch) -> Result<f64> {
    if batch.mode() != Mode::Classification {
        return Err(Error::UnsupportedMode);
    }
    let r = residual(batch, batch.logits())?;
    Ok(fisher_from_residual(&r, batch.features()))
}

fn fisher_from_residual(r: &Matrix, z: &Matrix) -> f64 {
    let b = z.cols();
    let mut total = 0.0;
    for i in 0..b {
        let rn: f64 = (0..r.rows()).map(|c| r.get(c, i).powi(2)).sum();
        let zn: f64 = (0..z.rows()).map(|k| z.get(k, i).powi(2)).sum();
        total += rn * zn;
    }
    total / b as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedScores {
    pub score_z: f64,
    pub score_w: f64,
}

/// `score_z = ‖g‖/(‖Z‖+eps_z)` and `score_w = ‖g‖/(‖W‖+eps_w)`.
pub fn normalized_scores(
    grad_fro: f64,
    features: &Matrix,
    head: &Matrix,
    eps_z: f64,
    eps_w: f64,
) -> Result<NormalizedScores> {
    if !(eps_z >= 0.0 && eps_w >= 0.0) {
        return Err(Error::Invalid(format!("eps must be >= 0, got eps_z={eps_z}, eps_w={eps_w}")));
    }
    let z_norm = features.frobenius();
    let w_norm = head.frobenius();
    if w_norm < 1e-12 && eps_w == 0.0 {
        return Err(Error::DivisionGuard(format!("‖W‖_F = {w_norm:e} with eps_w = 0")));
    }
    if z_norm < 1e-12 && eps_z == 0.0 {
        return Err(Error::DivisionGuard(format!("‖Z‖_F = {z_norm:e} with eps_z = 0")));
    }
    if grad_fro == 0.0 {
        return Ok(NormalizedScores { score_z: 0.0, score_w: 0.0 });
    }
    Ok(NormalizedScores { score_z: grad_fro / (z_norm + eps_z), score_w: grad_fro / (w_norm + eps_w) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputReadouts {
    pub confidence: f64,
    pub entropy: f64,
    pub margin: f64,
}

/// Batch means of max probability, predictive entropy (nats) and top-1 minus top-2.
pub fn output_readouts(p: &ProbMatrix) -> OutputReadouts {
    let m = p.as_matrix();
    let (c, b) = (m.rows(), m.cols());
    let (mut conf, mut ent, mut marg) = (0.0, 0.0, 0.0);
    for i in 0..b {
        let (mut top1, mut top2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for r in 0..c {
            let v = m.get(r, i);
            if v > 0.0 {
                ent -= v * v.ln();
            }
            if v > top1 {
                top2 = top1;
                top1 = v;
            } else if v > top2 {
                top2 = v;
            }
        }
        conf += top1;
        marg += if c > 1 { top1 - top2 } else { top1 };
    }
    let n = b as f64;
    OutputReadouts { confidence: conf / n, entropy: ent / n, margin: marg / n }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub eps_z: f64,
    pub eps_w: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self { eps_z: DEFAULT_EPS, eps_w: DEFAULT_EPS }
    }
}

/// All readouts at one checkpoint. Fisher trace and the softmax readouts are
/// only defined in classification mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeScore {
    pub mode: Mode,
    pub grad_fro: f64,
    pub grad_l1: f64,
    pub grad_linf: f64,
    pub fisher_trace: Option<f64>,
    pub score_z: f64,
    pub score_w: f64,
    pub loss: f64,
    pub confidence: Option<f64>,
    pub entropy: Option<f64>,
    pub margin: Option<f64>,
    pub eps_z: f64,
    pub eps_w: f64,
}

pub fn probe(batch: &ProbeBatch, options: ProbeOptions) -> Result<ProbeScore> {
    let logits = batch.logits();
    let b = batch.batch_size() as f64;
    let (loss, readouts, fisher, r) = match batch.targets() {
        Targets::Labels(labels) => {
            let loss = cross_entropy(&logits, labels)?;
            let p = softmax_columns(&logits)?;
            let readouts = output_readouts(&p);
            let mut r = p.into_matrix();
            for (i, &y) in labels.iter().enumerate() {
                r.set(y, i, r.get(y, i) - 1.0);
            }
            let fisher = fisher_from_residual(&r, batch.features());
            (loss, Some(readouts), Some(fisher), r)
        }
        Targets::Regression(_) => {
            let loss = batch_loss(batch)?;
            (loss, None, None, residual(batch, logits)?)
        }
    };
    let mut g = r.matmul_transpose(batch.features())?;
    g.scale(1.0 / b);
    let norms = gradient_norms(&g)?;
    let scores =
        normalized_scores(norms.fro, batch.features(), batch.head(), options.eps_z, options.eps_w)?;
    Ok(ProbeScore {
        mode: batch.mode(),
        grad_fro: norms.fro,
        grad_l1: norms.l1,
        grad_linf: norms.linf,
        fisher_trace: fisher,
        score_z: scores.score_z,
        score_w: scores.score_w,
        loss,
        confidence: readouts.map(|r| r.confidence),
        entropy: readouts.map(|r| r.entropy),
        margin: readouts.map(|r| r.margin),
        eps_z: options.eps_z,
        eps_w: options.eps_w,
    })
}

/// Which readout to use as the selection score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Fro,
    L1,
    Linf,
    Fisher,
    ScoreZ,
    ScoreW,
    Confidence,
    Entropy,
    Margin,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 9] = [
        ScoreKind::Fro,
        ScoreKind::L1,
        ScoreKind::Linf,
        ScoreKind::Fisher,
        ScoreKind::ScoreZ,
        ScoreKind::ScoreW,
        ScoreKind::Confidence,
        ScoreKind::Entropy,
        ScoreKind::Margin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::Fro => "fro",
            ScoreKind::L1 => "l1",
            ScoreKind::Linf => "linf",
            ScoreKind::Fisher => "fisher",
            ScoreKind::ScoreZ => "score_z",
            ScoreKind::ScoreW => "score_w",
            ScoreKind::Confidence => "confidence",
            ScoreKind::Entropy => "entropy",
            ScoreKind::Margin => "margin",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl ProbeScore {
    pub fn value(&self, kind: ScoreKind) -> Option<f64> {
        match kind {
            ScoreKind::Fro => Some(self.grad_fro),
            ScoreKind::L1 => Some(self.grad_l1),
            ScoreKind::Linf => Some(self.grad_linf),
            ScoreKind::Fisher => self.fisher_trace,
            ScoreKind::ScoreZ => Some(self.score_z),
            ScoreKind::ScoreW => Some(self.score_w),
            ScoreKind::Confidence => self.confidence,
            ScoreKind::Entropy => self.entropy,
            ScoreKind::Margin => self.margin,
        }
    }
}
