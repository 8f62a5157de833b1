//! Desk-scale trajectories with known ground truth.
//!
//! Two generators: a latent-state simulator whose readouts are noisy
//! projections of one hidden training state, and a full-batch gradient
//! descent trainer for a linear head over Gaussian-cluster features that
//! writes real probe traces together with exact held-out metrics.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::probe::{batch_loss, cross_entropy, head_gradient, Mode, ProbeBatch, Targets};
use crate::trace_io::series::{SeriesRow, SeriesTable};
use crate::trace_io::{write_manifest, write_trace, CheckpointEntry, ProbeTraceFile, RunManifest, MANIFEST_FILE};
use crate::trajectory::Orientation;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `sign · scale · S(t − lag) + offset + noise · ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub sign: f64,
    pub scale: f64,
    pub offset: f64,
    pub noise: f64,
    pub lag: usize,
}

impl Projection {
    pub const fn new(sign: f64, scale: f64, offset: f64, noise: f64) -> Self {
        Self { sign, scale, offset, noise, lag: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentStateModel {
    /// Increase of the state per step until the plateau.
    pub drift: f64,
    pub noise: f64,
    pub plateau_step: usize,
    pub max_lag: usize,
    pub gradient: Projection,
    pub confidence: Projection,
    pub entropy: Projection,
    pub margin: Projection,
    pub metric: Projection,
}

impl Default for LatentStateModel {
    fn default() -> Self {
        Self {
            drift: 0.01,
            noise: 0.05,
            plateau_step: 350,
            max_lag: 10,
            gradient: Projection::new(-1.0, 1.0, 5.0, 0.2),
            confidence: Projection::new(1.0, 0.15, 0.2, 0.03),
            entropy: Projection::new(-1.0, 0.3, 2.0, 0.05),
            margin: Projection::new(1.0, 0.1, 0.1, 0.02),
            metric: Projection::new(1.0, 0.15, 0.1, 0.02),
        }
    }
}

impl LatentStateModel {
    pub fn validate(&self) -> Result<()> {
        let all = [self.gradient, self.confidence, self.entropy, self.margin, self.metric];
        if self.noise < 0.0 || all.iter().any(|p| p.noise < 0.0) {
            return Err(Error::Invalid("noise scales must be >= 0".into()));
        }
        if let Some(p) = all.iter().find(|p| p.lag > self.max_lag) {
            return Err(Error::Invalid(format!("lag {} exceeds bound {}", p.lag, self.max_lag)));
        }
        Ok(())
    }
}

pub const LATENT_COLUMNS: [&str; 4] = ["latent", "confidence", "entropy", "margin"];

/// Simulates `n_steps` records: `score` is the gradient-like readout, `metric`
/// the quality readout, and extra columns hold the latent state and the
/// confidence/entropy/margin readouts.
pub fn simulate_readouts(model: &LatentStateModel, n_steps: usize, seed: u64) -> Result<SeriesTable> {
    model.validate()?;
    if n_steps < 2 {
        return Err(Error::Invalid(format!("need at least 2 steps, got {n_steps}")));
    }
    let mut rng = rng_for(seed, 0);
    let state: Vec<f64> = (0..n_steps)
        .map(|t| model.drift * t.min(model.plateau_step) as f64 + model.noise * normal(&mut rng))
        .collect();
    let mut project = |p: &Projection, t: usize| {
        let s = state[t.saturating_sub(p.lag)];
        let e = normal(&mut rng);
        p.sign * p.scale * s + p.offset + p.noise * e
    };
    let rows = (0..n_steps)
        .map(|t| {
            let score = project(&model.gradient, t);
            let metric = project(&model.metric, t);
            let extras = vec![
                Some(state[t]),
                Some(project(&model.confidence, t)),
                Some(project(&model.entropy, t)),
                Some(project(&model.margin, t)),
            ];
            SeriesRow { step: t as u64, score, metric: Some(metric), aux_loss: None, extras }
        })
        .collect();
    Ok(SeriesTable { extra_columns: LATENT_COLUMNS.iter().map(|s| s.to_string()).collect(), rows })
}

/// Gaussian-cluster classification task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub classes: usize,
    pub dim: usize,
    /// Standard deviation of the cluster-center coordinates.
    pub separation: f64,
    /// Within-class standard deviation.
    pub spread: f64,
    pub n_train: usize,
    pub n_heldout: usize,
    pub probe_batch: usize,
    /// Probability of replacing a label with a uniformly drawn class.
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticTask {
    fn default() -> Self {
        Self {
            classes: 5,
            dim: 20,
            separation: 0.35,
            spread: 1.0,
            n_train: 1000,
            n_heldout: 2000,
            probe_batch: 64,
            label_noise: 0.0,
            seed: 0,
        }
    }
}

/// Features are d × n matrices, one example per column.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    pub centers: Matrix,
    pub train_x: Matrix,
    pub train_y: Vec<usize>,
    pub heldout_x: Matrix,
    pub heldout_y: Vec<usize>,
    pub probe_x: Matrix,
    pub probe_y: Vec<usize>,
}

impl SyntheticTask {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 || self.dim < 1 {
            return Err(Error::Invalid("need C >= 2 and d >= 1".into()));
        }
        if self.n_train < self.classes || self.n_heldout < self.classes {
            return Err(Error::Invalid("train and held-out sizes must be >= C".into()));
        }
        if self.probe_batch < 1 || self.probe_batch > self.n_train {
            return Err(Error::Invalid("probe batch must lie in [1, n_train]".into()));
        }
        if self.spread.is_nan() || self.spread <= 0.0 || self.separation < 0.0 {
            return Err(Error::Invalid("spread must be > 0 and separation >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return Err(Error::Invalid("label noise must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Draws the dataset; deterministic in `seed`.
    pub fn sample(&self) -> Result<TaskData> {
        self.validate()?;
        let mut rng = rng_for(self.seed, 1);
        let centers = Matrix::from_fn(self.classes, self.dim, |_, _| self.separation * normal(&mut rng));
        let draw = |n: usize, rng: &mut ChaCha8Rng| {
            // Balanced classes, shuffled.
            let mut y: Vec<usize> = (0..n).map(|i| i % self.classes).collect();
            y.shuffle(rng);
            let mut x = Matrix::zeros(self.dim, n);
            for (i, &c) in y.iter().enumerate() {
                for k in 0..self.dim {
                    x.set(k, i, centers.get(c, k) + self.spread * normal(rng));
                }
            }
            let noisy = y
                .iter()
                .map(|&c| {
                    if self.label_noise > 0.0 && rng.random::<f64>() < self.label_noise {
                        rng.random_range(0..self.classes)
                    } else {
                        c
                    }
                })
                .collect::<Vec<_>>();
            (x, noisy)
        };
        let (train_x, train_y) = draw(self.n_train, &mut rng);
        let (heldout_x, heldout_y) = draw(self.n_heldout, &mut rng);
        let mut idx: Vec<usize> = (0..self.n_train).collect();
        idx.shuffle(&mut rng);
        idx.truncate(self.probe_batch);
        let probe_x = Matrix::from_fn(self.dim, self.probe_batch, |k, j| train_x.get(k, idx[j]));
        let probe_y = idx.iter().map(|&i| train_y[i]).collect();
        Ok(TaskData { centers, train_x, train_y, heldout_x, heldout_y, probe_x, probe_y })
    }
}

/// Fraction of columns of `x` whose argmax logit (first on ties) equals the label.
pub fn accuracy(head: &Matrix, x: &Matrix, y: &[usize]) -> Result<f64> {
    let logits = head.matmul(x)?;
    let mut correct = 0usize;
    for (i, &label) in y.iter().enumerate() {
        let mut best = 0;
        for c in 1..logits.rows() {
            if logits.get(c, i) > logits.get(best, i) {
                best = c;
            }
        }
        correct += usize::from(best == label);
    }
    Ok(correct as f64 / y.len() as f64)
}

/// Step size below which full-batch descent on mean cross-entropy decreases
/// the training loss monotonically: `4 / λ_max(X Xᵀ / n)`, since the softmax
/// Jacobian has spectral norm at most ½.
pub fn lr_stability_bound(x: &Matrix) -> f64 {
    let (d, n) = (x.rows(), x.cols());
    let gram = x.matmul_transpose(x).expect("square");
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut lambda = 0.0;
    for _ in 0..500 {
        let w: Vec<f64> = (0..d).map(|r| gram.row(r).iter().zip(&v).map(|(a, b)| a * b).sum()).collect();
        let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return f64::INFINITY;
        }
        lambda = norm;
        v = w.into_iter().map(|a| a / norm).collect();
    }
    4.0 / (lambda / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub probe_every: usize,
    /// Standard deviation of the initial head weights.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { steps: 400, lr: 0.05, probe_every: 5, init_scale: 0.3 }
    }
}

impl TrainConfig {
    /// Defaults for [`regression_run`]: a smaller step so the held-out error
    /// keeps falling over the whole run instead of flattening at the noise floor.
    pub fn regression() -> Self {
        Self { lr: 0.005, init_scale: 0.0, ..Self::default() }
    }
}

/// One probed checkpoint of a synthetic run.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: u64,
    pub traces: Vec<ProbeTraceFile>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedRun {
    pub checkpoints: Vec<Checkpoint>,
    /// Full training loss before every update, plus the final loss.
    pub train_losses: Vec<f64>,
    pub final_head: Matrix,
}

fn probe_steps(cfg: &TrainConfig) -> impl Fn(usize) -> bool + '_ {
    move |t| t % cfg.probe_every == 0 || t == cfg.steps
}

/// Full-batch gradient descent on cross-entropy. At each probe step the head
/// is recorded together with the fixed probe batch, the exact held-out
/// accuracy (metric) and the held-out loss (aux_loss).
pub fn train_linear_head_run(task: &SyntheticTask, cfg: &TrainConfig) -> Result<TrainedRun> {
    if cfg.probe_every == 0 {
        return Err(Error::Invalid("probe_every must be >= 1".into()));
    }
    let data = task.sample()?;
    let mut rng = rng_for(task.seed, 2);
    let mut head = Matrix::from_fn(task.classes, task.dim, |_, _| cfg.init_scale * normal(&mut rng));
    let train = ProbeBatch::new(data.train_x.clone(), head.clone(), Targets::Labels(data.train_y.clone()))?;
    let probe_batch = ProbeBatch::new(data.probe_x.clone(), head.clone(), Targets::Labels(data.probe_y.clone()))?;
    let is_probe = probe_steps(cfg);

    let mut checkpoints = Vec::new();
    let mut train_losses = Vec::with_capacity(cfg.steps + 1);
    let mut current = train;
    for t in 0..=cfg.steps {
        let loss = match batch_loss(&current) {
            Ok(l) if l.is_finite() => l,
            Ok(l) => return Err(Error::Diverged { step: t as u64, detail: format!("training loss {l}") }),
            Err(Error::NonFinite { .. }) => {
                return Err(Error::Diverged { step: t as u64, detail: "non-finite logits".into() })
            }
            Err(e) => return Err(e),
        };
        train_losses.push(loss);
        if is_probe(t) {
            let acc = accuracy(&head, &data.heldout_x, &data.heldout_y)?;
            let held_loss = cross_entropy(&head.matmul(&data.heldout_x)?, &data.heldout_y)?;
            let batch = probe_batch.with_head(head.clone())?;
            checkpoints.push(Checkpoint {
                step: t as u64,
                traces: vec![ProbeTraceFile::from_batch(&batch, t as u64, Some(acc), Some(held_loss))],
            });
        }
        if t == cfg.steps {
            break;
        }
        let g = head_gradient(&current)?;
        let updated: Vec<f64> = head.as_slice().iter().zip(g.as_slice()).map(|(w, g)| w - cfg.lr * g).collect();
        head = Matrix::from_vec(task.classes, task.dim, updated)?;
        current = match current.with_head(head.clone()) {
            Ok(b) => b,
            Err(Error::NonFinite { .. }) => {
                return Err(Error::Diverged { step: t as u64 + 1, detail: "non-finite head weights".into() })
            }
            Err(e) => return Err(e),
        };
    }
    Ok(TrainedRun { checkpoints, train_losses, final_head: head })
}

#[allow(clippy::too_many_arguments)]
fn write_run(
    run: &TrainedRun,
    run_id: &str,
    task: Mode,
    classes: usize,
    dim: usize,
    probe_batch: usize,
    orientation: Orientation,
    notes: Vec<String>,
    out_dir: &Path,
) -> Result<RunManifest> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut entries = Vec::with_capacity(run.checkpoints.len());
    for ck in &run.checkpoints {
        let mut files = Vec::with_capacity(ck.traces.len());
        for (k, trace) in ck.traces.iter().enumerate() {
            let name = if ck.traces.len() == 1 {
                format!("ckpt_{:08}.hgp", ck.step)
            } else {
                format!("ckpt_{:08}_r{k}.hgp", ck.step)
            };
            write_trace(out_dir.join(&name), trace)?;
            files.push(name);
        }
        entries.push(CheckpointEntry { step: ck.step, files });
    }
    let manifest = RunManifest {
        run_id: run_id.to_string(),
        task,
        classes,
        dim,
        probe_batch,
        orientation,
        checkpoints: entries,
        notes,
    };
    write_manifest(out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Trains and writes one trace per probe step plus `manifest.json` into `out_dir`.
pub fn train_linear_head(task: &SyntheticTask, cfg: &TrainConfig, out_dir: &Path) -> Result<RunManifest> {
    let run = train_linear_head_run(task, cfg)?;
    let notes = vec![
        format!("synthetic classification: {}", serde_json::to_string(task)?),
        format!("training: {}", serde_json::to_string(cfg)?),
        "metric = held-out accuracy; aux_loss = held-out cross-entropy".into(),
    ];
    write_run(
        &run,
        &format!("synthetic-cls-{}", task.seed),
        Mode::Classification,
        task.classes,
        task.dim,
        task.probe_batch,
        Orientation::HigherIsBetter,
        notes,
        out_dir,
    )
}

/// Linear regression task `y = A x + noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTask {
    pub outputs: usize,
    pub dim: usize,
    pub n_train: usize,
    pub n_heldout: usize,
    pub probe_batch: usize,
    pub target_noise: f64,
    /// Range of the multiplier applied to `target_noise` when drawing each probe repeat.
    pub noise_range: (f64, f64),
    pub repeats: usize,
    pub seed: u64,
}

impl Default for RegressionTask {
    fn default() -> Self {
        Self {
            outputs: 4,
            dim: 16,
            n_train: 512,
            n_heldout: 1024,
            probe_batch: 64,
            target_noise: 0.5,
            noise_range: (0.1, 0.7),
            repeats: 3,
            seed: 0,
        }
    }
}

impl RegressionTask {
    fn validate(&self) -> Result<()> {
        if self.outputs < 1 || self.dim < 1 || self.repeats < 1 {
            return Err(Error::Invalid("outputs, dim and repeats must be >= 1".into()));
        }
        if self.probe_batch < 1 || self.probe_batch > self.n_train || self.n_heldout < 1 {
            return Err(Error::Invalid("probe batch must lie in [1, n_train]; n_heldout >= 1".into()));
        }
        let (lo, hi) = self.noise_range;
        if self.target_noise < 0.0 || !(0.0 <= lo && lo <= hi) {
            return Err(Error::Invalid("need target_noise >= 0 and 0 <= lo <= hi".into()));
        }
        Ok(())
    }
}

/// Mean over examples of `‖W x − y‖²`.
pub fn mean_squared_error(head: &Matrix, x: &Matrix, y: &Matrix) -> Result<f64> {
    let pred = head.matmul(x)?;
    let sq: f64 = pred.as_slice().iter().zip(y.as_slice()).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(sq / x.cols() as f64)
}

/// Trains a linear regression head by full-batch descent on the ½-scaled
/// mean squared error. Each probe step carries `repeats` regression traces
/// whose targets use independently drawn noise scales; metric is the
/// negative held-out MSE.
pub fn regression_run(task: &RegressionTask, cfg: &TrainConfig) -> Result<TrainedRun> {
    task.validate()?;
    if cfg.probe_every == 0 {
        return Err(Error::Invalid("probe_every must be >= 1".into()));
    }
    let (c, d) = (task.outputs, task.dim);
    let mut rng = rng_for(task.seed, 3);
    let scale = 1.0 / (d as f64).sqrt();
    let truth = Matrix::from_fn(c, d, |_, _| scale * normal(&mut rng));
    let mut draw = |n: usize| -> Result<(Matrix, Matrix)> {
        let x = Matrix::from_fn(d, n, |_, _| normal(&mut rng));
        let mut y = truth.matmul(&x)?;
        let noisy = y.as_slice().iter().map(|v| v + task.target_noise * normal(&mut rng)).collect();
        y = Matrix::from_vec(c, n, noisy)?;
        Ok((x, y))
    };
    let (train_x, train_y) = draw(task.n_train)?;
    let (held_x, held_y) = draw(task.n_heldout)?;
    let probe_x = Matrix::from_fn(d, task.probe_batch, |k, j| train_x.get(k, j));
    let probe_clean = truth.matmul(&probe_x)?;

    let mut noise_rng = rng_for(task.seed, 4);
    let mut head = Matrix::zeros(c, d);
    let mut current = ProbeBatch::new(train_x, head.clone(), Targets::Regression(train_y))?;
    let is_probe = probe_steps(cfg);
    let mut checkpoints = Vec::new();
    let mut train_losses = Vec::new();
    for t in 0..=cfg.steps {
        let loss = match batch_loss(&current) {
            Ok(l) if l.is_finite() => l,
            Ok(l) => return Err(Error::Diverged { step: t as u64, detail: format!("training loss {l}") }),
            Err(Error::NonFinite { .. }) => {
                return Err(Error::Diverged { step: t as u64, detail: "non-finite logits".into() })
            }
            Err(e) => return Err(e),
        };
        train_losses.push(loss);
        if is_probe(t) {
            let mse = mean_squared_error(&head, &held_x, &held_y)?;
            let mut traces = Vec::with_capacity(task.repeats);
            for _ in 0..task.repeats {
                let (lo, hi) = task.noise_range;
                let sigma = task.target_noise * if hi > lo { noise_rng.random_range(lo..hi) } else { lo };
                let y: Vec<f64> = probe_clean.as_slice().iter().map(|v| v + sigma * normal(&mut noise_rng)).collect();
                let batch = ProbeBatch::new(
                    probe_x.clone(),
                    head.clone(),
                    Targets::Regression(Matrix::from_vec(c, task.probe_batch, y)?),
                )?;
                let probe_loss = batch_loss(&batch)?;
                traces.push(ProbeTraceFile::from_batch(&batch, t as u64, Some(-mse), Some(probe_loss)));
            }
            checkpoints.push(Checkpoint { step: t as u64, traces });
        }
        if t == cfg.steps {
            break;
        }
        let g = head_gradient(&current)?;
        let updated: Vec<f64> = head.as_slice().iter().zip(g.as_slice()).map(|(w, g)| w - cfg.lr * g).collect();
        head = Matrix::from_vec(c, d, updated)?;
        current = current
            .with_head(head.clone())
            .map_err(|_| Error::Diverged { step: t as u64 + 1, detail: "non-finite head weights".into() })?;
    }
    Ok(TrainedRun { checkpoints, train_losses, final_head: head })
}

pub fn make_regression_run(task: &RegressionTask, cfg: &TrainConfig, out_dir: &Path) -> Result<RunManifest> {
    let run = regression_run(task, cfg)?;
    let notes = vec![
        format!("synthetic regression: {}", serde_json::to_string(task)?),
        format!("training: {}", serde_json::to_string(cfg)?),
        "metric = negative held-out MSE; aux_loss = probe MSE of each repeat".into(),
    ];
    write_run(
        &run,
        &format!("synthetic-reg-{}", task.seed),
        Mode::Regression,
        task.outputs,
        task.dim,
        task.probe_batch,
        Orientation::HigherIsBetter,
        notes,
        out_dir,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::{probe, ProbeOptions};

    #[test]
    fn zero_noise_identity_projection() {
        let id = Projection::new(1.0, 1.0, 0.0, 0.0);
        let model = LatentStateModel {
            noise: 0.0,
            gradient: Projection { sign: -1.0, ..id },
            confidence: id,
            entropy: Projection { lag: 2, ..id },
            margin: id,
            metric: id,
            ..Default::default()
        };
        let t = simulate_readouts(&model, 20, 3).unwrap();
        let latent = t.extra("latent").unwrap();
        let entropy = t.extra("entropy").unwrap();
        for (i, r) in t.rows.iter().enumerate() {
            let s = latent[i].unwrap();
            assert_eq!(r.score, -s);
            assert_eq!(r.metric, Some(s));
            assert_eq!(entropy[i].unwrap(), latent[i.saturating_sub(2)].unwrap());
        }
    }

    #[test]
    fn simulate_is_seeded() {
        let m = LatentStateModel::default();
        assert_eq!(simulate_readouts(&m, 50, 9).unwrap(), simulate_readouts(&m, 50, 9).unwrap());
        assert_ne!(simulate_readouts(&m, 50, 9).unwrap(), simulate_readouts(&m, 50, 10).unwrap());
        assert!(simulate_readouts(&m, 1, 0).is_err());
        let bad = LatentStateModel { metric: Projection { lag: 99, ..m.metric }, ..m };
        assert!(simulate_readouts(&bad, 10, 0).is_err());
    }

    #[test]
    fn zero_lr_gives_constant_scores() {
        let task = SyntheticTask { n_train: 100, n_heldout: 100, probe_batch: 16, ..Default::default() };
        let cfg = TrainConfig { steps: 20, lr: 0.0, ..Default::default() };
        let run = train_linear_head_run(&task, &cfg).unwrap();
        let scores: Vec<f64> = run
            .checkpoints
            .iter()
            .map(|c| probe(&c.traces[0].to_batch().unwrap(), ProbeOptions::default()).unwrap().grad_fro)
            .collect();
        assert_eq!(scores.len(), 5);
        assert!(scores.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn task_validation() {
        assert!(SyntheticTask { classes: 1, ..Default::default() }.sample().is_err());
        assert!(SyntheticTask { spread: 0.0, ..Default::default() }.sample().is_err());
        assert!(SyntheticTask { n_train: 3, ..Default::default() }.sample().is_err());
        let cfg = TrainConfig { probe_every: 0, ..Default::default() };
        assert!(train_linear_head_run(&SyntheticTask::default(), &cfg).is_err());
    }

    #[test]
    fn huge_lr_diverges() {
        let task = SyntheticTask { n_train: 50, n_heldout: 50, probe_batch: 8, separation: 50.0, ..Default::default() };
        let cfg = TrainConfig { steps: 400, lr: 1e307, ..Default::default() };
        let r = train_linear_head_run(&task, &cfg);
        assert!(matches!(r, Err(Error::Diverged { .. })), "{:?}", r.map(|r| r.train_losses));
    }
}
