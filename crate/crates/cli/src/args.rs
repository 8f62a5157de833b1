use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gradprobe::probe::DEFAULT_EPS;
use gradprobe::stats::{CorrelationOptions, DEFAULT_RESAMPLES};
use gradprobe::{Orientation, ProbeOptions, ScoreKind, SelectionConfig};

const AFTER_HELP: &str = "\
Defaults reproduce the universal configuration: EMA span 3 over the last 80
probe records, quantile 0.1, patience 3, lead-lag within +/-10 records,
10000 bootstrap resamples, seed 0.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 degenerate statistics.";

/// Validation-free training diagnostics from head-only gradient probes.
#[derive(Debug, Parser)]
#[command(name = "gradprobe", version, after_help = AFTER_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute probe readouts for every checkpoint of a run.
    ///
    /// Input is a run directory or manifest.json, or a list of .hgp trace
    /// files. Traces sharing a step are repeats and are median-aggregated.
    /// Writes series.csv and probe.json.
    Probe(ProbeCmd),
    /// Pick a checkpoint from a series CSV with every selection strategy.
    ///
    /// Writes selection.json. Gaps are reported when the metric column is filled.
    Select(SelectCmd),
    /// Correlate score with metric: Pearson/Spearman, bootstrap CIs,
    /// leave-one-out shifts, and OLS with step as a covariate.
    ///
    /// Accepts a series CSV or a `name,score,metric` model table. Writes correlation.json.
    Correlate(CorrelateCmd),
    /// Generate a synthetic run: traces plus manifest, or a latent-state series CSV.
    Simulate(SimulateCmd),
    /// Evaluate EMA-argmin selection over the (span, tail size) grid {1,3,5,9} x {60,80,100}.
    ///
    /// Writes sweep.csv and sweep.json.
    Sweep(SweepCmd),
    /// Scatter plot with least-squares fit plus a summary report.
    ///
    /// Writes scatter.svg and summary.json.
    Report(ReportCmd),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory (created if missing).
    #[arg(short, long, default_value = "gradprobe-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// EMA span k; decay 1 - 2/(k+1). k = 1 disables smoothing [default: 3]
    #[arg(long, conflicts_with = "ema_beta")]
    pub ema_span: Option<usize>,
    /// EMA decay in [0, 1), alternative to --ema-span (0.9 in the diffusion setting)
    #[arg(long)]
    pub ema_beta: Option<f64>,
    /// Tail window as a count of last probe records [default: 80]
    #[arg(long, conflicts_with = "tail_fraction")]
    pub tail_size: Option<usize>,
    /// Tail window as a fraction of the series in (0, 1], alternative to --tail-size (0.2 = last 20%)
    #[arg(long)]
    pub tail_fraction: Option<f64>,
    /// Nearest-rank quantile of smoothed scores used as candidates
    #[arg(long, default_value_t = 0.1)]
    pub quantile: f64,
    /// Probe records an incumbent candidate must survive before it is chosen
    #[arg(long, default_value_t = 3)]
    pub patience: usize,
    /// Largest lead-lag shift, in probe records
    #[arg(long, default_value_t = 10)]
    pub max_lag: usize,
    #[command(flatten)]
    pub orientation: OrientationArgs,
}

impl SelectArgs {
    pub fn config(&self) -> SelectionConfig {
        let (ema_span, ema_beta) = match self.ema_beta {
            Some(b) => (None, Some(b)),
            None => (Some(self.ema_span.unwrap_or(3)), None),
        };
        let (tail_size, tail_fraction) = match self.tail_fraction {
            Some(f) => (None, Some(f)),
            None => (Some(self.tail_size.unwrap_or(80)), None),
        };
        SelectionConfig {
            ema_span,
            ema_beta,
            tail_size,
            tail_fraction,
            quantile: self.quantile,
            patience: self.patience,
            max_lag: self.max_lag,
            repeats: 1,
            orientation: self.orientation.get(),
        }
    }
}

#[derive(Debug, Args)]
pub struct OrientationArgs {
    /// The metric improves upward, e.g. accuracy (default)
    #[arg(long, conflicts_with = "lower_is_better")]
    pub higher_is_better: bool,
    /// The metric improves downward, e.g. FID or error rate
    #[arg(long)]
    pub lower_is_better: bool,
}

impl OrientationArgs {
    pub fn get(&self) -> Orientation {
        if self.lower_is_better {
            Orientation::LowerIsBetter
        } else {
            Orientation::HigherIsBetter
        }
    }
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Bootstrap resamples for the 95% percentile intervals
    #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
    pub resamples: usize,
    /// Seed for every randomized procedure; the flag wins over the environment
    #[arg(long, env = "GRADPROBE_SEED", default_value_t = 0)]
    pub seed: u64,
}

impl StatsArgs {
    pub fn options(&self) -> CorrelationOptions {
        CorrelationOptions { n_resamples: self.resamples, seed: self.seed }
    }
}

#[derive(Debug, Args)]
pub struct ProbeCmd {
    /// Run directory, manifest.json, or .hgp trace files
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Readout written to the `score` column: fro, l1, linf, fisher, score_z, score_w, confidence, entropy, margin
    #[arg(long, default_value = "fro", value_parser = parse_score)]
    pub score: ScoreKind,
    /// Epsilon added to the feature norm in score_z
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps_z: f64,
    /// Epsilon added to the head norm in score_w
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps_w: f64,
    /// Expected probe repeats per checkpoint (3 in the diffusion setting); taken from the input when absent
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Skip unreadable traces, report them, and still write the remaining rows
    #[arg(long)]
    pub keep_going: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

impl ProbeCmd {
    pub fn options(&self) -> ProbeOptions {
        ProbeOptions { eps_z: self.eps_z, eps_w: self.eps_w }
    }
}

fn parse_score(s: &str) -> Result<ScoreKind, String> {
    ScoreKind::parse(s).ok_or_else(|| {
        let names: Vec<&str> = ScoreKind::ALL.iter().map(|k| k.name()).collect();
        format!("unknown score {s:?}; expected one of {}", names.join(", "))
    })
}

#[derive(Debug, Args)]
pub struct SelectCmd {
    /// Series CSV with header step,score,metric,aux_loss
    pub series: PathBuf,
    #[command(flatten)]
    pub select: SelectArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct CorrelateCmd {
    /// Series CSV or name,score,metric model table
    pub input: PathBuf,
    #[command(flatten)]
    pub stats: StatsArgs,
    #[command(flatten)]
    pub orientation: OrientationArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimKind {
    /// Linear softmax head trained by full-batch descent on Gaussian clusters
    Classification,
    /// Linear regression head with K noisy probe repeats per checkpoint
    Regression,
    /// Latent-state readout simulator (writes series.csv only)
    Latent,
}

#[derive(Debug, Args)]
pub struct SimulateCmd {
    #[arg(long, value_enum, default_value_t = SimKind::Classification)]
    pub kind: SimKind,
    /// Training steps (records for the latent simulator)
    #[arg(long, default_value_t = 400)]
    pub steps: usize,
    /// Step size [default: 0.05 classification, 0.005 regression]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Write a probe trace every this many steps
    #[arg(long, default_value_t = 5)]
    pub probe_every: usize,
    /// Classes (classification) or output dimensions (regression) [default: 5 / 4]
    #[arg(long)]
    pub classes: Option<usize>,
    /// Feature dimension [default: 20 classification, 16 regression]
    #[arg(long)]
    pub dim: Option<usize>,
    /// Probe batch size
    #[arg(long, default_value_t = 64)]
    pub probe_batch: usize,
    /// Standard deviation of class-center coordinates
    #[arg(long, default_value_t = 0.35)]
    pub separation: f64,
    /// Probability of relabeling a training example uniformly at random
    #[arg(long, default_value_t = 0.0)]
    pub label_noise: f64,
    /// Probe repeats per checkpoint for regression runs
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Run seed; the flag wins over the environment
    #[arg(long, env = "GRADPROBE_SEED", default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SweepCmd {
    /// Series CSV with a metric column
    pub series: PathBuf,
    #[command(flatten)]
    pub orientation: OrientationArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ReportCmd {
    /// Series CSV or name,score,metric model table
    pub input: PathBuf,
    /// Fit and plot against log10 of the score
    #[arg(long)]
    pub log10_x: bool,
    /// Plot title
    #[arg(long, default_value = "")]
    pub title: String,
    #[command(flatten)]
    pub stats: StatsArgs,
    #[command(flatten)]
    pub select: SelectArgs,
    #[command(flatten)]
    pub out: OutArgs,
}
