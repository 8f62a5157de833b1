//! Validation-free training diagnostics.
//!
//! Computes head-only gradient probes from exported checkpoint tensors, picks
//! checkpoints from the resulting score trajectories without validation
//! labels, and measures how well probe scores track model quality.
//!
//! - [`probe`]: gradient of the loss with respect to the linear head only,
//!   its norms, normalized scores and softmax readouts.
//! - [`trajectory`]: EMA smoothing, tail windows, quantile/patience and
//!   lead-lag selection, strategy comparison and grid sweeps.
//! - [`stats`]: Pearson/Spearman, percentile bootstrap, leave-one-out,
//!   detrended/partial correlation, OLS with a step covariate.
//! - [`trace_io`]: binary traces, manifests, CSV series, JSON reports, SVG plots.
//! - [`synthetic`]: trajectories with known ground truth.

pub mod error;
pub mod matrix;
pub mod probe;
pub mod stats;
pub mod synthetic;
pub mod trace_io;
pub mod trajectory;

pub use error::{Error, ErrorKind, Result, TraceError};
pub use matrix::Matrix;
pub use probe::{probe, Mode, ProbeBatch, ProbeOptions, ProbeScore, ScoreKind, Targets};
pub use stats::{CorrelationReport, PairedSample, RegressionReport};
pub use trajectory::{Orientation, Record, SelectionConfig, SelectionResult, Strategy, TrajectorySeries};
