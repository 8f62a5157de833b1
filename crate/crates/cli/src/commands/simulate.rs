use gradprobe::synthetic::{
    make_regression_run, simulate_readouts, train_linear_head, LatentStateModel, RegressionTask, SyntheticTask,
    TrainConfig,
};
use gradprobe::trace_io::{write_series, MANIFEST_FILE};
use gradprobe::Result;

use super::ensure_dir;
use crate::args::{SimKind, SimulateCmd};

pub fn run(cmd: &SimulateCmd) -> Result<()> {
    let out = &cmd.out.out;
    ensure_dir(out)?;
    if cmd.kind == SimKind::Latent {
        let table = simulate_readouts(&LatentStateModel::default(), cmd.steps, cmd.seed)?;
        let path = out.join("series.csv");
        write_series(&path, &table)?;
        println!("simulate: latent series of {} records -> {}", table.rows.len(), path.display());
        return Ok(());
    }

    let base = if cmd.kind == SimKind::Regression { TrainConfig::regression() } else { TrainConfig::default() };
    let train = TrainConfig {
        steps: cmd.steps,
        lr: cmd.lr.unwrap_or(base.lr),
        probe_every: cmd.probe_every,
        ..base
    };
    let manifest = match cmd.kind {
        SimKind::Classification => {
            let task = SyntheticTask {
                classes: cmd.classes.unwrap_or(5),
                dim: cmd.dim.unwrap_or(20),
                separation: cmd.separation,
                probe_batch: cmd.probe_batch,
                label_noise: cmd.label_noise,
                seed: cmd.seed,
                ..SyntheticTask::default()
            };
            train_linear_head(&task, &train, out)?
        }
        _ => {
            let task = RegressionTask {
                outputs: cmd.classes.unwrap_or(4),
                dim: cmd.dim.unwrap_or(16),
                probe_batch: cmd.probe_batch,
                repeats: cmd.repeats,
                seed: cmd.seed,
                ..RegressionTask::default()
            };
            make_regression_run(&task, &train, out)?
        }
    };
    println!(
        "simulate: {} checkpoints x {} repeats -> {}",
        manifest.checkpoints.len(),
        manifest.repeats(),
        out.join(MANIFEST_FILE).display()
    );
    Ok(())
}
