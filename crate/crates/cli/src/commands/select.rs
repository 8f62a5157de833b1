use gradprobe::trace_io::read_series;
use gradprobe::trajectory::evaluate_strategies;
use gradprobe::{Result, Strategy};

use super::{ensure_dir, fmt_opt, write_json};
use crate::args::SelectCmd;

pub fn run(cmd: &SelectCmd) -> Result<()> {
    let series = read_series(&cmd.series)?.to_trajectory()?;
    let config = cmd.select.config();
    let report = evaluate_strategies(&series, &config)?;
    ensure_dir(&cmd.out.out)?;
    let path = write_json(&cmd.out.out, "selection.json", "selection", None, serde_json::to_value(&config)?, &report)?;
    let ema = report.get(Strategy::EmaArgmin).expect("ema-argmin always runs");
    println!(
        "select: ema_argmin step {} gap {} over records {}..{} -> {}",
        ema.chosen_step,
        fmt_opt(ema.gap),
        report.window_start,
        report.window_end,
        path.display()
    );
    Ok(())
}
