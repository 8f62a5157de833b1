use std::fmt::Write;
use std::fs;

use gradprobe::trace_io::read_series;
use gradprobe::trace_io::series::fmt_f64;
use gradprobe::trajectory::{default_grid, sweep_configs};
use gradprobe::{Result, SelectionConfig};

use super::{ensure_dir, fmt_opt, io_error, write_json};
use crate::args::SweepCmd;

pub fn run(cmd: &SweepCmd) -> Result<()> {
    let series = read_series(&cmd.series)?.to_trajectory()?;
    let base = SelectionConfig { orientation: cmd.orientation.get(), ..SelectionConfig::default() };
    let table = sweep_configs(&series, &default_grid(), &base)?;

    let mut csv = String::from("ema_span,tail_size,chosen_step,gap,universal,best\n");
    for (i, c) in table.cells.iter().enumerate() {
        let gap = c.gap.map_or_else(|| "NaN".to_string(), fmt_f64);
        let _ = writeln!(
            csv,
            "{},{},{},{gap},{},{}",
            c.ema_span,
            c.tail_size,
            c.chosen_step,
            table.universal == Some(i),
            table.best == Some(i)
        );
    }
    let out = &cmd.out.out;
    ensure_dir(out)?;
    let csv_path = out.join("sweep.csv");
    fs::write(&csv_path, csv).map_err(|e| io_error(&csv_path, e))?;
    write_json(out, "sweep.json", "sweep", None, serde_json::to_value(&base)?, &table)?;

    let universal = table.universal.map(|i| &table.cells[i]);
    let best = table.best.map(|i| &table.cells[i]);
    println!(
        "sweep: {} cells, universal gap {}, best {} gap {} -> {}",
        table.cells.len(),
        fmt_opt(universal.and_then(|c| c.gap)),
        best.map_or_else(|| "n/a".to_string(), |c| format!("({}, {})", c.ema_span, c.tail_size)),
        fmt_opt(best.and_then(|c| c.gap)),
        csv_path.display()
    );
    Ok(())
}
