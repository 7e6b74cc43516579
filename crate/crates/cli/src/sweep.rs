use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};

use shufreg::mc::{estimate_transition, run_grid_with_progress, summary_csv, trials_csv, ExperimentGrid, Metric};
use shufreg::Error;

use crate::SweepArgs;

pub fn load_grid(path: &std::path::Path) -> Result<ExperimentGrid, Error> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::InvalidArgument(format!("grid config {}: {e}", path.display())))
}

pub fn run(a: SweepArgs) -> Result<ExitCode, Error> {
    let mut grid = load_grid(&a.config)?;
    if a.timing {
        grid.timing = true;
    }
    if !(a.level > 0.0 && a.level <= 1.0) {
        return Err(Error::InvalidArgument(format!("--level must be in (0, 1], got {}", a.level)));
    }
    std::fs::create_dir_all(&a.out)?;

    let last = AtomicUsize::new(0);
    let progress = |done: usize, total: usize| {
        if !a.progress {
            return;
        }
        let pct = done * 100 / total.max(1);
        if pct > last.fetch_max(pct, Ordering::Relaxed) || done == total {
            eprintln!("sweep: {done}/{total} trials ({pct}%)");
        }
    };
    let (records, summary) = run_grid_with_progress(&grid, progress)?;

    std::fs::write(a.out.join("trials.csv"), trials_csv(&records))?;
    std::fs::write(a.out.join("summary.csv"), summary_csv(&summary))?;
    let transition = serde_json::json!({
        "level": a.level,
        "recovery_rate": estimate_transition(&summary, a.level, Metric::RecoveryRate),
        "mean_overlap": estimate_transition(&summary, a.level, Metric::MeanOverlap),
        "failed_trials": summary.total_failures(),
    });
    std::fs::write(
        a.out.join("transition.json"),
        serde_json::to_string_pretty(&transition)? + "\n",
    )?;
    if a.progress {
        eprintln!(
            "sweep: wrote {} trials to {} ({} failed)",
            records.len(),
            a.out.display(),
            summary.total_failures()
        );
    }
    Ok(ExitCode::SUCCESS)
}
