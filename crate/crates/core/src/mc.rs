//! Monte Carlo sweeps over `(n, d, SNR exponent)` grids.
//!
//! Each trial draws its own instance from the seed
//! `derive_seed(master_seed, [n, d, exponent.to_bits(), trial])` (see
//! [`crate::seed`]), so trials are independent of each other, of the worker
//! count, and of the order in which cells are run.

use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::SolverConfig;
use crate::model::{generate, ModelConfig, Snr};
use crate::perm::overlap;
use crate::seed::{derive_seed, DEFAULT_SEED};

pub const TRIALS_HEADER: &str = "n,d,snr_exponent,trial,seed,exact,overlap,residual_sq,wall_time_ms";
pub const SUMMARY_HEADER: &str =
    "n,d,snr_exponent,trials,recovery_rate,recovery_se,mean_overlap,overlap_se";

/// Default cap on [`ExperimentGrid::work_estimate`].
pub const DEFAULT_WORK_BUDGET: f64 = 1e12;

fn default_master_seed() -> u64 {
    DEFAULT_SEED
}

fn default_beta_norm() -> f64 {
    1.0
}

fn default_work_budget() -> f64 {
    DEFAULT_WORK_BUDGET
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub n_values: Vec<usize>,
    pub d_values: Vec<usize>,
    /// Exponents `c` with `SNR = n^c`; `inf` means noiseless.
    pub snr_exponents: Vec<f64>,
    pub trials_per_cell: usize,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_master_seed")]
    pub master_seed: u64,
    #[serde(default = "default_beta_norm")]
    pub beta_norm: f64,
    /// Measure per-trial wall time. Off by default: timings make the trial
    /// table differ between otherwise identical runs.
    #[serde(default)]
    pub timing: bool,
    #[serde(default = "default_work_budget")]
    pub work_budget: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub n: usize,
    pub d: usize,
    pub exponent: f64,
}

impl Cell {
    pub fn snr(&self) -> Snr {
        if self.exponent == f64::INFINITY {
            Snr::Noiseless
        } else {
            Snr::Exponent(self.exponent)
        }
    }

    pub fn trial_seed(&self, master_seed: u64, trial: usize) -> u64 {
        derive_seed(
            master_seed,
            &[self.n as u64, self.d as u64, self.exponent.to_bits(), trial as u64],
        )
    }
}

impl ExperimentGrid {
    pub fn new(n_values: Vec<usize>, d_values: Vec<usize>, snr_exponents: Vec<f64>, trials_per_cell: usize) -> Self {
        ExperimentGrid {
            n_values,
            d_values,
            snr_exponents,
            trials_per_cell,
            solver: SolverConfig::default(),
            master_seed: DEFAULT_SEED,
            beta_norm: 1.0,
            timing: false,
            work_budget: DEFAULT_WORK_BUDGET,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials_per_cell == 0 {
            return Err(Error::InvalidArgument("trials_per_cell must be >= 1".into()));
        }
        if self.n_values.is_empty() || self.d_values.is_empty() || self.snr_exponents.is_empty() {
            return Err(Error::InvalidArgument("grid axes must be non-empty".into()));
        }
        let min_n = *self.n_values.iter().min().expect("non-empty");
        let max_d = *self.d_values.iter().max().expect("non-empty");
        if self.d_values.contains(&0) || min_n == 0 {
            return Err(Error::InvalidArgument("n and d values must be positive".into()));
        }
        if max_d > min_n {
            return Err(Error::Dimension(format!(
                "every d must be <= every n, got d={max_d} > n={min_n}"
            )));
        }
        if self.snr_exponents.iter().any(|c| c.is_nan() || *c == f64::NEG_INFINITY) {
            return Err(Error::InvalidArgument("SNR exponents must be real or +inf".into()));
        }
        if !self.snr_exponents.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "SNR exponents must be strictly ascending".into(),
            ));
        }
        Ok(())
    }

    /// Cells in output order: `n`, then `d`, then exponent.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &n in &self.n_values {
            for &d in &self.d_values {
                for &exponent in &self.snr_exponents {
                    cells.push(Cell { n, d, exponent });
                }
            }
        }
        cells
    }

    /// Total solver cost in sort-sized units.
    pub fn work_estimate(&self) -> f64 {
        self.cells()
            .iter()
            .map(|c| self.solver.work_units(c.n, c.d))
            .sum::<f64>()
            * self.trials_per_cell as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TrialOutcome {
    Solved {
        exact: bool,
        overlap: f64,
        residual_sq: f64,
    },
    /// The solver refused or failed, e.g. a net budget was exceeded.
    Failed { kind: String, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub cell: Cell,
    pub trial: usize,
    pub seed: u64,
    pub outcome: TrialOutcome,
    pub wall_time_ms: f64,
}

impl TrialRecord {
    pub fn exact(&self) -> bool {
        matches!(self.outcome, TrialOutcome::Solved { exact: true, .. })
    }

    pub fn overlap(&self) -> Option<f64> {
        match self.outcome {
            TrialOutcome::Solved { overlap, .. } => Some(overlap),
            TrialOutcome::Failed { .. } => None,
        }
    }
}

/// One trial. Errors from instance generation (bad cell) are returned;
/// solver errors are recorded in the outcome.
pub fn run_trial(
    cell: Cell,
    trial: usize,
    master_seed: u64,
    solver: &SolverConfig,
    beta_norm: f64,
    timing: bool,
) -> Result<TrialRecord> {
    let seed = cell.trial_seed(master_seed, trial);
    let mut config = ModelConfig::new(cell.n, cell.d, cell.snr());
    config.beta_norm = beta_norm;
    let inst = generate(&config, seed)?;
    let start = Instant::now();
    let solved = solver.solve(&inst.x, &inst.y, Some(inst.beta_star.as_slice()));
    let wall_time_ms = if timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    let outcome = match solved {
        Ok(est) => TrialOutcome::Solved {
            exact: est.pi_hat == inst.pi_star,
            overlap: overlap(&est.pi_hat, &inst.pi_star)?,
            residual_sq: est.residual_sq,
        },
        Err(e) => TrialOutcome::Failed {
            kind: e.kind().to_string(),
            message: e.to_string(),
        },
    };
    Ok(TrialRecord {
        cell,
        trial,
        seed,
        outcome,
        wall_time_ms,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: Cell,
    /// Solved trials; failed trials are counted separately.
    pub trials: usize,
    pub failures: usize,
    pub recovery_rate: f64,
    pub recovery_se: f64,
    pub mean_overlap: f64,
    pub overlap_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub cells: Vec<CellSummary>,
}

impl GridSummary {
    pub fn cell(&self, n: usize, d: usize, exponent: f64) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.cell.n == n && c.cell.d == d && c.cell.exponent == exponent)
    }

    pub fn total_failures(&self) -> usize {
        self.cells.iter().map(|c| c.failures).sum()
    }
}

/// Aggregates records per cell, keeping cells in first-seen order.
pub fn summarize(records: &[TrialRecord]) -> GridSummary {
    let mut groups: Vec<(Cell, Vec<&TrialRecord>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(c, _)| *c == r.cell) {
            Some((_, v)) => v.push(r),
            None => groups.push((r.cell, vec![r])),
        }
    }
    let cells = groups
        .into_iter()
        .map(|(cell, rs)| {
            let overlaps: Vec<f64> = rs.iter().filter_map(|r| r.overlap()).collect();
            let trials = overlaps.len();
            let failures = rs.len() - trials;
            let hits = rs.iter().filter(|r| r.exact()).count();
            let (rate, rate_se, mean, mean_se) = if trials == 0 {
                (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
            } else {
                let m = trials as f64;
                let rate = hits as f64 / m;
                let mean = overlaps.iter().sum::<f64>() / m;
                let var = if trials > 1 {
                    overlaps.iter().map(|o| (o - mean).powi(2)).sum::<f64>() / (m - 1.0)
                } else {
                    0.0
                };
                (rate, (rate * (1.0 - rate) / m).sqrt(), mean, (var / m).sqrt())
            };
            CellSummary {
                cell,
                trials,
                failures,
                recovery_rate: rate,
                recovery_se: rate_se,
                mean_overlap: mean,
                overlap_se: mean_se,
            }
        })
        .collect();
    GridSummary { cells }
}

/// Runs every cell and trial in parallel; records come back in grid order.
pub fn run_grid(grid: &ExperimentGrid) -> Result<(Vec<TrialRecord>, GridSummary)> {
    run_grid_with_progress(grid, |_, _| {})
}

/// As [`run_grid`], calling `progress(done, total)` as trials finish.
pub fn run_grid_with_progress<F>(grid: &ExperimentGrid, progress: F) -> Result<(Vec<TrialRecord>, GridSummary)>
where
    F: Fn(usize, usize) + Sync,
{
    grid.validate()?;
    let work = grid.work_estimate();
    if !(work <= grid.work_budget) {
        return Err(Error::Budget(format!(
            "estimated work {work:.3e} sort-units exceeds the budget {:.3e}",
            grid.work_budget
        )));
    }
    let jobs: Vec<(Cell, usize)> = grid
        .cells()
        .into_iter()
        .flat_map(|c| (0..grid.trials_per_cell).map(move |t| (c, t)))
        .collect();
    let total = jobs.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let records = jobs
        .par_iter()
        .map(|&(cell, trial)| {
            let r = run_trial(cell, trial, grid.master_seed, &grid.solver, grid.beta_norm, grid.timing);
            let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
            progress(k, total);
            r
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&records);
    Ok((records, summary))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    RecoveryRate,
    MeanOverlap,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub lower_exponent: f64,
    pub upper_exponent: f64,
    pub exponent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionEstimate {
    pub n: usize,
    pub d: usize,
    pub metric: Metric,
    pub level: f64,
    /// `None` when no adjacent pair of exponents brackets the level.
    pub crossing: Option<Crossing>,
}

/// Linear interpolation of the first upward crossing of `level` along
/// `(exponent, value)` points sorted by exponent.
pub fn interpolate_crossing(points: &[(f64, f64)], level: f64) -> Option<Crossing> {
    points.windows(2).find_map(|w| {
        let ((e1, v1), (e2, v2)) = (w[0], w[1]);
        if v1 < level && v2 >= level {
            Some(Crossing {
                lower_exponent: e1,
                upper_exponent: e2,
                exponent: e1 + (level - v1) * (e2 - e1) / (v2 - v1),
            })
        } else {
            None
        }
    })
}

/// Crossing exponent of `metric` at `level` for every `(n, d)` pair.
pub fn estimate_transition(summary: &GridSummary, level: f64, metric: Metric) -> Vec<TransitionEstimate> {
    let mut keys: Vec<(usize, usize)> = Vec::new();
    for c in &summary.cells {
        if !keys.contains(&(c.cell.n, c.cell.d)) {
            keys.push((c.cell.n, c.cell.d));
        }
    }
    keys.into_iter()
        .map(|(n, d)| {
            let mut points: Vec<(f64, f64)> = summary
                .cells
                .iter()
                .filter(|c| c.cell.n == n && c.cell.d == d && c.trials > 0)
                .map(|c| {
                    let v = match metric {
                        Metric::RecoveryRate => c.recovery_rate,
                        Metric::MeanOverlap => c.mean_overlap,
                    };
                    (c.cell.exponent, v)
                })
                .collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            TransitionEstimate {
                n,
                d,
                metric,
                level,
                crossing: interpolate_crossing(&points, level),
            }
        })
        .collect()
}

/// Adjacent exponent pairs where `metric` drops by more than `z` combined
/// standard errors. Empty when the sweep is monotone at that slack.
pub fn monotonicity_violations(summary: &GridSummary, metric: Metric, z: f64) -> Vec<(CellSummary, CellSummary)> {
    let mut out = Vec::new();
    let mut cells: Vec<&CellSummary> = summary.cells.iter().filter(|c| c.trials > 0).collect();
    cells.sort_by(|a, b| {
        (a.cell.n, a.cell.d)
            .cmp(&(b.cell.n, b.cell.d))
            .then(a.cell.exponent.total_cmp(&b.cell.exponent))
    });
    for w in cells.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a.cell.n, a.cell.d) != (b.cell.n, b.cell.d) {
            continue;
        }
        let (va, sa, vb, sb) = match metric {
            Metric::RecoveryRate => (a.recovery_rate, a.recovery_se, b.recovery_rate, b.recovery_se),
            Metric::MeanOverlap => (a.mean_overlap, a.overlap_se, b.mean_overlap, b.overlap_se),
        };
        if vb < va - z * (sa * sa + sb * sb).sqrt() {
            out.push((a.clone(), b.clone()));
        }
    }
    out
}

/// C-style `%.17g`: shortest of fixed or scientific notation with 17
/// significant digits and trailing zeros removed.
pub fn format_g17(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..17).contains(&exp) {
        let decimals = (16 - exp) as usize;
        trim_zeros(&format!("{:.*}", decimals, v))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Trials table; failed trials have `exact=false` and `NaN` overlap and residual.
pub fn trials_csv(records: &[TrialRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(TRIALS_HEADER);
    out.push('\n');
    for r in records {
        let (exact, ov, res) = match r.outcome {
            TrialOutcome::Solved {
                exact,
                overlap,
                residual_sq,
            } => (exact, overlap, residual_sq),
            TrialOutcome::Failed { .. } => (false, f64::NAN, f64::NAN),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.cell.n,
            r.cell.d,
            format_g17(r.cell.exponent),
            r.trial,
            r.seed,
            exact,
            format_g17(ov),
            format_g17(res),
            format_g17(r.wall_time_ms)
        )
        .expect("writing to a String");
    }
    out
}

pub fn summary_csv(summary: &GridSummary) -> String {
    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for c in &summary.cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            c.cell.n,
            c.cell.d,
            format_g17(c.cell.exponent),
            c.trials,
            format_g17(c.recovery_rate),
            format_g17(c.recovery_se),
            format_g17(c.mean_overlap),
            format_g17(c.overlap_se)
        )
        .expect("writing to a String");
    }
    out
}

pub fn write_csv<W: Write>(mut w: W, contents: &str) -> Result<()> {
    w.write_all(contents.as_bytes())?;
    Ok(())
}
