//! Estimators of the unknown permutation and coefficients.
//!
//! Every solver returns the least-squares refit `β̂_Π̂` on its chosen
//! permutation, so `residual_sq + qap_objective = ‖y‖²` holds for every
//! [`Estimate`] up to rounding.

pub mod lap;
pub mod lsq;
pub mod net;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::{lexicographic, Permutation};

pub use lap::{sort_assign, Assignment, SortedResponse};
pub use lsq::{least_squares_beta, residual_and_objective, Design, Fit};
pub use net::NetSpec;

pub const DEFAULT_BRUTE_FORCE_CAP: usize = 8;
pub const DEFAULT_NET_BUDGET: u64 = 1_000_000;
pub const DEFAULT_ALT_MIN_ITERS: u32 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    ExactD1,
    NetSearch,
    BruteForce,
    AltMin,
}

impl SolverKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverKind::ExactD1 => "exact_d1",
            SolverKind::NetSearch => "net_search",
            SolverKind::BruteForce => "brute_force",
            SolverKind::AltMin => "alt_min",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetStats {
    pub center: Vec<f64>,
    pub radius: f64,
    pub delta: f64,
    pub cardinality_bound: f64,
    pub points: u64,
    /// Smallest sorted-assignment residual over the net, before the refit.
    pub net_objective: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    /// Permutations (or net points) evaluated.
    pub candidates: u64,
    pub iterations: u32,
    pub degenerate_ties: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub net: Option<NetStats>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub residual_trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub pi_hat: Permutation,
    pub beta_hat: Vec<f64>,
    pub residual_sq: f64,
    pub qap_objective: f64,
    pub solver: SolverKind,
    pub stats: SolverStats,
}

impl Estimate {
    fn new(pi_hat: Permutation, fit: Fit, solver: SolverKind, stats: SolverStats) -> Self {
        Estimate {
            pi_hat,
            beta_hat: fit.beta.iter().copied().collect(),
            residual_sq: fit.residual_sq,
            qap_objective: fit.qap_objective,
            solver,
            stats,
        }
    }
}

fn check_response(design: &Design, y: &DVector<f64>) -> Result<()> {
    if y.len() != design.n() {
        return Err(Error::Dimension(format!(
            "response has length {}, design has {} rows",
            y.len(),
            design.n()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("response has non-finite entries".into()));
    }
    Ok(())
}

/// Keeps the better of two refits: lower residual, then lexicographically smaller permutation.
fn better(a: (Permutation, Fit), b: (Permutation, Fit)) -> (Permutation, Fit) {
    match lap::cmp_candidates((b.1.residual_sq, &b.0), (a.1.residual_sq, &a.0)) {
        std::cmp::Ordering::Less => b,
        _ => a,
    }
}

/// Exact maximum-likelihood solver for `d = 1`.
///
/// For `β > 0` the optimal assignment matches the sort order of `y` to that
/// of `x`, for `β < 0` to the reversed order. Both candidates are refitted
/// and the one with the smaller residual is the global minimizer.
pub fn solve_exact_d1(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Estimate> {
    if x.ncols() != 1 {
        return Err(Error::InvalidArgument(format!(
            "exact solver needs d = 1, got d = {}",
            x.ncols()
        )));
    }
    let design = Design::new(x.clone())?;
    solve_exact_d1_with(&design, y)
}

pub fn solve_exact_d1_with(design: &Design, y: &DVector<f64>) -> Result<Estimate> {
    if design.d() != 1 {
        return Err(Error::InvalidArgument(format!(
            "exact solver needs d = 1, got d = {}",
            design.d()
        )));
    }
    check_response(design, y)?;
    let col: Vec<f64> = design.x().column(0).iter().copied().collect();
    let neg: Vec<f64> = col.iter().map(|v| -v).collect();
    let plus = sort_assign(y.as_slice(), &col)?;
    let minus = sort_assign(y.as_slice(), &neg)?;
    let ties = plus.degenerate_ties || minus.degenerate_ties;
    let fit_plus = design.refit(&plus.perm, y)?;
    let fit_minus = design.refit(&minus.perm, y)?;
    let (pi, fit) = better((plus.perm, fit_plus), (minus.perm, fit_minus));
    let stats = SolverStats {
        candidates: 2,
        iterations: 1,
        degenerate_ties: ties,
        ..Default::default()
    };
    Ok(Estimate::new(pi, fit, SolverKind::ExactD1, stats))
}

/// Exhaustive minimization over all `n!` permutations, in lexicographic
/// order; exact residual ties go to the earlier permutation.
pub fn solve_brute_force(x: &DMatrix<f64>, y: &DVector<f64>, cap: usize) -> Result<Estimate> {
    let n = x.nrows();
    if n > cap {
        return Err(Error::Budget(format!(
            "brute force over {n}! permutations exceeds the cap n <= {cap}"
        )));
    }
    let design = Design::new(x.clone())?;
    check_response(&design, y)?;
    let mut best: Option<(Permutation, Fit)> = None;
    let mut candidates = 0u64;
    for pi in lexicographic(n) {
        candidates += 1;
        let fit = design.refit(&pi, y)?;
        let replace = match &best {
            None => true,
            Some((_, b)) => fit.residual_sq < b.residual_sq,
        };
        if replace {
            best = Some((pi, fit));
        }
    }
    let (pi, fit) = best.expect("at least one permutation");
    let stats = SolverStats {
        candidates,
        iterations: 1,
        ..Default::default()
    };
    Ok(Estimate::new(pi, fit, SolverKind::BruteForce, stats))
}

/// Starting point for the net search: match `y` against the first column of
/// `X` in both orientations and refit all coefficients on the better match.
pub fn warm_start(design: &Design, y: &DVector<f64>) -> Result<(Permutation, Fit)> {
    check_response(design, y)?;
    let col: Vec<f64> = design.x().column(0).iter().copied().collect();
    let neg: Vec<f64> = col.iter().map(|v| -v).collect();
    let plus = sort_assign(y.as_slice(), &col)?.perm;
    let minus = sort_assign(y.as_slice(), &neg)?.perm;
    let fit_plus = design.refit(&plus, y)?;
    let fit_minus = design.refit(&minus, y)?;
    Ok(better((plus, fit_plus), (minus, fit_minus)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NetCenter {
    /// The warm-start refit, see [`warm_start`].
    #[default]
    WarmStart,
    /// The true coefficient vector; only available when solving a generated instance.
    Truth,
    Fixed(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetSearchOptions {
    pub center: NetCenter,
    /// Defaults to `3 ‖center‖` (or 1 when the center is zero).
    pub radius: Option<f64>,
    /// Defaults to the resolution whose cardinality bound equals `budget`.
    pub delta: Option<f64>,
    pub budget: u64,
    /// Run alternating minimization from the net winner. The residual can
    /// only decrease, so the net guarantee is kept.
    pub polish: bool,
}

impl Default for NetSearchOptions {
    fn default() -> Self {
        NetSearchOptions {
            center: NetCenter::WarmStart,
            radius: None,
            delta: None,
            budget: DEFAULT_NET_BUDGET,
            polish: false,
        }
    }
}

impl NetSearchOptions {
    /// Concrete net for this design and response.
    pub fn resolve(&self, design: &Design, y: &DVector<f64>, truth: Option<&[f64]>) -> Result<NetSpec> {
        let center = match &self.center {
            NetCenter::WarmStart => warm_start(design, y)?.1.beta.iter().copied().collect(),
            NetCenter::Truth => truth
                .ok_or_else(|| {
                    Error::InvalidArgument("net centered at the truth needs the true β".into())
                })?
                .to_vec(),
            NetCenter::Fixed(c) => c.clone(),
        };
        if center.len() != design.d() {
            return Err(Error::Dimension(format!(
                "net center has dimension {}, design has {} columns",
                center.len(),
                design.d()
            )));
        }
        let radius = match self.radius {
            Some(r) => r,
            None => {
                let norm = center.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    3.0 * norm
                } else {
                    1.0
                }
            }
        };
        let spec = match self.delta {
            Some(delta) => NetSpec::new(center, radius, delta)?,
            None => NetSpec::with_budget(center, radius, self.budget)?,
        };
        spec.check_budget(self.budget)?;
        Ok(spec)
    }
}

fn matvec(x: &DMatrix<f64>, beta: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (j, &b) in beta.iter().enumerate() {
        for (o, &xij) in out.iter_mut().zip(x.column(j).iter()) {
            *o += xij * b;
        }
    }
}

/// δ-net search: for each net point `β`, the best permutation is found by
/// sorting `y` against `Xβ`; the best net point's permutation is refitted.
///
/// Net points are scored in parallel. The winner is the smallest assignment
/// residual, with exact ties going to the lexicographically smaller
/// permutation, so the result does not depend on scheduling.
pub fn solve_net_search(x: &DMatrix<f64>, y: &DVector<f64>, net: &NetSpec, budget: u64) -> Result<Estimate> {
    let design = Design::new(x.clone())?;
    solve_net_search_with(&design, y, net, budget)
}

pub fn solve_net_search_with(design: &Design, y: &DVector<f64>, net: &NetSpec, budget: u64) -> Result<Estimate> {
    check_response(design, y)?;
    net.validate()?;
    if net.dim() != design.d() {
        return Err(Error::Dimension(format!(
            "net has dimension {}, design has {} columns",
            net.dim(),
            design.d()
        )));
    }
    net.check_budget(budget)?;
    let d = design.d();
    let n = design.n();
    let points = net.points();
    let sorted_y = SortedResponse::new(y.as_slice());
    let x = design.x();

    let costs: Vec<f64> = points
        .par_chunks(d)
        .map_init(
            || vec![0.0; n],
            |z, beta| {
                matvec(x, beta, z);
                sorted_y.assignment_cost(z)
            },
        )
        .collect();
    let min_cost = costs.iter().copied().fold(f64::INFINITY, f64::min);

    let mut z = vec![0.0; n];
    let mut winner: Option<Assignment> = None;
    for (beta, _) in points.chunks(d).zip(&costs).filter(|(_, &c)| c == min_cost) {
        matvec(x, beta, &mut z);
        let a = sort_assign(y.as_slice(), &z)?;
        winner = match winner {
            Some(w) if w.perm <= a.perm => Some(w),
            _ => Some(a),
        };
    }
    let winner = winner.ok_or_else(|| Error::Invariant("net search scored no points".into()))?;
    let fit = design.refit(&winner.perm, y)?;
    let stats = SolverStats {
        candidates: costs.len() as u64,
        iterations: 1,
        degenerate_ties: winner.degenerate_ties || sorted_y.has_ties(),
        net: Some(NetStats {
            center: net.center.clone(),
            radius: net.radius,
            delta: net.delta,
            cardinality_bound: net.cardinality_bound(),
            points: costs.len() as u64,
            net_objective: min_cost,
        }),
        residual_trace: Vec::new(),
    };
    Ok(Estimate::new(winner.perm, fit, SolverKind::NetSearch, stats))
}

/// Alternating minimization: refit `β` for the current permutation, then
/// re-match by sorting `y` against `Xβ`, until the permutation stops
/// changing, the residual stops decreasing, or `max_iters` updates.
pub fn solve_alt_min(x: &DMatrix<f64>, y: &DVector<f64>, init: &Permutation, max_iters: u32) -> Result<Estimate> {
    let design = Design::new(x.clone())?;
    solve_alt_min_with(&design, y, init, max_iters)
}

pub fn solve_alt_min_with(design: &Design, y: &DVector<f64>, init: &Permutation, max_iters: u32) -> Result<Estimate> {
    if max_iters == 0 {
        return Err(Error::InvalidArgument("alternating minimization needs max_iters >= 1".into()));
    }
    check_response(design, y)?;
    if init.len() != design.n() {
        return Err(Error::Dimension(format!(
            "initial permutation has size {}, expected {}",
            init.len(),
            design.n()
        )));
    }
    let mut pi = init.clone();
    let mut fit = design.refit(&pi, y)?;
    let mut trace = vec![fit.residual_sq];
    let mut ties = false;
    let mut iterations = 0;
    let mut z = vec![0.0; design.n()];
    while iterations < max_iters {
        iterations += 1;
        matvec(design.x(), fit.beta.as_slice(), &mut z);
        let next = sort_assign(y.as_slice(), &z)?;
        ties |= next.degenerate_ties;
        if next.perm == pi {
            break;
        }
        let next_fit = design.refit(&next.perm, y)?;
        if next_fit.residual_sq >= fit.residual_sq {
            break;
        }
        pi = next.perm;
        fit = next_fit;
        trace.push(fit.residual_sq);
    }
    let stats = SolverStats {
        candidates: trace.len() as u64,
        iterations,
        degenerate_ties: ties,
        net: None,
        residual_trace: trace,
    };
    Ok(Estimate::new(pi, fit, SolverKind::AltMin, stats))
}

fn polish(design: &Design, y: &DVector<f64>, est: Estimate) -> Result<Estimate> {
    let alt = solve_alt_min_with(design, y, &est.pi_hat, DEFAULT_ALT_MIN_ITERS)?;
    if alt.residual_sq < est.residual_sq {
        let mut stats = est.stats;
        stats.iterations += alt.stats.iterations;
        stats.candidates += alt.stats.candidates;
        stats.residual_trace = alt.stats.residual_trace;
        let fit = Fit {
            beta: DVector::from_vec(alt.beta_hat),
            residual_sq: alt.residual_sq,
            qap_objective: alt.qap_objective,
        };
        Ok(Estimate::new(alt.pi_hat, fit, SolverKind::NetSearch, stats))
    } else {
        Ok(est)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AltMinInit {
    #[default]
    WarmStart,
    Identity,
}

fn default_cap() -> usize {
    DEFAULT_BRUTE_FORCE_CAP
}

fn default_alt_iters() -> u32 {
    DEFAULT_ALT_MIN_ITERS
}

/// Solver choice with its parameters, as used by the sweep harness and CLI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SolverConfig {
    /// Exact solver for `d = 1`, net search otherwise.
    Auto(NetSearchOptions),
    ExactD1,
    NetSearch(NetSearchOptions),
    BruteForce {
        #[serde(default = "default_cap")]
        cap: usize,
    },
    AltMin {
        #[serde(default = "default_alt_iters")]
        max_iters: u32,
        #[serde(default)]
        init: AltMinInit,
    },
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::Auto(NetSearchOptions::default())
    }
}

impl SolverConfig {
    /// The concrete solver used for dimension `d`.
    pub fn resolve(&self, d: usize) -> SolverConfig {
        match self {
            SolverConfig::Auto(_) if d == 1 => SolverConfig::ExactD1,
            SolverConfig::Auto(opts) => SolverConfig::NetSearch(opts.clone()),
            other => other.clone(),
        }
    }

    /// Solves `y ≈ ΠXβ`. `truth` is only consulted by nets centered at the truth.
    pub fn solve(&self, x: &DMatrix<f64>, y: &DVector<f64>, truth: Option<&[f64]>) -> Result<Estimate> {
        let design = Design::new(x.clone())?;
        match self.resolve(design.d()) {
            SolverConfig::ExactD1 => solve_exact_d1_with(&design, y),
            SolverConfig::NetSearch(opts) => {
                let spec = opts.resolve(&design, y, truth)?;
                let est = solve_net_search_with(&design, y, &spec, opts.budget)?;
                if opts.polish {
                    polish(&design, y, est)
                } else {
                    Ok(est)
                }
            }
            SolverConfig::BruteForce { cap } => solve_brute_force(x, y, cap),
            SolverConfig::AltMin { max_iters, init } => {
                let start = match init {
                    AltMinInit::Identity => Permutation::identity(design.n()),
                    AltMinInit::WarmStart => warm_start(&design, y)?.0,
                };
                solve_alt_min_with(&design, y, &start, max_iters)
            }
            SolverConfig::Auto(_) => unreachable!("resolved above"),
        }
    }

    /// Rough cost of one solve in sort-sized units (`n log n` each).
    pub fn work_units(&self, n: usize, d: usize) -> f64 {
        let sort = n as f64 * (n.max(2) as f64).log2();
        match self.resolve(d) {
            SolverConfig::ExactD1 => 2.0 * sort,
            SolverConfig::NetSearch(opts) => opts.budget as f64 * (sort + (n * d) as f64),
            SolverConfig::BruteForce { .. } => {
                (1..=n).map(|k| k as f64).product::<f64>() * (n * d) as f64
            }
            SolverConfig::AltMin { max_iters, .. } => max_iters as f64 * (sort + (n * d) as f64),
            SolverConfig::Auto(_) => unreachable!("resolved above"),
        }
    }
}
