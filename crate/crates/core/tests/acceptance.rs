//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use num_bigint::BigUint;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use shufreg::estimators::{
    residual_and_objective, solve_brute_force, solve_exact_d1, solve_net_search, Design, NetSpec, SolverConfig,
};
use shufreg::mc::{
    estimate_transition, monotonicity_violations, run_grid, trials_csv, ExperimentGrid, GridSummary, Metric,
};
use shufreg::model::{generate, ModelConfig, Snr};
use shufreg::perm::{count_with_fixed_points, factorial, lexicographic, sample_uniform, Permutation};
use shufreg::seed::{derive_seed, rng_from_seed};
use shufreg::theory::{ln_pk_qk, mgf_closed_form, pkqk_lower_bound_check, MgfParams};

type Outcome = Result<String, String>;

fn gaussian_vec(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

// Monte Carlo estimate of E exp(-t‖Xβ* - ΠXβ‖²) with its standard error.
fn mgf_monte_carlo(rng: &mut impl Rng, pi: &Permutation, params: &MgfParams, samples: usize) -> (f64, f64) {
    let n = pi.len();
    let d = params.beta.len();
    let mut x = vec![0.0; n * d];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        for v in x.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let row = |i: usize, b: &[f64]| -> f64 { (0..d).map(|j| x[i * d + j] * b[j]).sum() };
        let q: f64 = (0..n)
            .map(|i| {
                let r = row(i, &params.beta_star) - row(pi.get(i), &params.beta);
                r * r
            })
            .sum();
        let s = (-params.t * q).exp();
        sum += s;
        sum_sq += s * s;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = (sum_sq / m - mean * mean).max(0.0) * m / (m - 1.0);
    (mean, (var / m).sqrt())
}

fn criterion_1() -> Outcome {
    const CONFIGS: u64 = 200;
    const SAMPLES: usize = 100_000;
    let within: Vec<bool> = (0..CONFIGS)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_from_seed(derive_seed(1, &[c]));
            let n = rng.random_range(1..=6);
            let d = rng.random_range(1..=3);
            let pi = sample_uniform(n, &mut rng);
            let beta_star = gaussian_vec(&mut rng, d);
            let beta = gaussian_vec(&mut rng, d);
            let scaled: f64 = 10f64.powf(rng.random_range(-1.0..=1.0));
            let t = scaled / norm_sq(&beta_star);
            let params = MgfParams::new(t, beta_star, beta).expect("valid params");
            let exact = mgf_closed_form(&pi.cycle_type(), &params).expect("closed form").value;
            let (est, se) = mgf_monte_carlo(&mut rng, &pi, &params, SAMPLES);
            (exact - est).abs() <= 3.0 * se + 1e-12 * exact
        })
        .collect();
    let hits = within.iter().filter(|&&w| w).count();
    let line = format!("{hits}/{CONFIGS} configurations within 3 SE (need >= 195)");
    if hits >= 195 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn criterion_2() -> Outcome {
    let regimes = [
        Snr::Exponent(0.0),
        Snr::Exponent(1.0),
        Snr::Exponent(2.0),
        Snr::Exponent(4.0),
        Snr::Noiseless,
    ];
    let mut worst = 0.0f64;
    for i in 0..100u64 {
        let n = 3 + (i % 5) as usize;
        let snr = regimes[(i as usize / 5) % regimes.len()];
        let inst = generate(&ModelConfig::new(n, 1, snr), derive_seed(2, &[i])).map_err(|e| e.to_string())?;
        let fast = solve_exact_d1(&inst.x, &inst.y).map_err(|e| e.to_string())?;
        let brute = solve_brute_force(&inst.x, &inst.y, 8).map_err(|e| e.to_string())?;
        worst = worst.max((fast.residual_sq - brute.residual_sq).abs());
    }
    let line = format!("max |exact_d1 - brute_force| residual gap {worst:.3e} over 100 instances");
    if worst <= 1e-9 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn criterion_3() -> Outcome {
    let mut worst_margin = f64::NEG_INFINITY;
    for i in 0..50u64 {
        let n = 3 + (i % 4) as usize;
        let snr = Snr::Exponent([0.5, 1.0, 2.0, 3.0, 4.0][(i % 5) as usize]);
        let inst = generate(&ModelConfig::new(n, 2, snr), derive_seed(3, &[i])).map_err(|e| e.to_string())?;
        let brute = solve_brute_force(&inst.x, &inst.y, 8).map_err(|e| e.to_string())?;
        // A ball around the origin that contains the brute-force fit.
        let radius = 1.25 * norm_sq(&brute.beta_hat).sqrt().max(0.2);
        let delta = radius / 6.0;
        let net = NetSpec::new(vec![0.0, 0.0], radius, delta).map_err(|e| e.to_string())?;
        let est = solve_net_search(&inst.x, &inst.y, &net, 1_000_000).map_err(|e| e.to_string())?;
        let op = Design::new(inst.x.clone()).map_err(|e| e.to_string())?.op_norm();
        let slack = op * op * delta * delta;
        worst_margin = worst_margin.max(est.residual_sq - brute.residual_sq - slack);
    }
    let line = format!("max (net - brute - ‖X‖²δ²) = {worst_margin:.3e} over 50 instances");
    if worst_margin <= 1e-9 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn criterion_4() -> Outcome {
    let mut worst_rel = 0.0f64;
    for i in 0..1000u64 {
        let mut rng = rng_from_seed(derive_seed(4, &[i]));
        let n = rng.random_range(2..=40);
        let d = rng.random_range(1..=n.min(5));
        let snr = Snr::Exponent(rng.random_range(0.0..5.0));
        let inst = generate(&ModelConfig::new(n, d, snr), rng.random()).map_err(|e| e.to_string())?;
        let pi = sample_uniform(n, &mut rng);
        let (res, obj) = residual_and_objective(&inst.x, &pi, &inst.y).map_err(|e| e.to_string())?;
        let y2 = inst.y.norm_squared();
        worst_rel = worst_rel.max((res + obj - y2).abs() / y2);
    }
    let mut mismatches = 0;
    for i in 0..20u64 {
        let n = 3 + (i % 4) as usize;
        let d = 1 + (i % 2) as usize;
        let inst = generate(&ModelConfig::new(n, d, Snr::Exponent(1.0)), derive_seed(41, &[i]))
            .map_err(|e| e.to_string())?;
        let scores: Vec<(Permutation, f64, f64)> = lexicographic(n)
            .map(|p| {
                let (r, o) = residual_and_objective(&inst.x, &p, &inst.y).expect("valid sizes");
                (p, r, o)
            })
            .collect();
        let argmin = scores.iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty");
        let argmax = scores.iter().max_by(|a, b| a.2.total_cmp(&b.2)).expect("non-empty");
        let tol = 1e-9 * inst.y.norm_squared();
        let same = argmin.0 == argmax.0 || ((argmin.2 - argmax.2).abs() <= tol && (argmin.1 - argmax.1).abs() <= tol);
        if !same {
            mismatches += 1;
        }
    }
    let line = format!("max relative Pythagoras error {worst_rel:.3e} on 1000 pairs; {mismatches}/20 argmin/argmax mismatches");
    if worst_rel <= 1e-8 && mismatches == 0 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn criterion_5() -> Outcome {
    let mut rng = rng_from_seed(5);
    let mut violations = 0;
    let mut min_gap = f64::INFINITY;
    for _ in 0..1000 {
        let d = rng.random_range(1..=5);
        let k = rng.random_range(2..=10);
        let beta_star = gaussian_vec(&mut rng, d);
        let beta: Vec<f64> = gaussian_vec(&mut rng, d)
            .into_iter()
            .map(|v| v * 10f64.powf(rng.random_range(-2.0..1.0)))
            .collect();
        let s = 10f64.powf(rng.random_range(1.0..3.0));
        let t = s * s / (2.0 * norm_sq(&beta_star));
        let params = MgfParams::new(t, beta_star, beta).map_err(|e| e.to_string())?;
        let w = pkqk_lower_bound_check(k, &params).map_err(|e| e.to_string())?;
        debug_assert_eq!(w.log_lhs, ln_pk_qk(k, &params).expect("valid k"));
        min_gap = min_gap.min(w.log_lhs - w.log_rhs);
        if !w.holds {
            violations += 1;
        }
    }
    let line = format!("{violations} violations in 1000 draws; min log margin {min_gap:.3}");
    if violations == 0 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn transition_grid() -> ExperimentGrid {
    let exponents = (0..=10).map(|i| 1.0 + 0.5 * i as f64).collect();
    let mut grid = ExperimentGrid::new(vec![100], vec![1], exponents, 200);
    grid.solver = SolverConfig::ExactD1;
    grid.master_seed = 20_240_601;
    grid
}

fn rate(summary: &GridSummary, exponent: f64, metric: Metric) -> f64 {
    let c = summary.cell(100, 1, exponent).expect("cell in grid");
    match metric {
        Metric::RecoveryRate => c.recovery_rate,
        Metric::MeanOverlap => c.mean_overlap,
    }
}

fn criterion_6(summary: &GridSummary) -> Outcome {
    let hi = rate(summary, 5.5, Metric::RecoveryRate);
    let lo = rate(summary, 2.5, Metric::RecoveryRate);
    let crossing = estimate_transition(summary, 0.5, Metric::RecoveryRate)[0].crossing.map(|c| c.exponent);
    let violations = monotonicity_violations(summary, Metric::RecoveryRate, 2.0).len();
    let line = format!(
        "rate(5.5)={hi:.3} rate(2.5)={lo:.3} crossing={} monotonicity violations={violations}",
        crossing.map_or("none".to_string(), |c| format!("{c:.3}"))
    );
    let ok = hi >= 0.9 && lo <= 0.1 && crossing.is_some_and(|c| (3.0..=5.0).contains(&c)) && violations == 0;
    if ok {
        Ok(line)
    } else {
        Err(line)
    }
}

fn criterion_7(summary: &GridSummary) -> Outcome {
    let at3 = rate(summary, 3.0, Metric::MeanOverlap);
    let at1 = rate(summary, 1.0, Metric::MeanOverlap);
    let violations = monotonicity_violations(summary, Metric::MeanOverlap, 2.0).len();
    let line = format!("overlap(3)={at3:.3} overlap(1)={at1:.3} monotonicity violations={violations}");
    if at3 >= 0.9 && at1 <= 0.5 && violations == 0 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn criterion_8(first_csv: &str) -> Outcome {
    let grid = transition_grid();
    let (again, _) = run_grid(&grid).map_err(|e| e.to_string())?;
    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| e.to_string())?
        .install(|| run_grid(&grid))
        .map_err(|e| e.to_string())?
        .0;
    let dir = std::env::temp_dir().join(format!("shufreg-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let path = dir.join("trials.csv");
    std::fs::write(&path, trials_csv(&again)).map_err(|e| e.to_string())?;
    let reread = std::fs::read(&path).map_err(|e| e.to_string())?;
    let _ = std::fs::remove_dir_all(&dir);
    let same_parallel = reread == first_csv.as_bytes();
    let same_serial = trials_csv(&serial).as_bytes() == first_csv.as_bytes();
    let line = format!(
        "{} bytes; rerun identical={same_parallel}, single-thread identical={same_serial}",
        first_csv.len()
    );
    if same_parallel && same_serial {
        Ok(line)
    } else {
        Err(line)
    }
}

fn criterion_9() -> Outcome {
    for n in 1..=10usize {
        let total: BigUint = (0..=n)
            .filter(|&n1| n1 + 1 != n)
            .map(|n1| count_with_fixed_points(n, n1).expect("valid n1"))
            .sum();
        if total != factorial(n) {
            return Err(format!("sum for n={n} is {total}, expected {}", factorial(n)));
        }
    }
    Ok("Σ count_with_fixed_points(n, n1) = n! for n = 1..=10".to_string())
}

fn report(id: u32, started: Instant, outcome: Outcome) -> bool {
    let secs = started.elapsed().as_secs_f64();
    match outcome {
        Ok(msg) => {
            println!("criterion {id}: PASS ({secs:.1}s) {msg}");
            true
        }
        Err(msg) => {
            println!("criterion {id}: FAIL ({secs:.1}s) {msg}");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut ok = true;

    let s = Instant::now();
    ok &= report(1, s, criterion_1());
    let s = Instant::now();
    ok &= report(2, s, criterion_2());
    let s = Instant::now();
    ok &= report(3, s, criterion_3());
    let s = Instant::now();
    ok &= report(4, s, criterion_4());
    let s = Instant::now();
    ok &= report(5, s, criterion_5());

    let s = Instant::now();
    let sweep = run_grid(&transition_grid());
    let (records, summary) = match sweep {
        Ok(r) => r,
        Err(e) => {
            for id in 6..=8 {
                report(id, s, Err(format!("sweep failed: {e}")));
            }
            return ExitCode::FAILURE;
        }
    };
    ok &= report(6, s, criterion_6(&summary));
    let s = Instant::now();
    ok &= report(7, s, criterion_7(&summary));
    let s = Instant::now();
    ok &= report(8, s, criterion_8(&trials_csv(&records)));
    let s = Instant::now();
    ok &= report(9, s, criterion_9());

    if ok {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
