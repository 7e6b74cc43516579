use std::process::ExitCode;

use rand::Rng;
use serde::Serialize;
use shufreg::estimators::{
    residual_and_objective, solve_alt_min, solve_brute_force, solve_exact_d1, solve_net_search, Design, NetSpec,
};
use shufreg::mc::format_g17;
use shufreg::model::{generate, ModelConfig, Snr};
use shufreg::perm::{sample_uniform, CycleType, Permutation};
use shufreg::seed::{derive_seed, rng_from_seed};
use shufreg::theory::{
    cycle_types, mgf_closed_form, mgf_upper_bound, threshold_snr, BoundConstants, MgfParams, RecoveryMode,
    ThresholdQuery,
};
use shufreg::Error;

use crate::{MgfArgs, ModeName, OracleArgs, TheoryArgs, ThresholdArgs};

fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() {
        v.into()
    } else {
        serde_json::Value::Null
    }
}

pub fn mgf(a: MgfArgs) -> Result<ExitCode, Error> {
    let ct: CycleType = a.cycle_type.parse()?;
    let params = MgfParams::new(a.t, a.beta_star, a.beta)?;
    let value = mgf_closed_form(&ct, &params)?;
    let (p, q) = params.pq();
    let consts = BoundConstants {
        c0: a.c0,
        big_c0: a.big_c0,
    };
    let (fc, n1) = match mgf_upper_bound(&ct, &params, consts) {
        Ok(b) => (finite_or_null(b.log_bound_fc), finite_or_null(b.log_bound_n1)),
        Err(Error::Domain(_)) => (serde_json::Value::Null, serde_json::Value::Null),
        Err(e) => return Err(e),
    };
    let doc = serde_json::json!({
        "cycle_type": ct.to_string(),
        "n": ct.n(),
        "t": a.t,
        "p": p,
        "q": q,
        "value": value.value,
        "value_log": finite_or_null(value.log_value),
        "bound_fc_log": fc,
        "bound_n1_log": n1,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(ExitCode::SUCCESS)
}

pub fn theory(a: TheoryArgs) -> Result<ExitCode, Error> {
    let consts = BoundConstants {
        c0: a.c0,
        big_c0: a.big_c0,
    };
    let mut out = String::from("n,cycle_type,t,value_log,bound_log\n");
    for &n in &a.n {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be >= 1".into()));
        }
        for &t in &a.t {
            let params = MgfParams::new(t, a.beta_star.clone(), a.beta.clone())?;
            for ct in cycle_types(n) {
                let value = mgf_closed_form(&ct, &params)?;
                let bound = match mgf_upper_bound(&ct, &params, consts) {
                    Ok(b) => b.log_bound_fc,
                    Err(Error::Domain(_)) => f64::NAN,
                    Err(e) => return Err(e),
                };
                out.push_str(&format!(
                    "{n},\"{ct}\",{},{},{}\n",
                    format_g17(t),
                    format_g17(value.log_value),
                    format_g17(bound)
                ));
            }
        }
    }
    print!("{out}");
    Ok(ExitCode::SUCCESS)
}

pub fn thresholds(a: ThresholdArgs) -> Result<ExitCode, Error> {
    let modes: &[(RecoveryMode, &str)] = match a.mode {
        ModeName::Exact => &[(RecoveryMode::Exact, "exact")],
        ModeName::AlmostExact => &[(RecoveryMode::AlmostExact, "almost-exact")],
        ModeName::Both => &[(RecoveryMode::Exact, "exact"), (RecoveryMode::AlmostExact, "almost-exact")],
    };
    let mut rows = Vec::new();
    for &n in &a.n {
        for &(mode, name) in modes {
            let snr = threshold_snr(&ThresholdQuery {
                n,
                mode,
                epsilon: a.epsilon,
            })?;
            rows.push((n, name, mode.exponent() + a.epsilon, snr));
        }
    }
    if let [(_, _, _, snr)] = rows.as_slice() {
        println!("{}", format_g17(*snr));
    } else {
        println!("n,mode,exponent,snr");
        for (n, name, exponent, snr) in rows {
            println!("{n},{name},{},{}", format_g17(exponent), format_g17(snr));
        }
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    cases: usize,
    failures: usize,
    max_violation: f64,
}

impl Check {
    fn new(name: &'static str) -> Self {
        Check {
            name,
            cases: 0,
            failures: 0,
            max_violation: 0.0,
        }
    }

    /// `violation` is positive when the check fails.
    fn record(&mut self, violation: f64) {
        self.cases += 1;
        self.max_violation = self.max_violation.max(violation);
        if violation > 0.0 || violation.is_nan() {
            self.failures += 1;
        }
    }
}

#[derive(Debug, Serialize)]
struct OracleReport {
    seed: u64,
    n_max: usize,
    trials: usize,
    passed: bool,
    checks: Vec<Check>,
}

pub fn oracle_check(a: OracleArgs) -> Result<ExitCode, Error> {
    if !(3..=9).contains(&a.n_max) || a.trials == 0 {
        return Err(Error::InvalidArgument(format!(
            "need 3 <= --n-max <= 9 and --trials >= 1, got n_max={}, trials={}",
            a.n_max, a.trials
        )));
    }
    let mut exact = Check::new("exact_d1_matches_brute_force");
    let mut altmin = Check::new("alt_min_not_below_brute_force");
    let mut pythagoras = Check::new("residual_plus_objective_is_norm");
    let mut net = Check::new("net_search_within_discretization_slack");
    for trial in 0..a.trials {
        let mut rng = rng_from_seed(derive_seed(a.seed, &[trial as u64]));
        let n = rng.random_range(3..=a.n_max);
        let snr = Snr::Exponent(rng.random_range(0.0..5.0));
        let inst = generate(&ModelConfig::new(n, 1, snr), rng.random())?;
        let brute = solve_brute_force(&inst.x, &inst.y, a.n_max)?;
        let fast = solve_exact_d1(&inst.x, &inst.y)?;
        let scale = inst.y.norm_squared().max(1.0);
        exact.record((fast.residual_sq - brute.residual_sq).abs() - 1e-9 * scale);
        let start = Permutation::identity(n);
        let alt = solve_alt_min(&inst.x, &inst.y, &start, 100)?;
        altmin.record(brute.residual_sq - alt.residual_sq - 1e-9 * scale);
        let pi = sample_uniform(n, &mut rng);
        let (res, obj) = residual_and_objective(&inst.x, &pi, &inst.y)?;
        pythagoras.record((res + obj - inst.y.norm_squared()).abs() - 1e-8 * scale);

        let n2 = rng.random_range(3..=a.n_max.min(6));
        let inst = generate(&ModelConfig::new(n2, 2, snr), rng.random())?;
        let brute = solve_brute_force(&inst.x, &inst.y, a.n_max)?;
        let radius = 1.25 * brute.beta_hat.iter().map(|b| b * b).sum::<f64>().sqrt().max(0.2);
        let delta = radius / 6.0;
        let spec = NetSpec::new(vec![0.0; 2], radius, delta)?;
        let est = solve_net_search(&inst.x, &inst.y, &spec, 1_000_000)?;
        let op = Design::new(inst.x.clone())?.op_norm();
        net.record(est.residual_sq - brute.residual_sq - op * op * delta * delta - 1e-9 * scale);
    }
    let checks = vec![exact, altmin, pythagoras, net];
    let passed = checks.iter().all(|c| c.failures == 0);
    let report = OracleReport {
        seed: a.seed,
        n_max: a.n_max,
        trials: a.trials,
        passed,
        checks,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    if passed {
        Ok(ExitCode::SUCCESS)
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| c.failures > 0).map(|c| c.name).collect();
        crate::emit_error("invariant", &format!("oracle checks failed: {}", failed.join(", ")));
        Ok(ExitCode::from(1))
    }
}
