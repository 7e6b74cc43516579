use std::process::ExitCode;

use shufreg::estimators::{AltMinInit, NetCenter, NetSearchOptions, SolverConfig};
use shufreg::model::{generate, BetaDirection, Instance, ModelConfig, Snr};
use shufreg::perm::overlap;
use shufreg::Error;

use crate::{SolveArgs, SolverName};

fn solver_config(a: &SolveArgs) -> SolverConfig {
    let net = NetSearchOptions {
        center: if a.net_center_truth {
            NetCenter::Truth
        } else {
            NetCenter::WarmStart
        },
        radius: a.net_radius,
        delta: a.net_delta,
        budget: a.net_budget,
        polish: a.net_polish,
    };
    match a.solver {
        SolverName::Auto => SolverConfig::Auto(net),
        SolverName::ExactD1 => SolverConfig::ExactD1,
        SolverName::NetSearch => SolverConfig::NetSearch(net),
        SolverName::BruteForce => SolverConfig::BruteForce { cap: a.bf_cap },
        SolverName::AltMin => SolverConfig::AltMin {
            max_iters: a.max_iters,
            init: if a.identity_init {
                AltMinInit::Identity
            } else {
                AltMinInit::WarmStart
            },
        },
    }
}

fn snr_from_flags(a: &SolveArgs) -> Result<Snr, Error> {
    match (a.snr_exp, a.snr, a.sigma) {
        (Some(c), None, None) => Ok(Snr::Exponent(c)),
        (None, Some(v), None) => Ok(Snr::Value(v)),
        (None, None, Some(0.0)) => Ok(Snr::Noiseless),
        (None, None, Some(s)) if s > 0.0 && s.is_finite() => Ok(Snr::Value(a.beta_norm * a.beta_norm / (s * s))),
        (None, None, Some(s)) => Err(Error::InvalidArgument(format!("--sigma must be >= 0, got {s}"))),
        _ => Err(Error::InvalidArgument(
            "exactly one of --snr-exp, --snr or --sigma is required".into(),
        )),
    }
}

fn load_or_generate(a: &SolveArgs) -> Result<Instance, Error> {
    if let Some(path) = &a.instance {
        return Instance::from_json(&std::fs::read_to_string(path)?);
    }
    let n = a
        .n
        .ok_or_else(|| Error::InvalidArgument("either --instance or --n is required".into()))?;
    let mut config = ModelConfig::new(n, a.d, snr_from_flags(a)?);
    config.beta_norm = a.beta_norm;
    if a.random_direction {
        config.beta_direction = BetaDirection::UniformRandomSphere;
    }
    generate(&config, a.seed)
}

pub fn run(a: SolveArgs) -> Result<ExitCode, Error> {
    let inst = load_or_generate(&a)?;
    if let Some(path) = &a.save_instance {
        std::fs::write(path, inst.to_json()? + "\n")?;
    }
    let est = solver_config(&a).solve(&inst.x, &inst.y, Some(inst.beta_star.as_slice()))?;
    let exact = est.pi_hat == inst.pi_star;
    let ov = overlap(&est.pi_hat, &inst.pi_star)?;
    let mut doc = serde_json::to_value(&est)?;
    let obj = doc.as_object_mut().expect("estimate serializes to an object");
    obj.insert("exact".into(), exact.into());
    obj.insert("overlap".into(), ov.into());
    obj.insert("n".into(), inst.n().into());
    obj.insert("d".into(), inst.d().into());
    let snr = inst.snr();
    obj.insert("snr".into(), if snr.is_finite() { snr.into() } else { "inf".into() });
    obj.insert("sigma".into(), inst.sigma.into());
    obj.insert("seed".into(), inst.seed.into());
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(ExitCode::SUCCESS)
}
