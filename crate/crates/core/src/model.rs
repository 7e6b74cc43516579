//! Random instances of the shuffled regression model `y = Π* X β* + w`.
//!
//! Gaussian draws use the ziggurat sampler of `rand_distr` (pinned version)
//! on top of a `ChaCha8Rng`, consumed in a fixed order: the entries of `X`
//! row by row, then the direction of `β*` when it is random, then the
//! shuffle for `Π*`, then the noise vector. Equal `(config, seed)` therefore
//! give bit-identical instances.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::{sample_uniform, Permutation};
use crate::seed::rng_from_seed;

/// Signal-to-noise ratio `‖β*‖² / σ²`, given directly, as an exponent of `n`,
/// or as the noiseless sentinel (`σ = 0`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Snr {
    Value(f64),
    Exponent(f64),
    Noiseless,
}

impl Snr {
    /// Resolved SNR for sample size `n`; `+∞` for the noiseless sentinel.
    pub fn resolve(&self, n: usize) -> Result<f64> {
        let snr = match *self {
            Snr::Value(v) => v,
            Snr::Exponent(c) => {
                if !c.is_finite() {
                    return Err(Error::InvalidArgument(format!("SNR exponent {c} is not finite")));
                }
                (n as f64).powf(c)
            }
            Snr::Noiseless => return Ok(f64::INFINITY),
        };
        if !(snr > 0.0) {
            return Err(Error::InvalidArgument(format!("SNR must be positive, got {snr}")));
        }
        Ok(snr)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BetaDirection {
    #[default]
    FixedFirstAxis,
    UniformRandomSphere,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PiLaw {
    #[default]
    Uniform,
    Identity,
    Fixed(Permutation),
}

fn default_beta_norm() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n: usize,
    pub d: usize,
    pub snr: Snr,
    #[serde(default = "default_beta_norm")]
    pub beta_norm: f64,
    #[serde(default)]
    pub beta_direction: BetaDirection,
    #[serde(default)]
    pub pi_law: PiLaw,
}

impl ModelConfig {
    pub fn new(n: usize, d: usize, snr: Snr) -> Self {
        ModelConfig {
            n,
            d,
            snr,
            beta_norm: 1.0,
            beta_direction: BetaDirection::default(),
            pi_law: PiLaw::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::InvalidArgument(format!(
                "n and d must be positive, got n={}, d={}",
                self.n, self.d
            )));
        }
        if self.d > self.n {
            return Err(Error::Dimension(format!(
                "d={} exceeds n={}; least squares needs d <= n",
                self.d, self.n
            )));
        }
        if !(self.beta_norm.is_finite() && self.beta_norm >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "beta_norm must be finite and non-negative, got {}",
                self.beta_norm
            )));
        }
        if let PiLaw::Fixed(p) = &self.pi_law {
            if p.len() != self.n {
                return Err(Error::Dimension(format!(
                    "fixed permutation has size {}, expected n={}",
                    p.len(),
                    self.n
                )));
            }
        }
        self.snr.resolve(self.n)?;
        Ok(())
    }

    /// Noise level `σ = ‖β*‖ / √SNR`; zero in noiseless mode.
    pub fn sigma(&self) -> Result<f64> {
        let snr = self.snr.resolve(self.n)?;
        Ok(if snr.is_infinite() {
            0.0
        } else {
            self.beta_norm / snr.sqrt()
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub x: DMatrix<f64>,
    pub beta_star: DVector<f64>,
    pub pi_star: Permutation,
    pub sigma: f64,
    pub w: DVector<f64>,
    pub y: DVector<f64>,
    pub seed: u64,
}

impl Instance {
    /// Assembles an instance from its parts, computing `y = Π*(Xβ*) + w`.
    pub fn from_parts(
        x: DMatrix<f64>,
        beta_star: DVector<f64>,
        pi_star: Permutation,
        sigma: f64,
        w: DVector<f64>,
        seed: u64,
    ) -> Result<Self> {
        let (n, d) = x.shape();
        if beta_star.len() != d || w.len() != n || pi_star.len() != n {
            return Err(Error::Dimension(format!(
                "inconsistent parts: X is {n}x{d}, beta* has {}, w has {}, pi* has {}",
                beta_star.len(),
                w.len(),
                pi_star.len()
            )));
        }
        if d > n {
            return Err(Error::Dimension(format!("d={d} exceeds n={n}")));
        }
        if !(sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
        }
        let signal = &x * &beta_star;
        let shuffled = pi_star.apply(signal.as_slice())?;
        let y = DVector::from_vec(shuffled) + &w;
        Ok(Instance {
            x,
            beta_star,
            pi_star,
            sigma,
            w,
            y,
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// `‖β*‖² / σ²`, or `+∞` when `σ = 0`.
    pub fn snr(&self) -> f64 {
        snr_of(self.beta_star.norm(), self.sigma)
    }

    /// Largest elementwise gap between stored `y` and `Π*(Xβ*) + w`.
    pub fn reconstruction_error(&self) -> f64 {
        let signal = &self.x * &self.beta_star;
        self.pi_star
            .apply(signal.as_slice())
            .expect("sizes checked at construction")
            .iter()
            .zip(self.w.iter())
            .zip(self.y.iter())
            .map(|((s, w), y)| (s + w - y).abs())
            .fold(0.0, f64::max)
    }
}

pub fn snr_of(beta_norm: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        f64::INFINITY
    } else {
        beta_norm * beta_norm / (sigma * sigma)
    }
}

pub fn generate(config: &ModelConfig, seed: u64) -> Result<Instance> {
    config.validate()?;
    let (n, d) = (config.n, config.d);
    let sigma = config.sigma()?;
    let mut rng = rng_from_seed(seed);

    let mut entries = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        entries.push(StandardNormal.sample(&mut rng));
    }
    let x = DMatrix::from_row_slice(n, d, &entries);

    let beta_star = match config.beta_direction {
        BetaDirection::FixedFirstAxis => {
            let mut b = DVector::zeros(d);
            b[0] = config.beta_norm;
            b
        }
        BetaDirection::UniformRandomSphere => loop {
            let g: DVector<f64> = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            let norm = g.norm();
            if norm > 0.0 {
                break g * (config.beta_norm / norm);
            }
        },
    };

    let pi_star = match &config.pi_law {
        PiLaw::Uniform => sample_uniform(n, &mut rng),
        PiLaw::Identity => Permutation::identity(n),
        PiLaw::Fixed(p) => p.clone(),
    };

    let w = if sigma == 0.0 {
        DVector::zeros(n)
    } else {
        DVector::from_fn(n, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sigma * z
        })
    };

    Instance::from_parts(x, beta_star, pi_star, sigma, w, seed)
}

/// JSON form of an [`Instance`]; `x` is stored as a list of rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub sigma: f64,
    pub snr: Option<f64>,
    pub x: Vec<Vec<f64>>,
    pub beta_star: Vec<f64>,
    pub pi_star: Permutation,
    pub w: Vec<f64>,
    pub y: Vec<f64>,
}

impl From<&Instance> for InstanceDoc {
    fn from(inst: &Instance) -> Self {
        let snr = inst.snr();
        InstanceDoc {
            n: inst.n(),
            d: inst.d(),
            seed: inst.seed,
            sigma: inst.sigma,
            snr: snr.is_finite().then_some(snr),
            x: inst
                .x
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            beta_star: inst.beta_star.iter().copied().collect(),
            pi_star: inst.pi_star.clone(),
            w: inst.w.iter().copied().collect(),
            y: inst.y.iter().copied().collect(),
        }
    }
}

impl TryFrom<InstanceDoc> for Instance {
    type Error = Error;

    /// Rebuilds the instance and checks the stored `y` against its parts.
    fn try_from(doc: InstanceDoc) -> Result<Self> {
        if doc.x.len() != doc.n || doc.x.iter().any(|r| r.len() != doc.d) {
            return Err(Error::Dimension(format!(
                "x must be {}x{} rows",
                doc.n, doc.d
            )));
        }
        let flat: Vec<f64> = doc.x.iter().flatten().copied().collect();
        let x = DMatrix::from_row_slice(doc.n, doc.d, &flat);
        let inst = Instance::from_parts(
            x,
            DVector::from_vec(doc.beta_star),
            doc.pi_star,
            doc.sigma,
            DVector::from_vec(doc.w),
            doc.seed,
        )?;
        if doc.y.len() != inst.n() {
            return Err(Error::Dimension(format!(
                "y has length {}, expected {}",
                doc.y.len(),
                inst.n()
            )));
        }
        let scale = inst.y.amax().max(1.0);
        let gap = inst
            .y
            .iter()
            .zip(&doc.y)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if gap > 1e-12 * scale {
            return Err(Error::Invariant(format!(
                "stored y differs from Π*(Xβ*) + w by {gap:e}"
            )));
        }
        Ok(Instance {
            y: DVector::from_vec(doc.y),
            ..inst
        })
    }
}

impl Instance {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&InstanceDoc::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: InstanceDoc = serde_json::from_str(s)?;
        Instance::try_from(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sigma_from_snr() {
        let mut cfg = ModelConfig::new(10, 1, Snr::Value(4.0));
        assert_eq!(cfg.sigma().unwrap(), 0.5);
        cfg.snr = Snr::Exponent(2.0);
        assert!((cfg.sigma().unwrap() - 0.1).abs() < 1e-15);
        cfg.snr = Snr::Noiseless;
        assert_eq!(cfg.sigma().unwrap(), 0.0);
        cfg.snr = Snr::Value(0.0);
        assert!(matches!(cfg.sigma(), Err(Error::InvalidArgument(_))));
        cfg.snr = Snr::Value(-1.0);
        assert!(matches!(generate(&cfg, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn dimension_checks() {
        let cfg = ModelConfig::new(3, 4, Snr::Value(1.0));
        assert!(matches!(generate(&cfg, 1), Err(Error::Dimension(_))));
        let cfg = ModelConfig::new(3, 0, Snr::Value(1.0));
        assert!(matches!(generate(&cfg, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn noiseless_is_exact_shuffle() {
        let cfg = ModelConfig::new(12, 2, Snr::Noiseless);
        let inst = generate(&cfg, 3).unwrap();
        assert_eq!(inst.sigma, 0.0);
        assert!(inst.snr().is_infinite());
        let signal = &inst.x * &inst.beta_star;
        let expected = inst.pi_star.apply(signal.as_slice()).unwrap();
        assert_eq!(inst.y.as_slice(), expected.as_slice());
    }

    #[test]
    fn snr_values() {
        assert!((snr_of(1.0, 0.1) - 100.0).abs() < 1e-9);
        assert_eq!(snr_of(2.0, 1.0), 4.0);
        assert!(snr_of(1.0, 0.0).is_infinite());
    }

    #[test]
    fn design_moments() {
        let cfg = ModelConfig::new(1000, 1, Snr::Value(1.0));
        let inst = generate(&cfg, 2024).unwrap();
        let mean = inst.x.mean();
        let var = inst.x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 999.0;
        assert!(mean.abs() < 0.1, "mean {mean}");
        assert!((var - 1.0).abs() < 0.15, "var {var}");
    }

    #[test]
    fn seed_determinism() {
        let mut cfg = ModelConfig::new(20, 3, Snr::Exponent(3.0));
        cfg.beta_direction = BetaDirection::UniformRandomSphere;
        let a = generate(&cfg, 77).unwrap();
        let b = generate(&cfg, 77).unwrap();
        assert_eq!(a, b);
        let c = generate(&cfg, 78).unwrap();
        assert_ne!(a.x, c.x);
        assert!((a.beta_star.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn default_beta_is_first_axis_and_pi_laws() {
        let mut cfg = ModelConfig::new(6, 2, Snr::Value(9.0));
        cfg.beta_norm = 3.0;
        cfg.pi_law = PiLaw::Identity;
        let inst = generate(&cfg, 1).unwrap();
        assert_eq!(inst.beta_star.as_slice(), &[3.0, 0.0]);
        assert!(inst.pi_star.is_identity());
        assert!((inst.sigma - 1.0).abs() < 1e-15);

        let fixed: Permutation = "[2,1,3,4,6,5]".parse().unwrap();
        cfg.pi_law = PiLaw::Fixed(fixed.clone());
        assert_eq!(generate(&cfg, 1).unwrap().pi_star, fixed);
        cfg.pi_law = PiLaw::Fixed(Permutation::identity(3));
        assert!(matches!(generate(&cfg, 1), Err(Error::Dimension(_))));
    }

    #[test]
    fn json_round_trip_and_tamper_detection() {
        let cfg = ModelConfig::new(8, 2, Snr::Exponent(2.0));
        let inst = generate(&cfg, 5).unwrap();
        let json = inst.to_json().unwrap();
        assert_eq!(Instance::from_json(&json).unwrap(), inst);

        let mut doc: InstanceDoc = serde_json::from_str(&json).unwrap();
        doc.y[0] += 1.0;
        let tampered = serde_json::to_string(&doc).unwrap();
        assert!(matches!(Instance::from_json(&tampered), Err(Error::Invariant(_))));
    }

    #[test]
    fn config_parses_from_json() {
        let cfg: ModelConfig =
            serde_json::from_str(r#"{"n": 5, "d": 1, "snr": {"exponent": 4.0}}"#).unwrap();
        assert_eq!(cfg.beta_norm, 1.0);
        assert_eq!(cfg.beta_direction, BetaDirection::FixedFirstAxis);
        let cfg: ModelConfig =
            serde_json::from_str(r#"{"n": 5, "d": 1, "snr": "noiseless", "pi_law": {"fixed": [2,1,3,4,5]}}"#)
                .unwrap();
        assert_eq!(cfg.sigma().unwrap(), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn reconstruction_identity(seed in any::<u64>(), n in 1usize..30, d in 1usize..4, c in 0.0f64..6.0) {
            prop_assume!(d <= n);
            let cfg = ModelConfig::new(n, d, Snr::Exponent(c));
            let inst = generate(&cfg, seed).unwrap();
            prop_assert!(inst.reconstruction_error() <= 1e-12);
            prop_assert!((inst.snr() - cfg.snr.resolve(n).unwrap()).abs() <= 1e-9 * inst.snr());
        }

        #[test]
        fn snr_is_scale_invariant(b in 0.01f64..100.0, s in 0.01f64..100.0, k in 0.01f64..100.0) {
            let base = snr_of(b, s);
            prop_assert!((snr_of(k * b, k * s) - base).abs() <= 1e-9 * base);
        }
    }
}
