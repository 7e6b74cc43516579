//! Closed-form moment generating function over cycle types, its upper
//! bounds, and small analytic utilities (net cardinality, chi-square tail
//! thresholds, recovery thresholds).
//!
//! For a permutation `Π` with cycle type `{n_k}` and a standard Gaussian
//! design `X`,
//!
//! ```text
//! E exp(-t ‖Xβ* - ΠXβ‖²) = Π_k (p^k - q^k)^(-n_k)
//! p = (√(1 + 2t‖β*+β‖²) + √(1 + 2t‖β*-β‖²)) / 2
//! q = (√(1 + 2t‖β*+β‖²) - √(1 + 2t‖β*-β‖²)) / 2
//! ```
//!
//! All products are accumulated as logarithms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::CycleType;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MgfParams {
    pub t: f64,
    pub beta_star: Vec<f64>,
    pub beta: Vec<f64>,
}

/// `a = √(1 + 2t‖β*+β‖²)` and `b = √(1 + 2t‖β*-β‖²)`, so `p = (a+b)/2`, `q = (a-b)/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Roots {
    a: f64,
    b: f64,
}

impl MgfParams {
    pub fn new(t: f64, beta_star: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        let params = MgfParams { t, beta_star, beta };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::InvalidArgument(format!("t must be positive, got {}", self.t)));
        }
        if self.beta.len() != self.beta_star.len() || self.beta.is_empty() {
            return Err(Error::Dimension(format!(
                "β has dimension {}, β* has {}",
                self.beta.len(),
                self.beta_star.len()
            )));
        }
        if self.beta.iter().chain(&self.beta_star).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("β and β* must be finite".into()));
        }
        Ok(())
    }

    pub fn beta_star_norm(&self) -> f64 {
        self.beta_star.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `‖β - β*‖²`
    pub fn distance_sq(&self) -> f64 {
        self.beta
            .iter()
            .zip(&self.beta_star)
            .map(|(b, s)| (b - s).powi(2))
            .sum()
    }

    fn roots(&self) -> Roots {
        let plus: f64 = self.beta.iter().zip(&self.beta_star).map(|(b, s)| (s + b).powi(2)).sum();
        Roots {
            a: (1.0 + 2.0 * self.t * plus).sqrt(),
            b: (1.0 + 2.0 * self.t * self.distance_sq()).sqrt(),
        }
    }

    /// `(p, q)`.
    pub fn pq(&self) -> (f64, f64) {
        let Roots { a, b } = self.roots();
        (0.5 * (a + b), 0.5 * (a - b))
    }

    /// `√(2t) ‖β*‖`
    pub fn scaled_signal(&self) -> f64 {
        (2.0 * self.t).sqrt() * self.beta_star_norm()
    }
}

/// `ln(p^k - q^k)` for `k ≥ 1`.
///
/// Writes `p^k - q^k = p^k (1 - ρ^k)` with `ρ = q/p ∈ (-1, 1)` and evaluates
/// `1 - |ρ|` from the roots directly (`2b/(a+b)` or `2a/(a+b)`), so neither
/// large `p` nor `ρ` near `±1` loses precision.
fn ln_pk_minus_qk(roots: Roots, k: usize) -> f64 {
    let Roots { a, b } = roots;
    let p = 0.5 * (a + b);
    let q = 0.5 * (a - b);
    let kf = k as f64;
    let gap = if q >= 0.0 { 2.0 * b / (a + b) } else { 2.0 * a / (a + b) };
    let ln_abs_rho = (-gap).ln_1p();
    let ln_one_minus = if q >= 0.0 || k.is_multiple_of(2) {
        // 1 - |ρ|^k
        (-(kf * ln_abs_rho).exp_m1()).ln()
    } else {
        // 1 + |ρ|^k
        (kf * ln_abs_rho).exp().ln_1p()
    };
    kf * p.ln() + ln_one_minus
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MgfValue {
    pub log_value: f64,
    /// `exp(log_value)`; underflows to zero for extreme configurations.
    pub value: f64,
}

impl MgfValue {
    fn from_log(log_value: f64) -> Self {
        MgfValue {
            log_value,
            value: log_value.exp(),
        }
    }
}

/// `Π_k (p^k - q^k)^(-n_k)`.
pub fn mgf_closed_form(ct: &CycleType, params: &MgfParams) -> Result<MgfValue> {
    params.validate()?;
    let roots = params.roots();
    let log_value = -ct
        .counts()
        .iter()
        .map(|(&k, &c)| c as f64 * ln_pk_minus_qk(roots, k))
        .sum::<f64>();
    Ok(MgfValue::from_log(log_value))
}

/// `p^k - q^k` as a logarithm, for inspection and tests.
pub fn ln_pk_qk(k: usize, params: &MgfParams) -> Result<f64> {
    params.validate()?;
    if k == 0 {
        return Err(Error::InvalidArgument("cycle length must be >= 1".into()));
    }
    Ok(ln_pk_minus_qk(params.roots(), k))
}

/// Constants of the MGF upper bounds: `c0` scales `√t‖β*‖` in the bound,
/// `big_c0` is the smallest `√t‖β*‖` for which the bounds are claimed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c0: f64,
    pub big_c0: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        BoundConstants {
            c0: 1.0 / 3.0,
            big_c0: 5.0 * std::f64::consts::SQRT_2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MgfBounds {
    /// `ln[(1 + 2t‖β-β*‖²)^(-n_1/2) (c0 √t ‖β*‖)^(-(n - #cycles))]`
    pub log_bound_fc: f64,
    /// `ln[(1 + 2t‖β-β*‖²)^(-n_1/2) (c0 √t ‖β*‖)^(-(n - n_1)/2)]`
    pub log_bound_n1: f64,
}

pub fn mgf_upper_bound(ct: &CycleType, params: &MgfParams, consts: BoundConstants) -> Result<MgfBounds> {
    params.validate()?;
    let signal = params.t.sqrt() * params.beta_star_norm();
    if !(signal >= consts.big_c0) {
        return Err(Error::Domain(format!(
            "bounds need √t‖β*‖ >= C_0 = {}, got {signal}",
            consts.big_c0
        )));
    }
    let n = ct.n() as f64;
    let n1 = ct.fixed_points() as f64;
    let fixed = -0.5 * n1 * (2.0 * params.t * params.distance_sq()).ln_1p();
    let ln_base = (consts.c0 * signal).ln();
    Ok(MgfBounds {
        log_bound_fc: fixed - (n - ct.num_cycles() as f64) * ln_base,
        log_bound_n1: fixed - 0.5 * (n - n1) * ln_base,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PkqkWitness {
    pub holds: bool,
    /// `ln(p^k - q^k)`
    pub log_lhs: f64,
    /// `(k - 1) ln(s/3)` with `s = √(2t)‖β*‖`
    pub log_rhs: f64,
}

/// Evaluates both sides of `p^k - q^k ≥ (s/3)^(k-1)`, valid for `s ≥ 10`, `k ≥ 2`.
pub fn pkqk_lower_bound_check(k: usize, params: &MgfParams) -> Result<PkqkWitness> {
    params.validate()?;
    if k < 2 {
        return Err(Error::InvalidArgument(format!("cycle length must be >= 2, got {k}")));
    }
    let s = params.scaled_signal();
    if !(s >= 10.0) {
        return Err(Error::Domain(format!("need s = √(2t)‖β*‖ >= 10, got {s}")));
    }
    let log_lhs = ln_pk_minus_qk(params.roots(), k);
    let log_rhs = (k - 1) as f64 * (s / 3.0).ln();
    Ok(PkqkWitness {
        holds: log_lhs >= log_rhs,
        log_lhs,
        log_rhs,
    })
}

/// Volume bound `(1 + 2r/δ)^d` on the size of a δ-net of a radius-`r` ball.
pub fn net_cardinality_bound(r: f64, delta: f64, d: usize) -> f64 {
    log_net_cardinality_bound(r, delta, d).exp()
}

pub fn log_net_cardinality_bound(r: f64, delta: f64, d: usize) -> f64 {
    d as f64 * (2.0 * r / delta).ln_1p()
}

/// Deviation thresholds for `Z ~ χ²(m)`: `P[Z ≥ m + 2√(mt) + 2t] ≤ e^(-t)` and
/// `P[Z ≤ m - 2√(mt)] ≤ e^(-t)`. Returns `(upper, lower)`.
pub fn chi_square_tail_bounds(m: usize, t: f64) -> Result<(f64, f64)> {
    if m == 0 || !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("need m >= 1 and t >= 0, got m={m}, t={t}")));
    }
    let m = m as f64;
    let spread = 2.0 * (m * t).sqrt();
    Ok((m + spread + 2.0 * t, m - spread))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryMode {
    Exact,
    AlmostExact,
}

impl RecoveryMode {
    /// Exponent `c` of the threshold `SNR = n^c`.
    pub fn exponent(&self) -> f64 {
        match self {
            RecoveryMode::Exact => 4.0,
            RecoveryMode::AlmostExact => 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdQuery {
    pub n: usize,
    pub mode: RecoveryMode,
    pub epsilon: f64,
}

/// `n^(4+ε)` for exact recovery, `n^(2+ε)` for almost exact recovery.
pub fn threshold_snr(q: &ThresholdQuery) -> Result<f64> {
    if q.n < 2 || !(q.epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need n >= 2 and ε >= 0, got n={}, ε={}",
            q.n, q.epsilon
        )));
    }
    Ok((q.n as f64).powf(q.mode.exponent() + q.epsilon))
}

/// All cycle types of `n` points (integer partitions of `n`), in reverse
/// lexicographic order of the partition, starting from the single `n`-cycle.
pub fn cycle_types(n: usize) -> Vec<CycleType> {
    fn rec(remaining: usize, max: usize, parts: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining == 0 {
            out.push(parts.clone());
            return;
        }
        for k in (1..=max.min(remaining)).rev() {
            parts.push(k);
            rec(remaining - k, k, parts, out);
            parts.pop();
        }
    }
    let mut parts = Vec::new();
    let mut out = Vec::new();
    if n > 0 {
        rec(n, n, &mut parts, &mut out);
    }
    out.into_iter()
        .map(|p| {
            let mut counts = std::collections::BTreeMap::new();
            for k in p {
                *counts.entry(k).or_insert(0) += 1;
            }
            CycleType::new(n, counts).expect("partition sums to n")
        })
        .collect()
}
