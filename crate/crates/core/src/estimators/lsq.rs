//! Least-squares refits for a fixed permutation.
//!
//! Since `‖y - ΠXβ‖ = ‖Πᵀy - Xβ‖`, a single thin QR factorization of `X`
//! serves every permutation: `β̂_Π = R⁻¹ Qᵀ Πᵀ y`, and the projection
//! `P_{ΠX} = Π P_X Πᵀ` gives `‖P_{ΠX} y‖ = ‖Qᵀ Πᵀ y‖`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::perm::Permutation;

/// Relative tolerance on the diagonal of `R` below which `X` counts as rank deficient.
const RANK_TOL: f64 = 1e-10;

/// Result of refitting `β` for a fixed permutation.
#[derive(Clone, Debug, PartialEq)]
pub struct Fit {
    pub beta: DVector<f64>,
    /// `‖y - ΠXβ̂_Π‖² = ‖P_{(ΠX)⊥} y‖²`
    pub residual_sq: f64,
    /// `‖P_{ΠX} y‖²`
    pub qap_objective: f64,
}

/// A design matrix with its thin QR factorization.
#[derive(Clone, Debug)]
pub struct Design {
    x: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl Design {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        let (n, d) = x.shape();
        if d == 0 || n == 0 {
            return Err(Error::InvalidArgument(format!("empty design {n}x{d}")));
        }
        if d > n {
            return Err(Error::SingularDesign(format!(
                "design is {n}x{d}; need at least as many rows as columns"
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("design has non-finite entries".into()));
        }
        let qr = x.clone().qr();
        let (q, r) = qr.unpack();
        let diag_max = r.diagonal().amax();
        let diag_min = r.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        if diag_max == 0.0 || diag_min <= RANK_TOL * diag_max {
            return Err(Error::SingularDesign(format!(
                "design is numerically rank deficient (|R_ii| ranges {diag_min:e}..{diag_max:e})"
            )));
        }
        Ok(Design { x, q, r })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// Largest singular value of `X` (equal to that of `ΠX`).
    pub fn op_norm(&self) -> f64 {
        self.x
            .singular_values()
            .iter()
            .fold(0.0, |m: f64, &s| m.max(s))
    }

    fn check_y(&self, y: &DVector<f64>) -> Result<()> {
        if y.len() != self.n() {
            return Err(Error::Dimension(format!(
                "response has length {}, design has {} rows",
                y.len(),
                self.n()
            )));
        }
        Ok(())
    }

    /// Least-squares refit of `β` for permutation `pi`.
    pub fn refit(&self, pi: &Permutation, y: &DVector<f64>) -> Result<Fit> {
        self.check_y(y)?;
        let unshuffled = DVector::from_vec(pi.apply_transpose(y.as_slice())?);
        let coeffs = self.q.tr_mul(&unshuffled);
        let beta = self
            .r
            .solve_upper_triangular(&coeffs)
            .ok_or_else(|| Error::SingularDesign("triangular solve failed".into()))?;
        let residual_sq = (&unshuffled - &self.x * &beta).norm_squared();
        Ok(Fit {
            beta,
            residual_sq,
            qap_objective: coeffs.norm_squared(),
        })
    }

    /// `‖y - ΠXβ‖²` for a given `β` (no refit).
    pub fn residual_at(&self, pi: &Permutation, y: &DVector<f64>, beta: &DVector<f64>) -> Result<f64> {
        self.check_y(y)?;
        if beta.len() != self.d() {
            return Err(Error::Dimension(format!(
                "beta has length {}, design has {} columns",
                beta.len(),
                self.d()
            )));
        }
        let fitted = pi.apply((&self.x * beta).as_slice())?;
        Ok(y.iter().zip(&fitted).map(|(a, b)| (a - b).powi(2)).sum())
    }
}

/// `β̂_Π`, the minimizer of `‖y - ΠXβ‖²` over `β`.
pub fn least_squares_beta(x: &DMatrix<f64>, pi: &Permutation, y: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(Design::new(x.clone())?.refit(pi, y)?.beta)
}

/// `(‖P_{(ΠX)⊥} y‖², ‖P_{ΠX} y‖²)`.
pub fn residual_and_objective(x: &DMatrix<f64>, pi: &Permutation, y: &DVector<f64>) -> Result<(f64, f64)> {
    let fit = Design::new(x.clone())?.refit(pi, y)?;
    Ok((fit.residual_sq, fit.qap_objective))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate, ModelConfig, Snr};
    use crate::perm::sample_uniform;
    use crate::seed::rng_from_seed;

    #[test]
    fn scalar_fit() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let y = DVector::from_column_slice(&[2.0, 4.0, 6.0]);
        let beta = least_squares_beta(&x, &Permutation::identity(3), &y).unwrap();
        assert!((beta[0] - 2.0).abs() < 1e-12);
        let (res, obj) = residual_and_objective(&x, &Permutation::identity(3), &y).unwrap();
        assert!(res < 1e-20);
        assert!((obj - 56.0).abs() < 1e-10);
    }

    #[test]
    fn oracle_permutation_noiseless_recovers_beta() {
        let cfg = ModelConfig::new(15, 3, Snr::Noiseless);
        let inst = generate(&cfg, 4).unwrap();
        let beta = least_squares_beta(&inst.x, &inst.pi_star, &inst.y).unwrap();
        assert!((beta - &inst.beta_star).amax() < 1e-10);
    }

    #[test]
    fn matches_normal_equations() {
        // Independent route: solve (ΠX)ᵀ(ΠX) β = (ΠX)ᵀ y with an LU solve.
        let cfg = ModelConfig::new(6, 2, Snr::Value(3.0));
        let inst = generate(&cfg, 9).unwrap();
        let mut rng = rng_from_seed(1);
        let pi = sample_uniform(6, &mut rng);
        let px = pi.to_matrix() * &inst.x;
        let gram = px.transpose() * &px;
        let rhs = px.transpose() * &inst.y;
        let direct = gram.lu().solve(&rhs).unwrap();
        let beta = least_squares_beta(&inst.x, &pi, &inst.y).unwrap();
        assert!((beta - direct).amax() < 1e-10);
    }

    #[test]
    fn span_and_orthogonal_cases() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let pi: Permutation = "[2,1,3]".parse().unwrap();
        // Column span of ΠX is e_1 after the swap maps row 1 to position 2.
        let in_span = DVector::from_column_slice(&[0.0, 5.0, 0.0]);
        let (res, _) = residual_and_objective(&x, &pi, &in_span).unwrap();
        assert!(res < 1e-24);
        let orth = DVector::from_column_slice(&[1.0, 0.0, 2.0]);
        let (res, obj) = residual_and_objective(&x, &pi, &orth).unwrap();
        assert!(obj < 1e-24);
        assert!((res - 5.0).abs() < 1e-12);
    }

    #[test]
    fn singular_and_dimension_errors() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(matches!(Design::new(x), Err(Error::SingularDesign(_))));
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        assert!(matches!(Design::new(x), Err(Error::SingularDesign(_))));
        let x = DMatrix::zeros(3, 1);
        assert!(matches!(Design::new(x), Err(Error::SingularDesign(_))));
        let d = Design::new(DMatrix::from_column_slice(2, 1, &[1.0, 2.0])).unwrap();
        let y = DVector::from_column_slice(&[1.0]);
        assert!(matches!(
            d.refit(&Permutation::identity(2), &y),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn normal_equation_residual_is_orthogonal() {
        for seed in 0..20 {
            let cfg = ModelConfig::new(12, 3, Snr::Value(2.0));
            let inst = generate(&cfg, seed).unwrap();
            let design = Design::new(inst.x.clone()).unwrap();
            let pi = sample_uniform(12, &mut rng_from_seed(seed + 100));
            let fit = design.refit(&pi, &inst.y).unwrap();
            let px = pi.permute_rows(&inst.x).unwrap();
            let grad = px.transpose() * (&inst.y - &px * &fit.beta);
            assert!(grad.amax() < 1e-8, "gradient {grad}");
            let total = inst.y.norm_squared();
            assert!(((fit.residual_sq + fit.qap_objective) - total).abs() <= 1e-8 * total);
            let direct = design.residual_at(&pi, &inst.y, &fit.beta).unwrap();
            assert!((direct - fit.residual_sq).abs() <= 1e-10 * total);
        }
    }

    #[test]
    fn op_norm_of_diagonal() {
        let x = DMatrix::from_row_slice(3, 2, &[3.0, 0.0, 0.0, -4.0, 0.0, 0.0]);
        assert!((Design::new(x).unwrap().op_norm() - 4.0).abs() < 1e-12);
    }
}
