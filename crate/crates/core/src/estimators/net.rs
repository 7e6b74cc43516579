//! Constructive δ-nets of a Euclidean ball.
//!
//! The net is a cubic grid with spacing `h = 2δ/√d` (so every point of a
//! cell lies within `δ` of the cell center), restricted to cells that meet
//! the ball. Two grid placements are considered, one with a node on the
//! center and one offset by `h/2` along every axis; the one with fewer
//! points is used. When `r ≤ δ` the center alone is a δ-net.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::theory::net_cardinality_bound;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    pub delta: f64,
}

impl NetSpec {
    pub fn new(center: Vec<f64>, radius: f64, delta: f64) -> Result<Self> {
        let spec = NetSpec {
            center,
            radius,
            delta,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Spec whose cardinality bound `(1 + 2r/δ)^d` equals `budget`.
    pub fn with_budget(center: Vec<f64>, radius: f64, budget: u64) -> Result<Self> {
        let d = center.len();
        if d == 0 {
            return Err(Error::InvalidArgument("net center is empty".into()));
        }
        let per_axis = (budget as f64).powf(1.0 / d as f64);
        if per_axis < 2.0 {
            return Err(Error::Budget(format!(
                "net budget {budget} is below 2^{d}; cannot place a δ-net with δ ≤ 2r"
            )));
        }
        // Widen δ slightly so that rounding cannot push the bound over budget.
        let delta = 2.0 * radius / (per_axis - 1.0) * (1.0 + 1e-9);
        NetSpec::new(center, radius, delta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.center.is_empty() {
            return Err(Error::InvalidArgument("net center is empty".into()));
        }
        if self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("net center is not finite".into()));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) || !(self.delta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "net needs r > 0 and δ > 0, got r={}, δ={}",
                self.radius, self.delta
            )));
        }
        if self.delta > 2.0 * self.radius {
            return Err(Error::InvalidArgument(format!(
                "net resolution δ={} exceeds 2r={}",
                self.delta,
                2.0 * self.radius
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `(1 + 2r/δ)^d`.
    pub fn cardinality_bound(&self) -> f64 {
        net_cardinality_bound(self.radius, self.delta, self.dim())
    }

    /// Errors when the cardinality bound exceeds `budget`.
    pub fn check_budget(&self, budget: u64) -> Result<()> {
        let bound = self.cardinality_bound();
        if !(bound <= budget as f64) {
            return Err(Error::Budget(format!(
                "δ-net bound (1 + 2r/δ)^d = (1 + 2·{}/{})^{} = {:.4e} exceeds budget {}",
                self.radius,
                self.delta,
                self.dim(),
                bound,
                budget
            )));
        }
        Ok(())
    }

    fn spacing(&self) -> f64 {
        2.0 * self.delta / (self.dim() as f64).sqrt()
    }

    /// Visits the integer offsets of grid nodes whose cells meet the ball.
    fn visit(&self, offset: f64, f: &mut dyn FnMut(&[f64])) {
        let h = self.spacing();
        let r2 = self.radius * self.radius;
        let reach = (self.radius / h + 0.5 + offset).floor() as i64 + 1;
        let mut coord = vec![0.0; self.dim()];
        #[allow(clippy::too_many_arguments)]
        fn rec(
            axis: usize,
            partial: f64,
            reach: i64,
            offset: f64,
            h: f64,
            r2: f64,
            coord: &mut Vec<f64>,
            f: &mut dyn FnMut(&[f64]),
        ) {
            if axis == coord.len() {
                f(coord);
                return;
            }
            for z in -reach..=reach {
                let node = (z as f64 + offset) * h;
                // Distance along this axis from the center to the cell.
                let gap = (node.abs() - h / 2.0).max(0.0);
                let next = partial + gap * gap;
                if next > r2 {
                    continue;
                }
                coord[axis] = node;
                rec(axis + 1, next, reach, offset, h, r2, coord, f);
            }
        }
        rec(0, 0.0, reach, offset, h, r2, &mut coord, f);
    }

    fn count_with_offset(&self, offset: f64) -> u64 {
        let mut count = 0u64;
        self.visit(offset, &mut |_| count += 1);
        count
    }

    fn best_offset(&self) -> Option<f64> {
        if self.radius <= self.delta {
            return None;
        }
        let aligned = self.count_with_offset(0.0);
        let shifted = self.count_with_offset(0.5);
        Some(if shifted < aligned { 0.5 } else { 0.0 })
    }

    /// Number of net points, without materializing them.
    pub fn cardinality(&self) -> u64 {
        match self.best_offset() {
            None => 1,
            Some(o) => self.count_with_offset(o),
        }
    }

    /// Net points, flattened row-major (`cardinality() × d`).
    pub fn points(&self) -> Vec<f64> {
        let d = self.dim();
        match self.best_offset() {
            None => self.center.clone(),
            Some(o) => {
                let mut out = Vec::new();
                self.visit(o, &mut |c| {
                    out.extend(c.iter().zip(&self.center).map(|(a, b)| a + b));
                });
                debug_assert_eq!(out.len() % d, 0);
                out
            }
        }
    }
}
