//! Linear assignment with scalar scores, solved by sorting.
//!
//! For fixed `z`, `min_Π ‖y - Πz‖²` pairs the i-th smallest entry of `y` with
//! the i-th smallest entry of `z` (rearrangement inequality).

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::perm::Permutation;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub perm: Permutation,
    /// Equal keys were met in `y` or `z`; the order among them is by index.
    pub degenerate_ties: bool,
}

/// Indices that sort `v` ascending; equal keys keep their original order.
pub fn argsort(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    idx
}

fn has_ties(v: &[f64], order: &[usize]) -> bool {
    order.windows(2).any(|w| v[w[0]] == v[w[1]])
}

/// Permutation minimizing `‖y - Πz‖²`, with `(Πz)[i] = z[π(i)]`.
pub fn sort_assign(y: &[f64], z: &[f64]) -> Result<Assignment> {
    if y.len() != z.len() {
        return Err(Error::Dimension(format!(
            "cannot match vectors of length {} and {}",
            y.len(),
            z.len()
        )));
    }
    let oy = argsort(y);
    let oz = argsort(z);
    let mut map = vec![0; y.len()];
    for (&i, &j) in oy.iter().zip(&oz) {
        map[i] = j;
    }
    Ok(Assignment {
        perm: Permutation::from_zero_based(map)?,
        degenerate_ties: has_ties(y, &oy) || has_ties(z, &oz),
    })
}

/// `y` sorted once, for repeated assignment costs against many `z`.
#[derive(Clone, Debug)]
pub struct SortedResponse {
    sorted: Vec<f64>,
    norm_sq: f64,
    ties: bool,
}

impl SortedResponse {
    pub fn new(y: &[f64]) -> Self {
        let order = argsort(y);
        SortedResponse {
            sorted: order.iter().map(|&i| y[i]).collect(),
            norm_sq: y.iter().map(|v| v * v).sum(),
            ties: has_ties(y, &order),
        }
    }

    pub fn has_ties(&self) -> bool {
        self.ties
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    /// `min_Π ‖y - Πz‖²`; `z` is sorted in place.
    pub fn assignment_cost(&self, z: &mut [f64]) -> f64 {
        debug_assert_eq!(z.len(), self.sorted.len());
        z.sort_unstable_by(f64::total_cmp);
        self.sorted
            .iter()
            .zip(z.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// Lexicographic comparison of `(cost, permutation)` pairs.
pub fn cmp_candidates(a: (f64, &Permutation), b: (f64, &Permutation)) -> Ordering {
    a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1))
}
