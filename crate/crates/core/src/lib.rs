//! Shuffled linear regression: instances, estimators, MGF theory and
//! Monte Carlo sweeps.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod mc;
pub mod model;
pub mod perm;
pub mod seed;
pub mod theory;

pub use error::{Error, Result};
