//! Sparse-group LASSO regressions for mixed-frequency panel data.
//!
//! - [`dictionary`]: Legendre MIDAS dictionaries and Beta lag weights.
//! - [`design`]: panel containers, MIDAS/UMIDAS designs, standardization,
//!   within transform.
//! - [`solver`]: sparse-group proximal operator and proximal gradient solver.
//! - [`estimators`]: pooled, fixed-effects and LASSO-UMIDAS fits, time-blocked
//!   cross-validation.
//! - [`inference`]: nodewise precision matrix, debiasing, HAC long-run
//!   variance, Granger-causality Wald tests.
//! - [`simulate`]: Monte Carlo data generation and rejection-frequency experiments.

// `!(x > 0.0)` checks deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod design;
pub mod dictionary;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod simulate;
pub mod solver;

pub use error::{Error, Result};
