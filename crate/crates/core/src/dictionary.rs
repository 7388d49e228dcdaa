//! MIDAS weighting dictionaries.
//!
//! A dictionary maps the `m` high-frequency lags of a covariate onto `L`
//! coefficients through the `m × L` matrix
//!
//! ```text
//! W[j, l] = w_l((j - 1) / m) / m,   j = 1..m (most recent lag first), l = 0..L-1
//! ```
//!
//! where `w_l` is the degree-`l` shifted Legendre polynomial on `[0, 1]`.
//! Column 0 is the constant `1/m`, so a single-column dictionary averages
//! the lags.

use nalgebra::DMatrix;
use statrs::function::beta::ln_beta;

use crate::error::{Error, Result};

/// Shifted Legendre polynomial `w_l(s) = P_l(2s - 1)` on `[0, 1]`.
///
/// Evaluated with the three-term recurrence
/// `(n + 1) P_{n+1}(x) = (2n + 1) x P_n(x) - n P_{n-1}(x)` at `x = 2s - 1`.
pub fn legendre_value(degree: usize, s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("s = {s} lies outside [0, 1]")));
    }
    Ok(legendre_unchecked(degree, s))
}

fn legendre_unchecked(degree: usize, s: f64) -> f64 {
    let x = 2.0 * s - 1.0;
    let mut prev = 1.0;
    if degree == 0 {
        return prev;
    }
    let mut cur = x;
    for n in 1..degree {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0) * x * cur - nf * prev) / (nf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// The `m × L` lag-aggregation matrix of a MIDAS dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct MidasDictionary {
    weights: DMatrix<f64>,
}

impl MidasDictionary {
    /// Wraps an arbitrary `m × L` weighting matrix (e.g. `I/m` for UMIDAS).
    pub fn from_weights(weights: DMatrix<f64>) -> Result<Self> {
        let (m, l) = weights.shape();
        if m == 0 || l == 0 || l > m {
            return Err(Error::InvalidArgument(format!(
                "dictionary must satisfy 1 <= L <= m, got m = {m}, L = {l}"
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("dictionary weights must be finite".into()));
        }
        Ok(Self { weights })
    }

    /// Number of high-frequency lags per low-frequency period.
    pub fn lags(&self) -> usize {
        self.weights.nrows()
    }

    /// Number of dictionary functions (columns).
    pub fn len(&self) -> usize {
        self.weights.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.ncols() == 0
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }
}

/// Legendre dictionary with `n_functions` columns (degrees `0..n_functions`)
/// over `lags` high-frequency lags.
///
/// `n_functions` counts columns, so "degree three" corresponds to `n_functions = 4`.
pub fn build_dictionary(lags: usize, n_functions: usize) -> Result<MidasDictionary> {
    if lags == 0 || n_functions == 0 || n_functions > lags {
        return Err(Error::InvalidArgument(format!(
            "dictionary must satisfy 1 <= L <= m, got m = {lags}, L = {n_functions}"
        )));
    }
    let m = lags as f64;
    let weights = DMatrix::from_fn(lags, n_functions, |j, l| legendre_unchecked(l, j as f64 / m) / m);
    Ok(MidasDictionary { weights })
}

/// Grid on which lag weights are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightGrid {
    /// `s_j = (j - 1)/(m - 1)`: both endpoints of `[0, 1]` are hit.
    #[default]
    Endpoints,
    /// `s_j = (j - 1)/m`, the dictionary grid.
    LeftAligned,
}

impl WeightGrid {
    pub fn point(self, j: usize, lags: usize) -> f64 {
        match self {
            WeightGrid::Endpoints if lags == 1 => 0.5,
            WeightGrid::Endpoints => j as f64 / (lags - 1) as f64,
            WeightGrid::LeftAligned => j as f64 / lags as f64,
        }
    }
}

/// Beta(`p1`, `p2`) density scaled by `scale`, evaluated on the endpoint grid.
///
/// The `1/m` aggregation is left to the caller. A single lag (`m = 1`) is
/// evaluated at the midpoint.
pub fn beta_weights(lags: usize, p1: f64, p2: f64, scale: f64) -> Result<Vec<f64>> {
    beta_weights_on(WeightGrid::Endpoints, lags, p1, p2, scale)
}

pub fn beta_weights_on(grid: WeightGrid, lags: usize, p1: f64, p2: f64, scale: f64) -> Result<Vec<f64>> {
    if lags == 0 {
        return Err(Error::InvalidArgument("number of lags must be positive".into()));
    }
    if !(p1 > 0.0 && p2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "beta shape parameters must be positive, got ({p1}, {p2})"
        )));
    }
    let log_norm = ln_beta(p1, p2);
    Ok((0..lags)
        .map(|j| {
            let s = grid.point(j, lags);
            let density = (s.powf(p1 - 1.0) * (1.0 - s).powf(p2 - 1.0)) * (-log_norm).exp();
            scale * density
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn explicit(degree: usize, s: f64) -> f64 {
        match degree {
            0 => 1.0,
            1 => 2.0 * s - 1.0,
            2 => 6.0 * s * s - 6.0 * s + 1.0,
            3 => 20.0 * s.powi(3) - 30.0 * s * s + 12.0 * s - 1.0,
            4 => 70.0 * s.powi(4) - 140.0 * s.powi(3) + 90.0 * s * s - 20.0 * s + 1.0,
            _ => unreachable!(),
        }
    }

    #[test]
    fn legendre_reference_points() {
        assert_eq!(legendre_value(0, 0.7).unwrap(), 1.0);
        assert_eq!(legendre_value(1, 0.5).unwrap(), 0.0);
        assert!((legendre_value(2, 0.5).unwrap() + 0.5).abs() < 1e-15);
        assert!((legendre_value(4, 0.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn legendre_rejects_out_of_domain() {
        assert!(matches!(legendre_value(2, 1.5), Err(Error::Domain(_))));
        assert!(matches!(legendre_value(0, -0.1), Err(Error::Domain(_))));
        assert!(legendre_value(3, f64::NAN).is_err());
    }

    #[test]
    fn legendre_matches_explicit_low_degrees() {
        for k in 0..=200 {
            let s = k as f64 / 200.0;
            for d in 0..=4 {
                assert!((legendre_value(d, s).unwrap() - explicit(d, s)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dictionary_shapes_and_first_columns() {
        let d = build_dictionary(12, 1).unwrap();
        assert_eq!(d.weights().shape(), (12, 1));
        assert!(d.weights().iter().all(|&w| (w - 1.0 / 12.0).abs() < 1e-15));

        let d = build_dictionary(12, 2).unwrap();
        assert!((d.weights()[(0, 1)] + 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn dictionary_rejects_bad_sizes() {
        assert!(build_dictionary(3, 4).is_err());
        assert!(build_dictionary(0, 0).is_err());
        assert!(build_dictionary(5, 0).is_err());
    }

    #[test]
    fn dictionary_columns_nearly_orthogonal() {
        let m = 100;
        let d = build_dictionary(m, 4).unwrap();
        let w = d.weights() * m as f64;
        for k in 0..4 {
            for l in 0..4 {
                if k != l {
                    let dot = w.column(k).dot(&w.column(l)) / m as f64;
                    assert!(dot.abs() < 0.02, "({k},{l}) -> {dot}");
                }
            }
        }
    }

    #[test]
    fn beta_weights_examples() {
        assert!(beta_weights(3, 1.0, 1.0, 1.0).unwrap().iter().all(|&w| (w - 1.0).abs() < 1e-12));
        assert!(beta_weights(12, 3.0, 3.0, 0.0).unwrap().iter().all(|&w| w == 0.0));
        let w = beta_weights(5, 3.0, 3.0, 1.0).unwrap();
        assert!((w[2] - 1.875).abs() < 1e-12);
        assert_eq!(w[0], 0.0);
        assert_eq!(w[4], 0.0);
        assert!(beta_weights(4, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn beta_weights_symmetric_for_equal_shapes() {
        let w = beta_weights(12, 2.5, 2.5, 0.3).unwrap();
        for j in 0..12 {
            assert!((w[j] - w[11 - j]).abs() < 1e-12);
        }
    }
}
