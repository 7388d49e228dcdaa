//! Debiased inference for pooled sg-LASSO fits.
//!
//! With `Z = (1, X_std)` the `NT × (p+1)` design including the intercept and
//! `ρ̂ = (α̂, β̂_std)`, the debiased estimator of a coefficient block `G` is
//!
//! ```text
//! ρ̂_G + Θ̂_G Zᵀ(y - Zρ̂)/NT
//! ```
//!
//! where the rows `Θ̂_G` come from nodewise LASSO regressions. Its long-run
//! variance `Ξ̂_G` is a pooled kernel HAC estimator built from the scores
//! `û_it Θ̂_G z_it`, and the Granger-causality statistic is the Wald form
//! `NT · dᵀ Ξ̂_G⁻¹ d`, referred to `χ²_{|G|}`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::design::{DesignProblem, GroupStructure, InterceptMode};
use crate::error::{Error, Result};
use crate::estimators::{time_folds, SgLassoFit};
use crate::solver::{lambda_grid, PenaltyConfig, PreparedProblem, SolverConfig};

/// Choice of the nodewise penalty levels `λ_j`.
#[derive(Debug, Clone, PartialEq)]
pub enum NodewiseLambda {
    Fixed(f64),
    /// Time-blocked cross-validation over a geometric grid from each row's
    /// `λ_max` down to `ratio · λ_max`.
    CrossValidated { n_folds: usize, n_lambda: usize, ratio: f64 },
}

impl Default for NodewiseLambda {
    fn default() -> Self {
        NodewiseLambda::CrossValidated { n_folds: 10, n_lambda: 20, ratio: 0.01 }
    }
}

/// Rows `Θ̂_G` of the nodewise precision matrix estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionEstimate {
    /// Indices of the rows (columns of `Z`) that were computed.
    pub rows: Vec<usize>,
    /// `|G| × (p+1)`; row `r` is `1/σ̂²` at `rows[r]` and `-μ̂/σ̂²` elsewhere.
    pub theta_rows: DMatrix<f64>,
    pub sigma2: DVector<f64>,
    pub nodewise_lambdas: DVector<f64>,
    /// Nodewise coefficient vectors, embedded with a zero at their own index.
    pub mu: DMatrix<f64>,
}

/// `Z = (1, X / scales)` for a pooled fit: the design on which `ρ̂ = (α̂, β̂_std)`
/// reproduces the fitted values.
pub fn inference_design(problem: &DesignProblem, fit: &SgLassoFit) -> Result<DMatrix<f64>> {
    if fit.intercept_mode != InterceptMode::Pooled || fit.intercepts.len() != 1 {
        return Err(Error::InvalidMode("debiased inference is implemented for pooled fits".into()));
    }
    let (nt, p) = problem.design().shape();
    if p != fit.slopes.len() {
        return Err(Error::DimensionMismatch(format!("fit has {} slopes, design has {p} columns", fit.slopes.len())));
    }
    let mut z = DMatrix::from_element(nt, p + 1, 1.0);
    for j in 0..p {
        z.column_mut(j + 1).copy_from(&(problem.design().column(j) / fit.column_scales[j]));
    }
    Ok(z)
}

/// Columns of `Z` belonging to the slope group labelled `label`.
pub fn group_rows(groups: &GroupStructure, label: &str) -> Result<Vec<usize>> {
    let g = groups.find(label).ok_or_else(|| Error::InvalidArgument(format!("unknown group `{label}`")))?;
    Ok(groups.group(g).iter().map(|j| j + 1).collect())
}

fn sub_gram(gram: &DMatrix<f64>, j: usize) -> (DMatrix<f64>, DVector<f64>) {
    let idx: Vec<usize> = (0..gram.ncols()).filter(|&k| k != j).collect();
    let g = gram.select_rows(&idx).select_columns(&idx);
    let c = DVector::from_iterator(idx.len(), idx.iter().map(|&k| gram[(k, j)]));
    (g, c)
}

/// Embeds `μ` (length `q - 1`) into `e_j - μ` (length `q`).
fn residual_direction(mu: &DVector<f64>, j: usize) -> DVector<f64> {
    let q = mu.len() + 1;
    DVector::from_fn(q, |k, _| match k.cmp(&j) {
        std::cmp::Ordering::Less => -mu[k],
        std::cmp::Ordering::Equal => 1.0,
        std::cmp::Ordering::Greater => -mu[k - 1],
    })
}

/// Nodewise LASSO rows of the precision matrix of `z` for `target_rows`.
/// `n_periods` gives the entity-major row layout used by the time folds.
pub fn nodewise_precision(
    z: &DMatrix<f64>,
    n_periods: usize,
    target_rows: &[usize],
    rule: &NodewiseLambda,
    cfg: &SolverConfig,
) -> Result<PrecisionEstimate> {
    let (nt, q) = z.shape();
    if q < 2 {
        return Err(Error::InvalidArgument("nodewise regression needs at least two columns".into()));
    }
    if n_periods == 0 || !nt.is_multiple_of(n_periods) {
        return Err(Error::DimensionMismatch(format!("{nt} rows do not split into periods of {n_periods}")));
    }
    if let Some(&bad) = target_rows.iter().find(|&&j| j >= q) {
        return Err(Error::InvalidArgument(format!("row {bad} outside 0..{q}")));
    }
    let n = nt as f64;
    let gram = z.tr_mul(z) / n;
    let groups = GroupStructure::singletons((0..q - 1).map(|k| format!("mu{k}")).collect());
    let template = PenaltyConfig::new(0.0, 1.0, groups)?;

    // Training Grams for every fold, shared by all rows.
    let folds = match rule {
        NodewiseLambda::Fixed(lam) => {
            if !(*lam >= 0.0 && lam.is_finite()) {
                return Err(Error::InvalidArgument(format!("nodewise lambda must be finite and >= 0, got {lam}")));
            }
            Vec::new()
        }
        NodewiseLambda::CrossValidated { n_folds, n_lambda, ratio } => {
            lambda_grid(1.0, *n_lambda, *ratio)?;
            let n_entities = nt / n_periods;
            time_folds(n_periods, *n_folds)?
                .into_iter()
                .map(|f| {
                    let rows: Vec<usize> =
                        (0..n_entities).flat_map(|i| f.iter().map(move |&s| i * n_periods + s)).collect();
                    let zk = z.select_rows(&rows);
                    let train = (&gram * n - zk.tr_mul(&zk)) / (nt - rows.len()) as f64;
                    (zk, train, nt - rows.len())
                })
                .collect::<Vec<_>>()
        }
    };

    let solved: Vec<(DVector<f64>, f64, f64)> = target_rows
        .par_iter()
        .map(|&j| {
            let (g, c) = sub_gram(&gram, j);
            let full = PreparedProblem::from_gram(g, c, gram[(j, j)], nt);
            let lambda = match rule {
                NodewiseLambda::Fixed(lam) => *lam,
                NodewiseLambda::CrossValidated { n_lambda, ratio, .. } => {
                    let grid = lambda_grid(full.lambda_max(&template)?, *n_lambda, *ratio)?;
                    let mut mse = vec![0.0; grid.len()];
                    for (zk, train, n_train) in &folds {
                        let (g, c) = sub_gram(train, j);
                        let prepared = PreparedProblem::from_gram(g, c, train[(j, j)], *n_train);
                        let fits = prepared.path(&template, &grid, cfg)?;
                        for (l, f) in fits.iter().enumerate() {
                            let r = zk * residual_direction(&f.coefficients, j);
                            mse[l] += r.norm_squared() / zk.nrows() as f64;
                        }
                    }
                    // Ties go to the larger λ, which comes first in the grid.
                    let best = (0..grid.len()).fold(0, |b, l| if mse[l] < mse[b] { l } else { b });
                    grid[best]
                }
            };
            let mu = full.solve(&template.with_lambda(lambda), cfg, None)?.coefficients;
            let resid = z * residual_direction(&mu, j);
            let sigma2 = resid.norm_squared() / n + lambda * mu.abs().sum();
            if !(sigma2 > 1e-12) {
                return Err(Error::NearSingularDesign { column: j, sigma2 });
            }
            Ok((mu, sigma2, lambda))
        })
        .collect::<Result<_>>()?;

    let g = target_rows.len();
    let mut theta_rows = DMatrix::zeros(g, q);
    let mut mu_rows = DMatrix::zeros(g, q);
    let mut sigma2 = DVector::zeros(g);
    let mut lambdas = DVector::zeros(g);
    for (r, ((mu, s2, lam), &j)) in solved.into_iter().zip(target_rows).enumerate() {
        let dir = residual_direction(&mu, j);
        theta_rows.row_mut(r).copy_from(&(dir.transpose() / s2));
        let mut embedded = -dir;
        embedded[j] = 0.0;
        mu_rows.row_mut(r).copy_from(&embedded.transpose());
        sigma2[r] = s2;
        lambdas[r] = lam;
    }
    Ok(PrecisionEstimate { rows: target_rows.to_vec(), theta_rows, sigma2, nodewise_lambdas: lambdas, mu: mu_rows })
}

/// Debiased block estimate on the scale of `Z` and on the original scale.
#[derive(Debug, Clone, PartialEq)]
pub struct DebiasedEstimate {
    pub rows: Vec<usize>,
    /// `ρ̂_G + Θ̂_G Zᵀû/NT` in the coordinates of `Z`.
    pub standardized: DVector<f64>,
    /// The same, divided by each row's column scale (1 for the intercept).
    pub original: DVector<f64>,
    /// Column scale of every row in `rows`.
    pub scales: DVector<f64>,
}

pub fn debias(fit: &SgLassoFit, precision: &PrecisionEstimate, z: &DMatrix<f64>) -> Result<DebiasedEstimate> {
    let q = fit.slopes.len() + 1;
    if z.ncols() != q || z.nrows() != fit.residuals.len() || precision.theta_rows.ncols() != q {
        return Err(Error::DimensionMismatch(format!(
            "Z is {}x{}, precision has {} columns, fit has {} coefficients and {} residuals",
            z.nrows(),
            z.ncols(),
            precision.theta_rows.ncols(),
            q,
            fit.residuals.len()
        )));
    }
    let nt = z.nrows() as f64;
    let score = z.tr_mul(&fit.residuals) / nt;
    let correction = &precision.theta_rows * score;
    let rho = |j: usize| if j == 0 { fit.intercepts[0] } else { fit.standardized_slopes[j - 1] };
    let scale = |j: usize| if j == 0 { 1.0 } else { fit.column_scales[j - 1] };
    let g = precision.rows.len();
    let standardized = DVector::from_fn(g, |r, _| rho(precision.rows[r]) + correction[r]);
    let scales = DVector::from_fn(g, |r, _| scale(precision.rows[r]));
    let original = standardized.component_div(&scales);
    Ok(DebiasedEstimate { rows: precision.rows.clone(), standardized, original, scales })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    Parzen,
    QuadraticSpectral,
}

/// Kernel weight `K(x)` with `K(0) = 1`.
pub fn kernel_weight(kernel: Kernel, x: f64) -> f64 {
    let a = x.abs();
    match kernel {
        Kernel::Parzen => {
            if a <= 0.5 {
                1.0 - 6.0 * a * a + 6.0 * a * a * a
            } else if a <= 1.0 {
                2.0 * (1.0 - a).powi(3)
            } else {
                0.0
            }
        }
        Kernel::QuadraticSpectral => {
            let z = 6.0 * std::f64::consts::PI * a / 5.0;
            if z < 0.1 {
                // K = Σ_k (-1)^k 6(k+1) z^{2k} / (2k+3)!
                let z2 = z * z;
                1.0 - z2 / 10.0 + z2 * z2 / 280.0 - z2 * z2 * z2 / 15120.0 + z2 * z2 * z2 * z2 / 1330560.0
            } else {
                3.0 / (z * z) * (z.sin() / z - z.cos())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HacConfig {
    pub kernel: Kernel,
    /// Bandwidth `M_T > 0`.
    pub bandwidth: f64,
}

impl HacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!("bandwidth must be finite and > 0, got {}", self.bandwidth)));
        }
        Ok(())
    }
}

/// Pooled HAC long-run variance of the scores `û_it Θ̂_G z_it`:
///
/// ```text
/// Ξ̂_G = (1/N) Σ_i Σ_{|k|<T} K(k/M_T) Γ̂_{k,i},   Γ̂_{k,i} = (1/T) Σ_{t ≤ T-k} s_it s_{i,t+k}ᵀ
/// ```
///
/// with `Γ̂_{-k,i} = Γ̂_{k,i}ᵀ`. Entities are accumulated in index order.
pub fn hac_lrv(
    residuals: &DVector<f64>,
    z: &DMatrix<f64>,
    n_periods: usize,
    precision: &PrecisionEstimate,
    hac: &HacConfig,
) -> Result<DMatrix<f64>> {
    hac.validate()?;
    let nt = residuals.len();
    if z.nrows() != nt || z.ncols() != precision.theta_rows.ncols() {
        return Err(Error::DimensionMismatch("residuals, Z and precision rows disagree".into()));
    }
    if n_periods == 0 || !nt.is_multiple_of(n_periods) {
        return Err(Error::DimensionMismatch(format!("{nt} rows do not split into periods of {n_periods}")));
    }
    let t = n_periods;
    let n = nt / t;
    let mut scores = z * precision.theta_rows.transpose();
    for (r, u) in residuals.iter().enumerate() {
        scores.row_mut(r).scale_mut(*u);
    }
    let g = scores.ncols();
    let weights: Vec<f64> = (0..t).map(|k| kernel_weight(hac.kernel, k as f64 / hac.bandwidth)).collect();
    let mut xi = DMatrix::zeros(g, g);
    for i in 0..n {
        let s = scores.rows(i * t, t);
        let mut acc = s.tr_mul(&s);
        for (k, &w) in weights.iter().enumerate().skip(1) {
            if w == 0.0 {
                continue;
            }
            let gamma_k = s.rows(0, t - k).tr_mul(&s.rows(k, t - k));
            acc += (&gamma_k + gamma_k.transpose()) * w;
        }
        xi += acc / t as f64;
    }
    Ok(xi / n as f64)
}

/// Wald test that a coefficient block is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceReport {
    pub rows: Vec<usize>,
    pub debiased: DebiasedEstimate,
    /// `Ξ̂_G` in the coordinates of `Z`.
    pub covariance: DMatrix<f64>,
    /// Standard errors of `debiased.original`.
    pub standard_errors: DVector<f64>,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub hac: HacConfig,
    pub nodewise_lambdas: DVector<f64>,
    pub warnings: Vec<String>,
}

/// `NT · dᵀ Ξ̂_G⁻¹ d` with `d` the debiased block, against `χ²_{|G|}`.
pub fn granger_test(
    fit: &SgLassoFit,
    z: &DMatrix<f64>,
    n_periods: usize,
    precision: &PrecisionEstimate,
    hac: &HacConfig,
) -> Result<InferenceReport> {
    let debiased = debias(fit, precision, z)?;
    let covariance = hac_lrv(&fit.residuals, z, n_periods, precision, hac)?;
    let nt = z.nrows() as f64;
    let df = precision.rows.len();
    let d = &debiased.standardized;
    let eig = SymmetricEigen::new(covariance.clone());
    let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e.abs())));
    if !(lo > 0.0) || hi / lo > 1e12 {
        return Err(Error::SingularCovariance(format!("eigenvalues of the HAC covariance span [{lo:e}, {hi:e}]")));
    }
    let proj = eig.eigenvectors.tr_mul(d);
    let statistic = nt * proj.iter().zip(eig.eigenvalues.iter()).map(|(v, e)| v * v / e).sum::<f64>();
    let chi2 = ChiSquared::new(df as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let p_value = chi2.sf(statistic).clamp(0.0, 1.0);
    let standard_errors =
        DVector::from_fn(df, |r, _| (covariance[(r, r)] / nt).sqrt() / debiased.scales[r]);
    let mut warnings = Vec::new();
    if hac.bandwidth >= n_periods as f64 {
        warnings.push(format!("bandwidth {} >= T = {n_periods}: every lag is included", hac.bandwidth));
    }
    Ok(InferenceReport {
        rows: precision.rows.clone(),
        debiased,
        covariance,
        standard_errors,
        statistic,
        df,
        p_value,
        hac: *hac,
        nodewise_lambdas: precision.nodewise_lambdas.clone(),
        warnings,
    })
}
