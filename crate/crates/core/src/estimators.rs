//! Pooled and fixed-effects sg-LASSO fits, LASSO-UMIDAS, and time-blocked
//! cross-validation of `(λ, γ)`.
//!
//! Every fit standardizes the slope columns after the intercepts have been
//! partialled out (global centering for a pooled intercept, entity
//! demeaning for fixed effects), solves on that scale and reports slopes
//! on the original scale. The intercepts solve their own normal equations,
//! `α̂_b = ȳ_b - x̄_bᵀβ̂` for every intercept block `b`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::design::{build_umidas_design, empirical_norm, DesignProblem, GroupStructure, InterceptMode, PanelDataset};
use crate::error::{Error, Result};
use crate::solver::{lambda_grid, penalty_value, PenaltyConfig, PreparedProblem, SolverConfig, SolverResult};

/// Solver outcome attached to a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitDiagnostics {
    /// `‖y - fitted‖²_n + 2λΩ(β̂_std)` on the standardized scale.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
}

impl From<&SolverResult> for FitDiagnostics {
    fn from(r: &SolverResult) -> Self {
        Self { objective: r.objective, iterations: r.iterations, converged: r.converged, kkt_residual: r.kkt_residual }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgLassoFit {
    pub intercept_mode: InterceptMode,
    /// One pooled intercept, one per entity, or none.
    pub intercepts: Vec<f64>,
    /// Slopes on the original data scale.
    pub slopes: DVector<f64>,
    /// Slopes on the scale the penalty was applied to.
    pub standardized_slopes: DVector<f64>,
    /// `slopes = standardized_slopes / column_scales`.
    pub column_scales: DVector<f64>,
    pub penalty: PenaltyConfig,
    /// `y - fitted`, stacked entity by entity.
    pub residuals: DVector<f64>,
    pub diagnostics: FitDiagnostics,
}

impl SgLassoFit {
    pub fn converged(&self) -> bool {
        self.diagnostics.converged
    }

    /// Fitted values for `problem`, which must share this fit's layout.
    pub fn predict(&self, problem: &DesignProblem) -> Result<DVector<f64>> {
        if problem.n_slopes() != self.slopes.len() {
            return Err(Error::DimensionMismatch(format!(
                "fit has {} slopes, design has {} columns",
                self.slopes.len(),
                problem.n_slopes()
            )));
        }
        let mut fitted = problem.design() * &self.slopes;
        add_intercepts(&mut fitted, &self.intercepts, problem.n_periods());
        Ok(fitted)
    }
}

fn add_intercepts(fitted: &mut DVector<f64>, intercepts: &[f64], t: usize) {
    match intercepts.len() {
        0 => {}
        1 => fitted.add_scalar_mut(intercepts[0]),
        _ => {
            for (i, a) in intercepts.iter().enumerate() {
                fitted.rows_mut(i * t, t).add_scalar_mut(*a);
            }
        }
    }
}

/// Second moments of a set of rows, taken around a fixed per-block shift so
/// that centering by subtraction stays accurate.
#[derive(Debug, Clone)]
struct Moments {
    n: usize,
    xx: DMatrix<f64>,
    xy: DVector<f64>,
    yy: f64,
    /// Per intercept block: row count, column sums and response sum.
    block_n: Vec<usize>,
    block_x: DMatrix<f64>,
    block_y: Vec<f64>,
}

impl Moments {
    fn of_rows(x: &DMatrix<f64>, y: &DVector<f64>, rows: &[usize], block_of: &dyn Fn(usize) -> usize, n_blocks: usize) -> Self {
        let p = x.ncols();
        let xs = x.select_rows(rows);
        let ys = y.select_rows(rows);
        let mut block_n = vec![0; n_blocks];
        let mut block_x = DMatrix::zeros(n_blocks, p);
        let mut block_y = vec![0.0; n_blocks];
        if n_blocks > 0 {
            for (k, &r) in rows.iter().enumerate() {
                let b = block_of(r);
                block_n[b] += 1;
                block_y[b] += ys[k];
                for j in 0..p {
                    block_x[(b, j)] += xs[(k, j)];
                }
            }
        }
        Self { n: rows.len(), xx: xs.tr_mul(&xs), xy: xs.tr_mul(&ys), yy: ys.norm_squared(), block_n, block_x, block_y }
    }

    fn minus(&self, other: &Moments) -> Moments {
        Moments {
            n: self.n - other.n,
            xx: &self.xx - &other.xx,
            xy: &self.xy - &other.xy,
            yy: self.yy - other.yy,
            block_n: self.block_n.iter().zip(&other.block_n).map(|(a, b)| a - b).collect(),
            block_x: &self.block_x - &other.block_x,
            block_y: self.block_y.iter().zip(&other.block_y).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Data shifted by exact block means, plus the shift itself.
#[derive(Debug, Clone)]
struct Shifted {
    x: DMatrix<f64>,
    y: DVector<f64>,
    shift_x: DMatrix<f64>,
    shift_y: Vec<f64>,
    n_blocks: usize,
    block_len: usize,
}

impl Shifted {
    fn new(problem: &DesignProblem) -> Self {
        let (n_blocks, block_len) = match problem.intercept() {
            InterceptMode::None => (0, problem.n_obs().max(1)),
            InterceptMode::Pooled => (1, problem.n_obs()),
            InterceptMode::FixedEffects => (problem.n_entities(), problem.n_periods()),
        };
        let mut x = problem.design().clone();
        let mut y = problem.response().clone();
        let p = x.ncols();
        let mut shift_x = DMatrix::zeros(n_blocks, p);
        let mut shift_y = vec![0.0; n_blocks];
        for b in 0..n_blocks {
            let r0 = b * block_len;
            shift_y[b] = y.rows(r0, block_len).mean();
            y.rows_mut(r0, block_len).add_scalar_mut(-shift_y[b]);
            for j in 0..p {
                let mut col = x.view_mut((r0, j), (block_len, 1));
                shift_x[(b, j)] = col.mean();
                col.add_scalar_mut(-shift_x[(b, j)]);
            }
        }
        Self { x, y, shift_x, shift_y, n_blocks, block_len }
    }

    fn moments(&self, rows: &[usize]) -> Moments {
        let len = self.block_len;
        Moments::of_rows(&self.x, &self.y, rows, &|r| r / len, self.n_blocks)
    }
}

/// A standardized, intercept-free least-squares problem built from moments.
#[derive(Debug, Clone)]
struct Core {
    prepared: PreparedProblem,
    scales: DVector<f64>,
    /// Block means on the original scale.
    mean_x: DMatrix<f64>,
    mean_y: Vec<f64>,
}

impl Core {
    fn from_moments(m: &Moments, shifted: &Shifted, names: &[String]) -> Result<Self> {
        let p = m.xx.ncols();
        if m.n == 0 {
            return Err(Error::InvalidArgument("no observations".into()));
        }
        let mut c = m.xx.clone();
        let mut cy = m.xy.clone();
        let mut yy = m.yy;
        let n_blocks = m.block_n.len();
        let mut mean_x = DMatrix::zeros(n_blocks, p);
        let mut mean_y = vec![0.0; n_blocks];
        for b in 0..n_blocks {
            let nb = m.block_n[b];
            if nb == 0 {
                return Err(Error::InvalidArgument(format!("intercept block {b} has no observations")));
            }
            let nb = nb as f64;
            let sx = m.block_x.row(b).transpose();
            let sy = m.block_y[b];
            c.ger(-1.0 / nb, &sx, &sx, 1.0);
            cy.axpy(-sy / nb, &sx, 1.0);
            yy -= sy * sy / nb;
            for j in 0..p {
                mean_x[(b, j)] = sx[j] / nb + shifted.shift_x[(b, j)];
            }
            mean_y[b] = sy / nb + shifted.shift_y[b];
        }
        let n = m.n as f64;
        let mut scales = DVector::zeros(p);
        for j in 0..p {
            let v = c[(j, j)] / n;
            // Relative test: a column that is constant within blocks only
            // survives centering as rounding noise.
            let raw = m.xx[(j, j)] / n + 1e-300;
            if !(v > 1e-20 * raw.max(1.0)) || !v.is_finite() {
                return Err(Error::DegenerateColumn { index: j, name: names.get(j).cloned().unwrap_or_default() });
            }
            scales[j] = v.sqrt();
        }
        let gram = DMatrix::from_fn(p, p, |i, j| c[(i, j)] / (n * scales[i] * scales[j]));
        let cross = DVector::from_fn(p, |j, _| cy[j] / (n * scales[j]));
        Ok(Self { prepared: PreparedProblem::from_gram(gram, cross, yy.max(0.0) / n, m.n), scales, mean_x, mean_y })
    }

    fn solve(&self, penalty: &PenaltyConfig, cfg: &SolverConfig, warm: Option<&DVector<f64>>) -> Result<RawFit> {
        let res = self.prepared.solve(penalty, cfg, warm)?;
        let slopes = res.coefficients.component_div(&self.scales);
        let intercepts = (0..self.mean_y.len()).map(|b| self.mean_y[b] - self.mean_x.row(b).transpose().dot(&slopes)).collect();
        Ok(RawFit { slopes, intercepts, result: res })
    }
}

struct RawFit {
    slopes: DVector<f64>,
    intercepts: Vec<f64>,
    result: SolverResult,
}

/// The partialled-out estimator for one design, ready for repeated solves
/// (e.g. along a λ path). The intercept treatment follows
/// `problem.intercept()`.
#[derive(Debug, Clone)]
pub struct SgLassoEstimator<'a> {
    problem: &'a DesignProblem,
    core: Core,
}

impl<'a> SgLassoEstimator<'a> {
    pub fn new(problem: &'a DesignProblem) -> Result<Self> {
        let shifted = Shifted::new(problem);
        let rows: Vec<usize> = (0..problem.n_obs()).collect();
        let core = Core::from_moments(&shifted.moments(&rows), &shifted, problem.column_names())?;
        Ok(Self { problem, core })
    }

    /// Scale of each slope column after partialling out the intercepts.
    pub fn column_scales(&self) -> &DVector<f64> {
        &self.core.scales
    }

    /// Smallest λ at which every penalized slope is zero.
    pub fn lambda_max(&self, template: &PenaltyConfig) -> Result<f64> {
        self.core.prepared.lambda_max(template)
    }

    /// `warm_start` is on the standardized scale.
    pub fn fit(&self, penalty: &PenaltyConfig, cfg: &SolverConfig, warm_start: Option<&DVector<f64>>) -> Result<SgLassoFit> {
        let raw = self.core.solve(penalty, cfg, warm_start)?;
        let mut fitted = self.problem.design() * &raw.slopes;
        add_intercepts(&mut fitted, &raw.intercepts, self.problem.n_periods());
        Ok(SgLassoFit {
            intercept_mode: self.problem.intercept(),
            intercepts: raw.intercepts,
            slopes: raw.slopes,
            standardized_slopes: raw.result.coefficients.clone(),
            column_scales: self.core.scales.clone(),
            penalty: penalty.clone(),
            residuals: self.problem.response() - fitted,
            diagnostics: FitDiagnostics::from(&raw.result),
        })
    }

    /// Warm-started fits over `lambdas` in the given order.
    pub fn path(&self, template: &PenaltyConfig, lambdas: &[f64], cfg: &SolverConfig) -> Result<Vec<SgLassoFit>> {
        let mut out: Vec<SgLassoFit> = Vec::with_capacity(lambdas.len());
        for &lam in lambdas {
            let warm = out.last().map(|f| f.standardized_slopes.clone());
            out.push(self.fit(&template.with_lambda(lam), cfg, warm.as_ref())?);
        }
        Ok(out)
    }
}

fn require_mode(problem: &DesignProblem, mode: InterceptMode) -> Result<()> {
    if problem.intercept() != mode {
        return Err(Error::InvalidMode(format!("expected {mode:?} intercept, got {:?}", problem.intercept())));
    }
    Ok(())
}

/// Pooled sg-LASSO with one unpenalized common intercept.
pub fn fit_pooled(problem: &DesignProblem, penalty: &PenaltyConfig, cfg: &SolverConfig) -> Result<SgLassoFit> {
    require_mode(problem, InterceptMode::Pooled)?;
    SgLassoEstimator::new(problem)?.fit(penalty, cfg, None)
}

/// Pooled sg-LASSO with the intercept penalized as its own singleton group.
/// Slope columns are scaled by their uncentered empirical norms; the
/// constant column has norm one.
pub fn fit_pooled_penalized_intercept(
    problem: &DesignProblem,
    penalty: &PenaltyConfig,
    cfg: &SolverConfig,
) -> Result<SgLassoFit> {
    require_mode(problem, InterceptMode::Pooled)?;
    let (nt, p) = problem.design().shape();
    let mut scales = DVector::zeros(p);
    let mut x = DMatrix::from_element(nt, p + 1, 1.0);
    for j in 0..p {
        let s = empirical_norm(problem.design().column(j).as_slice());
        if !(s > 0.0) {
            return Err(Error::DegenerateColumn { index: j, name: problem.column_names()[j].clone() });
        }
        scales[j] = s;
        x.column_mut(j + 1).copy_from(&(problem.design().column(j) / s));
    }
    let mut groups = vec![vec![0]];
    groups.extend(problem.groups().groups().iter().map(|g| g.iter().map(|j| j + 1).collect()));
    let mut labels = vec!["(intercept)".to_string()];
    labels.extend(problem.groups().labels().iter().cloned());
    let gs = GroupStructure::new(groups, labels)?;
    let mut mask = vec![true];
    mask.extend(penalty.penalized.iter().copied());
    let augmented_penalty = PenaltyConfig::with_mask(penalty.lambda, penalty.gamma, gs.clone(), mask)?;
    let augmented =
        DesignProblem::new(problem.response().clone(), x, gs, InterceptMode::None, problem.n_entities(), problem.n_periods())?;
    let res = PreparedProblem::new(&augmented)?.solve(&augmented_penalty, cfg, None)?;
    let std_slopes = res.coefficients.rows(1, p).into_owned();
    let slopes = std_slopes.component_div(&scales);
    let intercept = res.coefficients[0];
    let mut fitted = problem.design() * &slopes;
    fitted.add_scalar_mut(intercept);
    Ok(SgLassoFit {
        intercept_mode: InterceptMode::Pooled,
        intercepts: vec![intercept],
        slopes,
        standardized_slopes: std_slopes,
        column_scales: scales,
        penalty: penalty.clone(),
        residuals: problem.response() - fitted,
        diagnostics: FitDiagnostics::from(&res),
    })
}

/// Fixed-effects sg-LASSO: slopes from the entity-demeaned problem, entity
/// intercepts `α̂_i = mean_t (y_it - x_itᵀβ̂)`.
pub fn fit_fixed_effects(problem: &DesignProblem, penalty: &PenaltyConfig, cfg: &SolverConfig) -> Result<SgLassoFit> {
    require_mode(problem, InterceptMode::FixedEffects)?;
    SgLassoEstimator::new(problem)?.fit(penalty, cfg, None)
}

/// Fixed-effects sg-LASSO by joint minimization over `(a, b)`, with one
/// unpenalized dummy column per entity. Slopes use the same column scales
/// as [`fit_fixed_effects`], so both routes minimize the same objective.
pub fn fit_fixed_effects_joint(problem: &DesignProblem, penalty: &PenaltyConfig, cfg: &SolverConfig) -> Result<SgLassoFit> {
    require_mode(problem, InterceptMode::FixedEffects)?;
    let scales = SgLassoEstimator::new(problem)?.core.scales;
    let (n, t, p) = (problem.n_entities(), problem.n_periods(), problem.n_slopes());
    let mut x = DMatrix::zeros(n * t, p + n);
    for j in 0..p {
        x.column_mut(j).copy_from(&(problem.design().column(j) / scales[j]));
    }
    for i in 0..n {
        x.view_mut((i * t, p + i), (t, 1)).fill(1.0);
    }
    let mut groups = problem.groups().groups().to_vec();
    groups.extend((0..n).map(|i| vec![p + i]));
    let mut labels = problem.groups().labels().to_vec();
    labels.extend((0..n).map(|i| format!("(entity {i})")));
    let gs = GroupStructure::new(groups, labels)?;
    let mut mask = penalty.penalized.clone();
    mask.extend(std::iter::repeat_n(false, n));
    let augmented_penalty = PenaltyConfig::with_mask(penalty.lambda, penalty.gamma, gs.clone(), mask)?;
    let augmented = DesignProblem::new(problem.response().clone(), x, gs, InterceptMode::None, n, t)?;
    let res = PreparedProblem::new(&augmented)?.solve(&augmented_penalty, cfg, None)?;
    let std_slopes = res.coefficients.rows(0, p).into_owned();
    let slopes = std_slopes.component_div(&scales);
    let intercepts: Vec<f64> = res.coefficients.rows(p, n).iter().copied().collect();
    let mut fitted = problem.design() * &slopes;
    add_intercepts(&mut fitted, &intercepts, t);
    Ok(SgLassoFit {
        intercept_mode: InterceptMode::FixedEffects,
        intercepts,
        slopes,
        standardized_slopes: std_slopes,
        column_scales: scales,
        penalty: penalty.clone(),
        residuals: problem.response() - fitted,
        diagnostics: FitDiagnostics::from(&res),
    })
}

/// LASSO on the unrestricted lag design with a pooled intercept.
pub fn fit_lasso_umidas(data: &PanelDataset, lambda: f64, cfg: &SolverConfig) -> Result<SgLassoFit> {
    let problem = build_umidas_design(data)?;
    let penalty = PenaltyConfig::new(lambda, 1.0, problem.groups().clone())?;
    fit_pooled(&problem, &penalty, cfg)
}

/// How the λ values of a cross-validation grid are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaGrid {
    /// Geometric grid from the full-sample `λ_max` (per γ) down to
    /// `ratio · λ_max`.
    Path { n_lambda: usize, ratio: f64 },
    /// The same explicit values for every γ.
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub n_folds: usize,
    pub lambda_grid: LambdaGrid,
    pub gamma_grid: Vec<f64>,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            n_folds: 10,
            lambda_grid: LambdaGrid::Path { n_lambda: 20, ratio: 0.01 },
            gamma_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_folds < 2 {
            return Err(Error::InvalidArgument("n_folds must be >= 2".into()));
        }
        if self.gamma_grid.is_empty() || self.gamma_grid.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(Error::InvalidArgument("gamma grid must be non-empty and inside [0, 1]".into()));
        }
        match &self.lambda_grid {
            LambdaGrid::Path { n_lambda, ratio } => {
                if *n_lambda == 0 || !(*ratio > 0.0 && *ratio < 1.0) {
                    return Err(Error::InvalidArgument("lambda path needs n_lambda >= 1 and ratio in (0, 1)".into()));
                }
            }
            LambdaGrid::Values(v) => {
                if v.is_empty() || v.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
                    return Err(Error::InvalidArgument("lambda values must be non-empty, finite and >= 0".into()));
                }
            }
        }
        Ok(())
    }
}

/// Splits periods `0..t` into `n_folds` adjacent blocks whose lengths differ
/// by at most one (longer blocks first).
pub fn time_folds(t: usize, n_folds: usize) -> Result<Vec<Vec<usize>>> {
    if n_folds < 2 {
        return Err(Error::InvalidArgument("n_folds must be >= 2".into()));
    }
    if t < n_folds {
        return Err(Error::FoldTooSmall(format!("{t} periods cannot fill {n_folds} folds")));
    }
    let (base, extra) = (t / n_folds, t % n_folds);
    let mut start = 0;
    Ok((0..n_folds)
        .map(|k| {
            let len = base + usize::from(k < extra);
            let block = (start..start + len).collect();
            start += len;
            block
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvPoint {
    pub lambda: f64,
    pub gamma: f64,
    /// Held-out mean squared error averaged over folds.
    pub mse: f64,
    pub fold_mse: Vec<f64>,
    /// Folds whose solve stopped before convergence.
    pub unconverged_folds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub best_lambda: f64,
    pub best_gamma: f64,
    pub table: Vec<CvPoint>,
}

impl CvResult {
    pub fn best(&self) -> &CvPoint {
        self.table.iter().find(|c| c.lambda == self.best_lambda && c.gamma == self.best_gamma).expect("best point is in table")
    }
}

/// Time-blocked cross-validation over `(λ, γ)`. Every entity loses the same
/// block of periods in each fold; slopes are standardized on the training
/// periods only and fixed effects are estimated from each entity's training
/// periods. `template` supplies the groups and penalty mask.
pub fn cross_validate(problem: &DesignProblem, template: &PenaltyConfig, cv: &CvConfig, cfg: &SolverConfig) -> Result<CvResult> {
    cv.validate()?;
    let folds = time_folds(problem.n_periods(), cv.n_folds)?;
    let shifted = Shifted::new(problem);
    let full_rows: Vec<usize> = (0..problem.n_obs()).collect();
    let full = shifted.moments(&full_rows);
    let full_core = Core::from_moments(&full, &shifted, problem.column_names())?;

    let t = problem.n_periods();
    let fold_rows: Vec<Vec<usize>> = folds
        .iter()
        .map(|f| (0..problem.n_entities()).flat_map(|i| f.iter().map(move |&s| i * t + s)).collect())
        .collect();
    let cores: Vec<Core> = fold_rows
        .iter()
        .map(|rows| Core::from_moments(&full.minus(&shifted.moments(rows)), &shifted, problem.column_names()))
        .collect::<Result<_>>()?;

    let grids: Vec<(f64, Vec<f64>)> = cv
        .gamma_grid
        .iter()
        .map(|&g| {
            let lambdas = match &cv.lambda_grid {
                LambdaGrid::Path { n_lambda, ratio } => {
                    let lmax = full_core.prepared.lambda_max(&template.with_gamma(g))?;
                    lambda_grid(lmax, *n_lambda, *ratio)?
                }
                LambdaGrid::Values(v) => v.clone(),
            };
            Ok((g, lambdas))
        })
        .collect::<Result<_>>()?;

    // One warm-started path per (γ, fold); collected in grid order.
    let jobs: Vec<(usize, usize)> = (0..grids.len()).flat_map(|g| (0..folds.len()).map(move |k| (g, k))).collect();
    let errors: Vec<Vec<(f64, bool)>> = jobs
        .par_iter()
        .map(|&(g, k)| {
            let (gamma, lambdas) = &grids[g];
            let pen = template.with_gamma(*gamma);
            let rows = &fold_rows[k];
            let x_test = problem.design().select_rows(rows);
            let y_test = problem.response().select_rows(rows);
            let mut warm: Option<DVector<f64>> = None;
            let mut out = Vec::with_capacity(lambdas.len());
            for &lam in lambdas {
                let raw = cores[k].solve(&pen.with_lambda(lam), cfg, warm.as_ref())?;
                let mut pred = &x_test * &raw.slopes;
                match raw.intercepts.len() {
                    0 => {}
                    1 => pred.add_scalar_mut(raw.intercepts[0]),
                    _ => {
                        let len = folds[k].len();
                        for (i, a) in raw.intercepts.iter().enumerate() {
                            pred.rows_mut(i * len, len).add_scalar_mut(*a);
                        }
                    }
                }
                let mse = (&y_test - pred).norm_squared() / rows.len() as f64;
                out.push((mse, raw.result.converged));
                warm = Some(raw.result.coefficients);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut table = Vec::new();
    for (g, (gamma, lambdas)) in grids.iter().enumerate() {
        for (l, &lambda) in lambdas.iter().enumerate() {
            let fold_mse: Vec<f64> = (0..folds.len()).map(|k| errors[g * folds.len() + k][l].0).collect();
            let unconverged_folds = (0..folds.len()).filter(|&k| !errors[g * folds.len() + k][l].1).count();
            let mse = fold_mse.iter().sum::<f64>() / folds.len() as f64;
            table.push(CvPoint { lambda, gamma: *gamma, mse, fold_mse, unconverged_folds });
        }
    }
    let best = select_best(&table);
    Ok(CvResult { best_lambda: best.lambda, best_gamma: best.gamma, table })
}

/// Smallest MSE; exact ties go to the larger λ, then the larger γ.
fn select_best(table: &[CvPoint]) -> &CvPoint {
    table
        .iter()
        .min_by(|a, b| {
            a.mse
                .total_cmp(&b.mse)
                .then(b.lambda.total_cmp(&a.lambda))
                .then(b.gamma.total_cmp(&a.gamma))
        })
        .expect("non-empty table")
}

/// Cross-validates and refits on the full sample at the selected point.
pub fn fit_cross_validated(
    problem: &DesignProblem,
    template: &PenaltyConfig,
    cv: &CvConfig,
    cfg: &SolverConfig,
) -> Result<(SgLassoFit, CvResult)> {
    let res = cross_validate(problem, template, cv, cfg)?;
    let pen = template.with_gamma(res.best_gamma).with_lambda(res.best_lambda);
    let fit = SgLassoEstimator::new(problem)?.fit(&pen, cfg, None)?;
    Ok((fit, res))
}

/// `‖residuals‖²_n + 2λΩ(β̂_std)`, recomputed from a fit.
pub fn fit_objective(fit: &SgLassoFit) -> Result<f64> {
    let n = fit.residuals.len() as f64;
    Ok(fit.residuals.norm_squared() / n
        + 2.0 * fit.penalty.lambda * penalty_value(fit.standardized_slopes.as_slice(), &fit.penalty)?)
}
