//! Proximal gradient solver for
//!
//! ```text
//! min_{a, b}  ‖y - intercept(a) - Xb‖²_n + 2λ Ω(b)
//! ```
//!
//! Intercepts are partialled out before the iterations (global demeaning
//! for a pooled intercept, entity demeaning for fixed effects) and recovered
//! from their normal equations afterwards. Each step takes
//! `b⁺ = prox_{2ηλΩ}(z - η∇f(z))` with a backtracking step size `η` and,
//! optionally, Nesterov momentum with function-value restarts.
//!
//! When the penalty is separable (`γ = 1`, or no group holds more than one
//! penalized coefficient) and the Gram form is available, cyclic coordinate
//! descent with covariance updates is used instead: each coordinate update
//! is exact and costs one column of the Gram matrix.
//!
//! All reductions run in a fixed order on one thread, so results are
//! bit-for-bit reproducible.

mod least_squares;
pub mod penalty;

use nalgebra::{DMatrix, DVector};

use crate::design::{DesignProblem, InterceptMode};
use crate::error::{Error, Result};
pub(crate) use least_squares::LeastSquares;
pub use penalty::{dual_norm, group_dual_norm, kkt_violation, penalty_value, prox_sg, soft_threshold, PenaltyConfig};
use penalty::{penalty_unchecked, prox_masked};

/// Backtracking parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRule {
    /// Starting step; `None` uses `1/(2 L̂)` with `L̂` a power-iteration
    /// estimate of the largest eigenvalue of `XᵀX/n`.
    pub initial_step: Option<f64>,
    pub shrink: f64,
    /// A step is accepted when `f(z + d) ≤ f(z) + ∇f(z)ᵀd + (1 - c)|d|²/(2η)`.
    pub sufficient_decrease: f64,
}

impl Default for StepRule {
    fn default() -> Self {
        Self { initial_step: None, shrink: 0.5, sufficient_decrease: 1e-4 }
    }
}

/// Which iteration scheme [`PreparedProblem::solve`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Algorithm {
    /// Coordinate descent when the penalty is separable and the Gram form
    /// is stored, proximal gradient otherwise.
    #[default]
    Auto,
    ProximalGradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Stop once the relative objective change falls below this value and
    /// the KKT residual is below `kkt_tolerance`.
    pub tolerance: f64,
    /// Defaults to `max(10 · tolerance, 1e-6)`.
    pub kkt_tolerance: Option<f64>,
    pub step: StepRule,
    pub acceleration: bool,
    /// Keep the objective value after every iteration.
    pub record_trace: bool,
    pub algorithm: Algorithm,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            tolerance: 1e-8,
            kkt_tolerance: None,
            step: StepRule::default(),
            acceleration: true,
            record_trace: false,
            algorithm: Algorithm::Auto,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be >= 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be > 0".into()));
        }
        if !(self.step.shrink > 0.0 && self.step.shrink < 1.0) {
            return Err(Error::InvalidArgument("step shrink factor must lie in (0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.step.sufficient_decrease) {
            return Err(Error::InvalidArgument("sufficient decrease constant must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn kkt_threshold(&self) -> f64 {
        self.kkt_tolerance.unwrap_or((10.0 * self.tolerance).max(1e-6))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    /// Slope coefficients on the scale of the design passed in.
    pub coefficients: DVector<f64>,
    /// Empty, one pooled intercept, or one per entity.
    pub intercepts: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest optimality-condition violation, divided by `max(1, ‖y‖_n)`.
    pub kkt_residual: f64,
    /// Objective after each iteration when `record_trace` is set.
    pub trace: Vec<f64>,
}

/// A design with intercepts partialled out, ready for repeated solves.
#[derive(Debug, Clone)]
pub struct PreparedProblem {
    ls: LeastSquares,
    intercept: InterceptMode,
    /// One row per intercept: the column means that were removed.
    x_means: DMatrix<f64>,
    y_means: Vec<f64>,
}

impl PreparedProblem {
    pub fn new(problem: &DesignProblem) -> Result<Self> {
        let x = problem.design();
        let y = problem.response();
        let p = x.ncols();
        let (n_blocks, block_len) = match problem.intercept() {
            InterceptMode::None => {
                return Ok(Self {
                    ls: LeastSquares::from_data(x.clone(), y.clone()),
                    intercept: InterceptMode::None,
                    x_means: DMatrix::zeros(0, p),
                    y_means: Vec::new(),
                });
            }
            InterceptMode::Pooled => (1, problem.n_obs()),
            InterceptMode::FixedEffects => (problem.n_entities(), problem.n_periods()),
        };
        let mut xc = x.clone();
        let mut yc = y.clone();
        let mut x_means = DMatrix::zeros(n_blocks, p);
        let mut y_means = Vec::with_capacity(n_blocks);
        for blk in 0..n_blocks {
            let r0 = blk * block_len;
            let ym = yc.rows(r0, block_len).mean();
            yc.rows_mut(r0, block_len).add_scalar_mut(-ym);
            y_means.push(ym);
            for j in 0..p {
                let mut col = xc.view_mut((r0, j), (block_len, 1));
                let m = col.mean();
                col.add_scalar_mut(-m);
                x_means[(blk, j)] = m;
            }
        }
        Ok(Self { ls: LeastSquares::from_data(xc, yc), intercept: problem.intercept(), x_means, y_means })
    }

    /// Wraps precomputed second moments of an intercept-free problem.
    pub(crate) fn from_gram(gram: DMatrix<f64>, cross: DVector<f64>, yy: f64, n: usize) -> Self {
        let p = cross.len();
        Self {
            ls: LeastSquares::from_gram(gram, cross, yy, n),
            intercept: InterceptMode::None,
            x_means: DMatrix::zeros(0, p),
            y_means: Vec::new(),
        }
    }

    pub fn n_coefficients(&self) -> usize {
        self.ls.dim()
    }

    fn check(&self, penalty: &PenaltyConfig) -> Result<()> {
        if penalty.n_coefficients() != self.ls.dim() {
            return Err(Error::DimensionMismatch(format!(
                "penalty covers {} coefficients, design has {}",
                penalty.n_coefficients(),
                self.ls.dim()
            )));
        }
        Ok(())
    }

    fn unpenalized_start(&self, penalty: &PenaltyConfig) -> DVector<f64> {
        let free: Vec<usize> = (0..penalty.n_coefficients()).filter(|&j| !penalty.penalized[j]).collect();
        self.ls.restricted_least_squares(&free)
    }

    /// Smallest λ at which every penalized coefficient is zero: the dual norm
    /// of `Xᵀr/n`, with `r` the residual after fitting the unpenalized columns.
    pub fn lambda_max(&self, penalty: &PenaltyConfig) -> Result<f64> {
        self.check(penalty)?;
        let b0 = self.unpenalized_start(penalty);
        let img = self.ls.image(&b0);
        let u = self.ls.gradient(&img) * -0.5;
        Ok(dual_norm(u.as_slice(), penalty))
    }

    fn recover_intercepts(&self, b: &DVector<f64>) -> Vec<f64> {
        (0..self.y_means.len()).map(|k| self.y_means[k] - self.x_means.row(k).dot(&b.transpose())).collect()
    }

    /// Runs the solver from `warm_start` (or from the unpenalized fit with all
    /// penalized coefficients at zero).
    pub fn solve(
        &self,
        penalty: &PenaltyConfig,
        cfg: &SolverConfig,
        warm_start: Option<&DVector<f64>>,
    ) -> Result<SolverResult> {
        self.check(penalty)?;
        cfg.validate()?;
        let p = self.ls.dim();
        let start = match warm_start {
            Some(w) if w.len() != p => {
                return Err(Error::DimensionMismatch(format!("warm start has length {}, expected {p}", w.len())))
            }
            Some(w) => w.clone(),
            None => self.unpenalized_start(penalty),
        };
        let use_cd = cfg.algorithm == Algorithm::Auto && penalty.is_separable() && self.ls.gram_parts().is_some();
        let (coefficients, objective, iterations, converged, kkt_residual, trace) = if use_cd {
            coordinate_descent(&self.ls, penalty, cfg, start)
        } else {
            proximal_gradient(&self.ls, penalty, cfg, start)
        };
        let intercepts = self.recover_intercepts(&coefficients);
        Ok(SolverResult { coefficients, intercepts, objective, iterations, converged, kkt_residual, trace })
    }

    /// Warm-started solves over `lambdas` in the given order.
    pub fn path(&self, template: &PenaltyConfig, lambdas: &[f64], cfg: &SolverConfig) -> Result<Vec<SolverResult>> {
        let mut out: Vec<SolverResult> = Vec::with_capacity(lambdas.len());
        for &lam in lambdas {
            let warm = out.last().map(|r| r.coefficients.clone());
            out.push(self.solve(&template.with_lambda(lam), cfg, warm.as_ref())?);
        }
        Ok(out)
    }

    pub fn intercept_mode(&self) -> InterceptMode {
        self.intercept
    }
}

type RawOutcome = (DVector<f64>, f64, usize, bool, f64, Vec<f64>);

fn proximal_gradient(ls: &LeastSquares, penalty: &PenaltyConfig, cfg: &SolverConfig, start: DVector<f64>) -> RawOutcome {
    let lam2 = 2.0 * penalty.lambda;
    let objective = |b: &DVector<f64>, img: &DVector<f64>| ls.loss(b, img) + lam2 * penalty_unchecked(b.as_slice(), penalty);
    let kkt_scale = ls.response_energy().sqrt().max(1.0);
    let kkt_tol = cfg.kkt_threshold();
    let c = cfg.step.sufficient_decrease;

    let mut eta = cfg.step.initial_step.unwrap_or_else(|| {
        let l = ls.top_eigenvalue();
        if l > 0.0 { 1.0 / (2.0 * l) } else { 1.0 }
    });

    let mut x = start;
    let mut img_x = ls.image(&x);
    let mut f_x = objective(&x, &img_x);
    let mut z = x.clone();
    let mut img_z = img_x.clone();
    let mut t = 1.0_f64;
    let mut trace = Vec::new();
    let mut kkt = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    // Cheap exit when the starting point is already optimal (e.g. λ ≥ λ_max).
    let g0 = ls.gradient(&img_x);
    if kkt_violation(&x, &g0, penalty) / kkt_scale <= kkt_tol {
        kkt = kkt_violation(&x, &g0, penalty) / kkt_scale;
        return (x, f_x, 0, true, kkt, trace);
    }

    while iterations < cfg.max_iterations {
        iterations += 1;
        let grad = ls.gradient(&img_z);
        let (x_new, img_new) = loop {
            let mut cand = &z - &grad * eta;
            prox_masked(cand.as_mut_slice(), lam2 * eta, penalty);
            let img_cand = ls.image(&cand);
            let d = &cand - &z;
            let dd = d.norm_squared();
            let curv = ls.curvature(&d, &(&img_cand - &img_z));
            if dd == 0.0 || curv <= (1.0 - c) * dd / (2.0 * eta) || eta < 1e-300 {
                break (cand, img_cand);
            }
            eta *= cfg.step.shrink;
        };
        let f_new = objective(&x_new, &img_new);

        if cfg.acceleration && t > 1.0 && f_new > f_x {
            // Momentum overshot: restart from the last iterate.
            t = 1.0;
            z = x.clone();
            img_z = img_x.clone();
            if cfg.record_trace {
                trace.push(f_x);
            }
            continue;
        }

        let change = (f_x - f_new).abs();
        let scale = f_new.abs().max(f_x.abs());
        let small_change = change <= cfg.tolerance * scale || scale == 0.0;

        if cfg.acceleration {
            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_new;
            z = &x_new + (&x_new - &x) * beta;
            img_z = &img_new + (&img_new - &img_x) * beta;
            t = t_new;
        } else {
            z = x_new.clone();
            img_z = img_new.clone();
        }
        x = x_new;
        img_x = img_new;
        f_x = f_new;
        if cfg.record_trace {
            trace.push(f_x);
        }

        if small_change {
            kkt = kkt_violation(&x, &ls.gradient(&img_x), penalty) / kkt_scale;
            if kkt <= kkt_tol {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        kkt = kkt_violation(&x, &ls.gradient(&img_x), penalty) / kkt_scale;
    }
    (x, f_x, iterations, converged, kkt, trace)
}

fn coordinate_descent(ls: &LeastSquares, penalty: &PenaltyConfig, cfg: &SolverConfig, start: DVector<f64>) -> RawOutcome {
    let (gram, cross) = ls.gram_parts().expect("coordinate descent needs the Gram form");
    let p = cross.len();
    let yy = ls.response_energy();
    let thresholds: Vec<f64> = (0..p).map(|j| if penalty.penalized[j] { penalty.lambda } else { 0.0 }).collect();
    let kkt_scale = yy.sqrt().max(1.0);
    let kkt_tol = cfg.kkt_threshold();

    let mut b = start;
    // r = Xᵀy/n - (XᵀX/n) b, so the gradient is -2r.
    let mut r = cross - gram * &b;
    // ‖y - Xb‖²_n = yy - cᵀb - rᵀb
    let objective = |b: &DVector<f64>, r: &DVector<f64>| {
        (yy - b.dot(cross) - b.dot(r)).max(0.0) + 2.0 * penalty.lambda * penalty_unchecked(b.as_slice(), penalty)
    };
    let kkt_of = |b: &DVector<f64>, r: &DVector<f64>| kkt_violation(b, &(r * -2.0), penalty) / kkt_scale;
    let mut f = objective(&b, &r);
    let mut kkt = kkt_of(&b, &r);
    let mut trace = Vec::new();
    if kkt <= kkt_tol {
        return (b, f, 0, true, kkt, trace);
    }

    let all: Vec<usize> = (0..p).collect();
    let sweep = |coords: &[usize], b: &mut DVector<f64>, r: &mut DVector<f64>| {
        for &j in coords {
            let gjj = gram[(j, j)];
            if gjj <= 0.0 {
                continue;
            }
            let old = b[j];
            let new = soft_threshold(r[j] + gjj * old, thresholds[j]) / gjj;
            if new != old {
                b[j] = new;
                r.axpy(old - new, &gram.column(j), 1.0);
            }
        }
    };
    let small = |before: f64, after: f64| {
        let scale = before.abs().max(after.abs());
        scale == 0.0 || (before - after).abs() <= cfg.tolerance * scale
    };

    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let before = f;
        sweep(&all, &mut b, &mut r);
        f = objective(&b, &r);
        if cfg.record_trace {
            trace.push(f);
        }
        if small(before, f) {
            kkt = kkt_of(&b, &r);
            if kkt <= kkt_tol {
                converged = true;
                break;
            }
        }
        // Iterate on the current support until it settles.
        let active: Vec<usize> = (0..p).filter(|&j| b[j] != 0.0).collect();
        while iterations < cfg.max_iterations {
            iterations += 1;
            let before = f;
            sweep(&active, &mut b, &mut r);
            f = objective(&b, &r);
            if cfg.record_trace {
                trace.push(f);
            }
            if small(before, f) {
                break;
            }
        }
    }
    if !converged {
        kkt = kkt_of(&b, &r);
    }
    (b, f, iterations, converged, kkt, trace)
}

/// Solves one penalized problem; intercepts follow `problem.intercept()`.
pub fn solve(
    problem: &DesignProblem,
    penalty: &PenaltyConfig,
    cfg: &SolverConfig,
    warm_start: Option<&DVector<f64>>,
) -> Result<SolverResult> {
    PreparedProblem::new(problem)?.solve(penalty, cfg, warm_start)
}

/// Geometric grid of `n_lambda` values from `lambda_max` down to `ratio · lambda_max`.
pub fn lambda_grid(lambda_max: f64, n_lambda: usize, ratio: f64) -> Result<Vec<f64>> {
    if n_lambda == 0 {
        return Err(Error::InvalidArgument("n_lambda must be >= 1".into()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!("ratio must lie in (0, 1), got {ratio}")));
    }
    if n_lambda == 1 {
        return Ok(vec![lambda_max]);
    }
    let step = ratio.ln() / (n_lambda - 1) as f64;
    Ok((0..n_lambda).map(|k| lambda_max * (step * k as f64).exp()).collect())
}

/// Regularization path from `λ_max` down to `ratio · λ_max`, warm-started
/// in decreasing order.
pub fn lambda_path(
    problem: &DesignProblem,
    template: &PenaltyConfig,
    n_lambda: usize,
    ratio: f64,
    cfg: &SolverConfig,
) -> Result<Vec<(f64, SolverResult)>> {
    let prepared = PreparedProblem::new(problem)?;
    let grid = lambda_grid(prepared.lambda_max(template)?, n_lambda, ratio)?;
    let fits = prepared.path(template, &grid, cfg)?;
    Ok(grid.into_iter().zip(fits).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::GroupStructure;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_problem(n: usize, p: usize, group_size: usize, seed: u64) -> DesignProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
        let beta = DVector::from_fn(p, |j, _| if j < 3 { 1.0 - j as f64 * 0.4 } else { 0.0 });
        let noise = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let y = &x * beta + noise;
        let sizes: Vec<usize> = (0..p.div_ceil(group_size)).map(|g| group_size.min(p - g * group_size)).collect();
        let labels = (0..sizes.len()).map(|g| format!("g{g}")).collect();
        let groups = GroupStructure::contiguous(&sizes, labels).unwrap();
        DesignProblem::new(y, x, groups, InterceptMode::None, 1, n).unwrap()
    }

    fn tight() -> SolverConfig {
        SolverConfig { tolerance: 1e-13, kkt_tolerance: Some(1e-10), max_iterations: 100_000, ..Default::default() }
    }

    #[test]
    fn zero_solution_at_lambda_max() {
        let prob = random_problem(40, 9, 3, 1);
        for gamma in [0.0, 0.3, 1.0] {
            let pen = PenaltyConfig::new(0.0, gamma, prob.groups().clone()).unwrap();
            let prep = PreparedProblem::new(&prob).unwrap();
            let lmax = prep.lambda_max(&pen).unwrap();
            let at = prep.solve(&pen.with_lambda(lmax * (1.0 + 1e-9)), &tight(), None).unwrap();
            assert!(at.coefficients.iter().all(|&b| b == 0.0), "gamma {gamma}");
            assert!(at.converged);
            let below = prep.solve(&pen.with_lambda(lmax * 0.95), &tight(), None).unwrap();
            assert!(below.coefficients.iter().any(|&b| b != 0.0));
        }
    }

    #[test]
    fn unpenalized_limit_is_ols() {
        let prob = random_problem(50, 6, 2, 2);
        let pen = PenaltyConfig::new(0.0, 0.5, prob.groups().clone()).unwrap();
        let res = solve(&prob, &pen, &tight(), None).unwrap();
        let x = prob.design();
        let ols = (x.tr_mul(x)).cholesky().unwrap().solve(&x.tr_mul(prob.response()));
        assert!((res.coefficients - ols).amax() < 1e-6);
    }

    #[test]
    fn pooled_intercept_is_recovered() {
        let prob = random_problem(30, 4, 2, 3);
        let shifted = prob.with_response(prob.response().add_scalar(5.0)).with_intercept(InterceptMode::Pooled);
        let pen = PenaltyConfig::new(1e6, 0.5, prob.groups().clone()).unwrap();
        let res = solve(&shifted, &pen, &tight(), None).unwrap();
        assert!(res.coefficients.iter().all(|&b| b == 0.0));
        assert!((res.intercepts[0] - shifted.response().mean()).abs() < 1e-12);
    }

    #[test]
    fn objective_monotone_without_acceleration() {
        let prob = random_problem(60, 12, 4, 4);
        let pen = PenaltyConfig::new(0.05, 0.5, prob.groups().clone()).unwrap();
        let cfg = SolverConfig { acceleration: false, record_trace: true, algorithm: Algorithm::ProximalGradient, ..tight() };
        let res = solve(&prob, &pen, &cfg, None).unwrap();
        assert!(res.converged);
        for w in res.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-14 * w[0].abs());
        }
    }

    #[test]
    fn accelerated_and_plain_agree() {
        let prob = random_problem(60, 12, 4, 5);
        let pen = PenaltyConfig::new(0.03, 0.7, prob.groups().clone()).unwrap();
        let a = solve(&prob, &pen, &tight(), None).unwrap();
        let b = solve(&prob, &pen, &SolverConfig { acceleration: false, algorithm: Algorithm::ProximalGradient, ..tight() }, None).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-10);
        assert!((a.coefficients - b.coefficients).amax() < 1e-6);
        assert!(a.iterations < b.iterations);
    }

    #[test]
    fn direct_form_matches_gram_form() {
        // p > 2n forces the direct representation.
        let wide = random_problem(10, 24, 4, 6);
        let pen = PenaltyConfig::new(0.05, 0.5, wide.groups().clone()).unwrap();
        let direct = solve(&wide, &pen, &tight(), None).unwrap();
        let x = wide.design();
        let n = x.nrows() as f64;
        let gram = PreparedProblem::from_gram(x.tr_mul(x) / n, x.tr_mul(wide.response()) / n, wide.response().norm_squared() / n, 10);
        let via_gram = gram.solve(&pen, &tight(), None).unwrap();
        assert!((direct.objective - via_gram.objective).abs() < 1e-9);
    }

    #[test]
    fn group_order_permutation_invariance() {
        let prob = random_problem(50, 9, 3, 7);
        let pen = PenaltyConfig::new(0.04, 0.4, prob.groups().clone()).unwrap();
        let base = solve(&prob, &pen, &tight(), None).unwrap();
        let perm: Vec<usize> = vec![6, 7, 8, 0, 1, 2, 3, 4, 5];
        let x = prob.design().select_columns(&perm);
        let groups = GroupStructure::contiguous(&[3, 3, 3], vec!["c".into(), "a".into(), "b".into()]).unwrap();
        let permuted = DesignProblem::new(prob.response().clone(), x, groups, InterceptMode::None, 1, 50).unwrap();
        let res = solve(&permuted, &pen.clone_with_groups(permuted.groups().clone()), &tight(), None).unwrap();
        assert!((base.objective - res.objective).abs() < 1e-8);
        for (k, &j) in perm.iter().enumerate() {
            assert!((res.coefficients[k] - base.coefficients[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn entity_order_invariance() {
        let prob = random_problem(40, 6, 2, 8);
        let panel = DesignProblem::new(
            prob.response().clone(),
            prob.design().clone(),
            prob.groups().clone(),
            InterceptMode::FixedEffects,
            4,
            10,
        )
        .unwrap();
        let pen = PenaltyConfig::new(0.02, 0.5, prob.groups().clone()).unwrap();
        let a = solve(&panel, &pen, &tight(), None).unwrap();
        let b = solve(&panel.select_entities(&[2, 0, 3, 1]), &pen, &tight(), None).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-8);
        assert!((a.coefficients - b.coefficients).amax() < 1e-6);
        assert!((a.intercepts[2] - b.intercepts[0]).abs() < 1e-6);
    }

    #[test]
    fn lambda_grid_and_path() {
        let grid = lambda_grid(2.0, 5, 0.01).unwrap();
        assert_eq!(grid[0], 2.0);
        assert!((grid[4] - 0.02).abs() < 1e-15);
        for w in grid.windows(2) {
            assert!(w[1] < w[0]);
            assert!((w[1] / w[0] - grid[1] / grid[0]).abs() < 1e-12);
        }
        assert!(lambda_grid(1.0, 0, 0.5).is_err());
        assert!(lambda_grid(1.0, 3, 1.0).is_err());

        let prob = random_problem(40, 12, 3, 9);
        let template = PenaltyConfig::new(0.0, 0.5, prob.groups().clone()).unwrap();
        let single = lambda_path(&prob, &template, 1, 0.1, &tight()).unwrap();
        assert!(single[0].1.coefficients.iter().all(|&b| b == 0.0));

        let path = lambda_path(&prob, &template, 20, 0.01, &SolverConfig::default()).unwrap();
        let nnz: Vec<usize> = path.iter().map(|(_, r)| r.coefficients.iter().filter(|&&b| b != 0.0).count()).collect();
        let violations = nnz.windows(2).filter(|w| w[1] < w[0]).count();
        assert!(violations <= 1, "{nnz:?}");
    }

    #[test]
    fn rejects_mismatched_penalty() {
        let prob = random_problem(20, 4, 2, 10);
        let pen = PenaltyConfig::new(0.1, 0.5, GroupStructure::singletons(vec!["a".into()])).unwrap();
        assert!(matches!(solve(&prob, &pen, &SolverConfig::default(), None), Err(Error::DimensionMismatch(_))));
    }
}
