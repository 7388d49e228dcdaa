//! Monte Carlo experiments on a pooled MIDAS panel:
//!
//! ```text
//! y_it = α_i + ρ_y y_{i,t-1} + (1/m) Σ_j a·ω((j-1)/(m-1)) x_{i,t-(j-1)/m,1} + u_it
//! ```
//!
//! with `ω` the Beta(3,3) density, `u_it ~ N(0, σ²)` and every covariate an
//! independent high-frequency AR(1) chain. Only the first covariate enters
//! the response; the experiment records how often the Granger-causality
//! test on that covariate rejects.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{build_midas_design, build_umidas_design, Covariate, DesignProblem, PanelDataset};
use crate::dictionary::{beta_weights_on, build_dictionary, WeightGrid};
use crate::error::{Error, Result};
use crate::estimators::{fit_cross_validated, CvConfig, SgLassoFit};
use crate::inference::{granger_test, inference_design, nodewise_precision, HacConfig, Kernel, NodewiseLambda};
use crate::solver::{PenaltyConfig, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DgpConfig {
    pub n_entities: usize,
    pub n_periods: usize,
    /// Number of high-frequency covariates, the relevant one included.
    pub n_covariates: usize,
    /// High-frequency lags recorded per low-frequency period.
    pub lags: usize,
    /// High-frequency steps between consecutive low-frequency periods.
    pub hf_per_period: usize,
    pub rho_y: f64,
    pub rho_x: f64,
    pub sigma2_u: f64,
    pub intercept_range: (f64, f64),
    /// One intercept for all entities instead of one draw per entity.
    pub common_intercept: bool,
    /// Scale `a` of the Beta weights of the relevant covariate.
    pub weight_scale: f64,
    /// Zero-based index of the covariate that enters the response.
    pub relevant_covariate: usize,
    pub beta_shape: (f64, f64),
    pub weight_grid: WeightGridChoice,
    pub burn_in_x: usize,
    pub burn_in_y: usize,
    pub seed: u64,
}

/// Serializable mirror of [`WeightGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WeightGridChoice {
    #[default]
    Endpoints,
    LeftAligned,
}

impl From<WeightGridChoice> for WeightGrid {
    fn from(g: WeightGridChoice) -> Self {
        match g {
            WeightGridChoice::Endpoints => WeightGrid::Endpoints,
            WeightGridChoice::LeftAligned => WeightGrid::LeftAligned,
        }
    }
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            n_entities: 30,
            n_periods: 50,
            n_covariates: 21,
            lags: 12,
            hf_per_period: 12,
            rho_y: 0.15,
            rho_x: 0.7,
            sigma2_u: 4.0,
            intercept_range: (-4.0, 4.0),
            common_intercept: true,
            weight_scale: 0.0,
            relevant_covariate: 0,
            beta_shape: (3.0, 3.0),
            weight_grid: WeightGridChoice::Endpoints,
            burn_in_x: 200,
            burn_in_y: 50,
            seed: 0,
        }
    }
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_entities == 0 || self.n_periods == 0 || self.n_covariates == 0 || self.lags == 0 || self.hf_per_period == 0 {
            return Err(Error::InvalidArgument("N, T, K, m and the high-frequency step must all be >= 1".into()));
        }
        if !(self.rho_y.abs() < 1.0 && self.rho_x.abs() < 1.0) {
            return Err(Error::InvalidArgument("autoregressive coefficients must lie in (-1, 1)".into()));
        }
        if !(self.sigma2_u > 0.0) {
            return Err(Error::InvalidArgument("error variance must be > 0".into()));
        }
        if !(self.intercept_range.0 < self.intercept_range.1) {
            return Err(Error::InvalidArgument("intercept range must be increasing".into()));
        }
        if !(self.weight_scale >= 0.0 && self.weight_scale.is_finite()) {
            return Err(Error::InvalidArgument("weight scale must be finite and >= 0".into()));
        }
        if self.relevant_covariate >= self.n_covariates {
            return Err(Error::InvalidArgument("relevant covariate index out of range".into()));
        }
        Ok(())
    }
}

/// Name of covariate `k` (zero-based) in simulated panels.
pub fn covariate_name(k: usize) -> String {
    format!("x{}", k + 1)
}

/// Draws one panel. The draws do not depend on `weight_scale`, so panels
/// that differ only in `a` share every random number.
///
/// The result has `T` periods and one lag of the response (`y_lag1`) as an
/// extra predictor.
pub fn simulate_panel(cfg: &DgpConfig) -> Result<PanelDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (n, m, stride) = (cfg.n_entities, cfg.lags, cfg.hf_per_period);
    // One retained period more than T feeds the first lagged response.
    let kept = cfg.n_periods + 1;
    let total = cfg.burn_in_y + kept;
    let chain_len = cfg.burn_in_x + (m - 1) + (total - 1) * stride + 1;
    let hf_index = |s: usize, j: usize| cfg.burn_in_x + (m - 1) + s * stride - j;

    let weights: Vec<f64> = beta_weights_on(cfg.weight_grid.into(), m, cfg.beta_shape.0, cfg.beta_shape.1, cfg.weight_scale)?
        .into_iter()
        .map(|w| w / m as f64)
        .collect();
    let alpha_dist = Uniform::new(cfg.intercept_range.0, cfg.intercept_range.1).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let noise = Normal::new(0.0, cfg.sigma2_u.sqrt()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let common_alpha = alpha_dist.sample(&mut rng);

    let mut y = DMatrix::zeros(n, kept);
    let mut covs: Vec<Vec<DMatrix<f64>>> = vec![Vec::with_capacity(n); cfg.n_covariates];
    for i in 0..n {
        let alpha_i = alpha_dist.sample(&mut rng);
        let alpha = if cfg.common_intercept { common_alpha } else { alpha_i };
        let chains: Vec<Vec<f64>> = (0..cfg.n_covariates)
            .map(|_| {
                let mut x = 0.0;
                (0..chain_len)
                    .map(|_| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        x = cfg.rho_x * x + e;
                        x
                    })
                    .collect()
            })
            .collect();
        let relevant = &chains[cfg.relevant_covariate];
        let mut y_prev = 0.0;
        for s in 0..total {
            let signal: f64 = weights.iter().enumerate().map(|(j, w)| w * relevant[hf_index(s, j)]).sum();
            let y_s = alpha + cfg.rho_y * y_prev + signal + noise.sample(&mut rng);
            if s >= cfg.burn_in_y {
                y[(i, s - cfg.burn_in_y)] = y_s;
            }
            y_prev = y_s;
        }
        for (k, chain) in chains.iter().enumerate() {
            covs[k].push(DMatrix::from_fn(kept, m, |r, j| chain[hf_index(r + cfg.burn_in_y, j)]));
        }
    }
    let covariates = covs.into_iter().enumerate().map(|(k, v)| Covariate::new(covariate_name(k), v)).collect();
    PanelDataset::aligned(y, covariates, 0, 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// Legendre dictionary per covariate, sg-LASSO penalty.
    SgLassoMidas,
    /// One column per high-frequency lag, LASSO penalty.
    LassoUmidas,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    Pooled,
    /// Time-series regression on the first entity only.
    Individual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelChoice {
    Parzen,
    Qs,
}

impl From<KernelChoice> for Kernel {
    fn from(k: KernelChoice) -> Self {
        match k {
            KernelChoice::Parzen => Kernel::Parzen,
            KernelChoice::Qs => Kernel::QuadraticSpectral,
        }
    }
}

impl EstimatorKind {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::SgLassoMidas => "sg-lasso-midas",
            EstimatorKind::LassoUmidas => "lasso-umidas",
        }
    }
}

impl Pooling {
    pub fn label(self) -> &'static str {
        match self {
            Pooling::Pooled => "pooled",
            Pooling::Individual => "individual",
        }
    }
}

impl KernelChoice {
    pub fn label(self) -> &'static str {
        match self {
            KernelChoice::Parzen => "parzen",
            KernelChoice::Qs => "qs",
        }
    }
}

/// Tuning shared by every fit in an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    /// Legendre functions per covariate (degree + 1).
    pub dictionary_functions: usize,
    /// Cross-validation for sg-LASSO-MIDAS; LASSO-UMIDAS uses the same
    /// folds and λ grid with γ = 1.
    pub cv: CvConfig,
    pub nodewise: NodewiseLambda,
    pub solver: SolverConfig,
    pub level: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            dictionary_functions: 4,
            cv: CvConfig::default(),
            nodewise: NodewiseLambda::default(),
            solver: SolverConfig::default(),
            level: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Base DGP; `weight_scale` and `seed` are overridden per cell.
    pub dgp: DgpConfig,
    pub estimators: Vec<EstimatorKind>,
    pub poolings: Vec<Pooling>,
    pub kernels: Vec<KernelChoice>,
    pub bandwidths: Vec<f64>,
    pub weight_scales: Vec<f64>,
    pub replications: usize,
    pub base_seed: u64,
    pub fit: FitSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dgp: DgpConfig::default(),
            estimators: vec![EstimatorKind::SgLassoMidas, EstimatorKind::LassoUmidas],
            poolings: vec![Pooling::Pooled, Pooling::Individual],
            kernels: vec![KernelChoice::Parzen, KernelChoice::Qs],
            bandwidths: vec![10.0, 20.0, 30.0],
            weight_scales: vec![0.0, 0.2, 0.25, 1.0 / 3.0],
            replications: 500,
            base_seed: 0,
            fit: FitSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidArgument("replications must be >= 1".into()));
        }
        if self.estimators.is_empty() || self.poolings.is_empty() || self.kernels.is_empty() || self.bandwidths.is_empty() || self.weight_scales.is_empty()
        {
            return Err(Error::InvalidArgument("every grid dimension needs at least one value".into()));
        }
        if !(self.fit.level > 0.0 && self.fit.level < 1.0) {
            return Err(Error::InvalidArgument("nominal level must lie in (0, 1)".into()));
        }
        for &b in &self.bandwidths {
            HacConfig { kernel: Kernel::Parzen, bandwidth: b }.validate()?;
        }
        self.fit.cv.validate()?;
        self.fit.solver.validate()?;
        self.dgp.validate()
    }
}

/// Seed of replication `r`: consecutive integers from `base_seed`, each
/// expanded into an independent ChaCha stream by `seed_from_u64`.
pub fn replication_seed(base_seed: u64, r: usize) -> u64 {
    base_seed.wrapping_add(r as u64)
}

/// Aggregated outcome of one `(estimator, pooling, kernel, M_T, a)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub estimator: EstimatorKind,
    pub pooling: Pooling,
    pub kernel: KernelChoice,
    pub bandwidth: f64,
    pub weight_scale: f64,
    pub rejections: usize,
    /// Replications that produced a test decision.
    pub completed: usize,
    /// Replications lost to non-convergence or a singular covariance.
    pub failures: usize,
}

impl Cell {
    /// Rejection frequency over completed replications.
    pub fn frequency(&self) -> f64 {
        if self.completed == 0 { f64::NAN } else { self.rejections as f64 / self.completed as f64 }
    }

    /// `√(f(1-f)/R)` over completed replications.
    pub fn mc_standard_error(&self) -> f64 {
        let f = self.frequency();
        (f * (1.0 - f) / self.completed as f64).sqrt()
    }

    /// More than 1% of the replications failed.
    pub fn flagged(&self) -> bool {
        100 * self.failures > self.completed + self.failures
    }
}

/// One row of the long-format result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub estimator: EstimatorKind,
    pub pooling: Pooling,
    pub kernel: KernelChoice,
    pub bandwidth: f64,
    pub weight_scale: f64,
    pub statistic: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub cells: Vec<Cell>,
    pub replications: usize,
    pub base_seed: u64,
}

impl ExperimentResult {
    pub fn cell(&self, estimator: EstimatorKind, pooling: Pooling, kernel: KernelChoice, bandwidth: f64, weight_scale: f64) -> Option<&Cell> {
        self.cells.iter().find(|c| {
            c.estimator == estimator && c.pooling == pooling && c.kernel == kernel && c.bandwidth == bandwidth && c.weight_scale == weight_scale
        })
    }

    /// Long format: one record per cell and statistic.
    pub fn records(&self) -> Vec<ResultRecord> {
        let mut out = Vec::with_capacity(self.cells.len() * 6);
        for c in &self.cells {
            let stats = [
                ("frequency", c.frequency()),
                ("mc_se", c.mc_standard_error()),
                ("rejections", c.rejections as f64),
                ("completed", c.completed as f64),
                ("failures", c.failures as f64),
                ("flagged", if c.flagged() { 1.0 } else { 0.0 }),
            ];
            out.extend(stats.into_iter().map(|(s, v)| ResultRecord {
                estimator: c.estimator,
                pooling: c.pooling,
                kernel: c.kernel,
                bandwidth: c.bandwidth,
                weight_scale: c.weight_scale,
                statistic: s.to_string(),
                value: v,
            }));
        }
        out
    }

    /// Rejection frequencies laid out with bandwidths down and weight
    /// scales across, one block per pooling, estimator and kernel.
    pub fn format_table(&self) -> String {
        let mut out = String::new();
        let uniq = |f: &dyn Fn(&Cell) -> String| {
            let mut v: Vec<String> = Vec::new();
            for c in &self.cells {
                let k = f(c);
                if !v.contains(&k) {
                    v.push(k);
                }
            }
            v
        };
        let scales = uniq(&|c| format_scale(c.weight_scale));
        let bandwidths = uniq(&|c| format!("{}", c.bandwidth));
        let blocks = uniq(&|c| format!("{}|{}|{}", c.pooling.label(), c.estimator.label(), c.kernel.label()));
        out.push_str(&format!("Rejection frequencies, R = {}, base seed = {}\n", self.replications, self.base_seed));
        for block in blocks {
            out.push_str(&format!("\n{}\n", block.replace('|', " / ")));
            out.push_str(&format!("{:>8}", "M_T \\ a"));
            for s in &scales {
                out.push_str(&format!("{s:>9}"));
            }
            out.push('\n');
            for b in &bandwidths {
                out.push_str(&format!("{b:>8}"));
                for s in &scales {
                    let cell = self.cells.iter().find(|c| {
                        format!("{}|{}|{}", c.pooling.label(), c.estimator.label(), c.kernel.label()) == block
                            && format!("{}", c.bandwidth) == *b
                            && format_scale(c.weight_scale) == *s
                    });
                    match cell {
                        Some(c) => out.push_str(&format!("{:>8.3}{}", c.frequency(), if c.flagged() { "*" } else { " " })),
                        None => out.push_str(&format!("{:>9}", "-")),
                    }
                }
                out.push('\n');
            }
        }
        if self.cells.iter().any(Cell::flagged) {
            out.push_str("\n* more than 1% of replications failed\n");
        }
        out
    }
}

fn format_scale(a: f64) -> String {
    for (num, den) in [(1, 5), (1, 4), (1, 3)] {
        if (a - num as f64 / den as f64).abs() < 1e-12 {
            return format!("{num}/{den}");
        }
    }
    format!("{a}")
}

/// Columns of `problem` that belong to covariate `name` (as `Z` indices,
/// i.e. shifted by one for the intercept).
fn covariate_rows(problem: &DesignProblem, name: &str) -> Vec<usize> {
    let prefix = format!("{name}[");
    problem.column_names().iter().enumerate().filter(|(_, c)| c.starts_with(&prefix)).map(|(j, _)| j + 1).collect()
}

/// Fits one estimator and returns the test decision for every
/// `(kernel, bandwidth)` pair, `None` marking a failure.
fn test_decisions(
    data: &PanelDataset,
    estimator: EstimatorKind,
    pooling: Pooling,
    target: &str,
    hacs: &[HacConfig],
    settings: &FitSettings,
) -> Vec<Option<bool>> {
    let failed = vec![None; hacs.len()];
    let problem = match estimator {
        EstimatorKind::SgLassoMidas => build_dictionary(data.covariates()[0].lags(), settings.dictionary_functions)
            .and_then(|d| build_midas_design(data, &vec![d; data.covariates().len()])),
        EstimatorKind::LassoUmidas => build_umidas_design(data),
    };
    let Ok(mut problem) = problem else { return failed };
    if pooling == Pooling::Individual {
        problem = problem.select_entities(&[0]);
    }
    let cv = match estimator {
        EstimatorKind::SgLassoMidas => settings.cv.clone(),
        EstimatorKind::LassoUmidas => CvConfig { gamma_grid: vec![1.0], ..settings.cv.clone() },
    };
    let fitted: Result<SgLassoFit> = PenaltyConfig::new(0.0, 1.0, problem.groups().clone())
        .and_then(|template| fit_cross_validated(&problem, &template, &cv, &settings.solver))
        .map(|(fit, _)| fit);
    let fit = match fitted {
        Ok(f) if f.converged() => f,
        _ => return failed,
    };
    let rows = covariate_rows(&problem, target);
    let Ok(z) = inference_design(&problem, &fit) else { return failed };
    let Ok(precision) = nodewise_precision(&z, problem.n_periods(), &rows, &settings.nodewise, &settings.solver) else {
        return failed;
    };
    hacs.iter()
        .map(|hac| granger_test(&fit, &z, problem.n_periods(), &precision, hac).ok().map(|r| r.p_value < settings.level))
        .collect()
}

/// Outcome of one replication: a decision per cell in grid order.
fn run_replication(cfg: &ExperimentConfig, r: usize, hacs: &[HacConfig]) -> Vec<Option<bool>> {
    let target = covariate_name(cfg.dgp.relevant_covariate);
    let seed = replication_seed(cfg.base_seed, r);
    let mut out = Vec::new();
    for &a in &cfg.weight_scales {
        let dgp = DgpConfig { weight_scale: a, seed, ..cfg.dgp.clone() };
        let data = simulate_panel(&dgp);
        for &est in &cfg.estimators {
            for &pool in &cfg.poolings {
                match &data {
                    Ok(d) => out.extend(test_decisions(d, est, pool, &target, hacs, &cfg.fit)),
                    Err(_) => out.extend(std::iter::repeat_n(None, hacs.len())),
                }
            }
        }
    }
    out
}

/// Runs every replication (in parallel) and aggregates in replication order.
/// The result depends only on the configuration, not on the thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let hac_grid: Vec<(KernelChoice, f64)> =
        cfg.kernels.iter().flat_map(|&k| cfg.bandwidths.iter().map(move |&b| (k, b))).collect();
    let hacs: Vec<HacConfig> = hac_grid.iter().map(|&(k, b)| HacConfig { kernel: k.into(), bandwidth: b }).collect();

    let mut cells = Vec::new();
    for &a in &cfg.weight_scales {
        for &est in &cfg.estimators {
            for &pool in &cfg.poolings {
                for &(kernel, bandwidth) in &hac_grid {
                    cells.push(Cell {
                        estimator: est,
                        pooling: pool,
                        kernel,
                        bandwidth,
                        weight_scale: a,
                        rejections: 0,
                        completed: 0,
                        failures: 0,
                    });
                }
            }
        }
    }

    let outcomes: Vec<Vec<Option<bool>>> =
        (0..cfg.replications).into_par_iter().map(|r| run_replication(cfg, r, &hacs)).collect();
    for decisions in &outcomes {
        for (cell, d) in cells.iter_mut().zip(decisions) {
            match d {
                Some(true) => {
                    cell.rejections += 1;
                    cell.completed += 1;
                }
                Some(false) => cell.completed += 1,
                None => cell.failures += 1,
            }
        }
    }
    Ok(ExperimentResult { cells, replications: cfg.replications, base_seed: cfg.base_seed })
}
