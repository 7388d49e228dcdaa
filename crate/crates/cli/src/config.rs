//! Run configuration: a TOML file, flat `--set section.key=value` overrides,
//! then command-line flags, in that order of precedence (flags win).
//!
//! Every section rejects unknown keys.

use serde::{Deserialize, Serialize};
use sgl_panel::estimators::{CvConfig, LambdaGrid};
use sgl_panel::inference::NodewiseLambda;
use sgl_panel::simulate::{DgpConfig, EstimatorKind, KernelChoice, Pooling};
use sgl_panel::solver::SolverConfig;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorChoice {
    /// Pooled sg-LASSO-MIDAS with one common intercept.
    PooledSgl,
    /// Fixed-effects sg-LASSO-MIDAS.
    FeSgl,
    /// Pooled LASSO on the unrestricted lag design.
    LassoUmidas,
}

impl EstimatorChoice {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorChoice::PooledSgl => "pooled-sgl",
            EstimatorChoice::FeSgl => "fe-sgl",
            EstimatorChoice::LassoUmidas => "lasso-umidas",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum KernelArg {
    Parzen,
    Qs,
}

impl From<KernelArg> for KernelChoice {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Parzen => KernelChoice::Parzen,
            KernelArg::Qs => KernelChoice::Qs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataSection,
    pub fit: FitSection,
    pub cv: CvSection,
    pub solver: SolverSection,
    pub test: TestSection,
    pub simulate: SimulateSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// Forecast horizon `h`: row `t` pairs `y_{t+h}` with period-`t` covariates.
    pub horizon: usize,
    /// Lags of the response added as predictors.
    pub response_lags: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        Self { horizon: 0, response_lags: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub estimator: EstimatorChoice,
    /// Legendre functions per covariate, capped at each covariate's `m`.
    pub dictionary_functions: usize,
    /// Fixed penalty level; cross-validated when absent.
    pub lambda: Option<f64>,
    /// Fixed mixing weight; cross-validated over `cv.gamma_grid` when absent.
    pub gamma: Option<f64>,
}

impl Default for FitSection {
    fn default() -> Self {
        Self { estimator: EstimatorChoice::PooledSgl, dictionary_functions: 4, lambda: None, gamma: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvSection {
    pub n_folds: usize,
    pub n_lambda: usize,
    /// Smallest λ on the path as a fraction of `λ_max`.
    pub ratio: f64,
    pub gamma_grid: Vec<f64>,
}

impl Default for CvSection {
    fn default() -> Self {
        let d = CvConfig::default();
        let LambdaGrid::Path { n_lambda, ratio } = d.lambda_grid else { unreachable!() };
        Self { n_folds: d.n_folds, n_lambda, ratio, gamma_grid: d.gamma_grid }
    }
}

impl CvSection {
    pub fn to_config(&self) -> CvConfig {
        CvConfig {
            n_folds: self.n_folds,
            lambda_grid: LambdaGrid::Path { n_lambda: self.n_lambda, ratio: self.ratio },
            gamma_grid: self.gamma_grid.clone(),
        }
    }

    pub fn nodewise(&self, fixed: Option<f64>) -> NodewiseLambda {
        match fixed {
            Some(l) => NodewiseLambda::Fixed(l),
            None => NodewiseLambda::CrossValidated { n_folds: self.n_folds, n_lambda: self.n_lambda, ratio: self.ratio },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub kkt_tolerance: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self { max_iterations: d.max_iterations, tolerance: d.tolerance, kkt_tolerance: d.kkt_tolerance }
    }
}

impl SolverSection {
    pub fn to_config(&self) -> SolverConfig {
        SolverConfig {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            kkt_tolerance: self.kkt_tolerance,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TestSection {
    /// Covariates to test; every high-frequency covariate when empty.
    pub covariates: Vec<String>,
    pub kernels: Vec<KernelChoice>,
    pub bandwidths: Vec<f64>,
    /// Fixed nodewise λ; cross-validated with the `cv` settings when absent.
    pub nodewise_lambda: Option<f64>,
}

impl Default for TestSection {
    fn default() -> Self {
        Self {
            covariates: Vec::new(),
            kernels: vec![KernelChoice::Parzen, KernelChoice::Qs],
            bandwidths: vec![10.0, 20.0, 30.0],
            nodewise_lambda: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub replications: usize,
    pub estimators: Vec<EstimatorKind>,
    pub poolings: Vec<Pooling>,
    pub kernels: Vec<KernelChoice>,
    pub bandwidths: Vec<f64>,
    pub weight_scales: Vec<f64>,
    pub level: f64,
    pub nodewise_lambda: Option<f64>,
    /// `weight_scale` and `seed` are set per cell and replication.
    pub dgp: DgpConfig,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            replications: 500,
            estimators: vec![EstimatorKind::SgLassoMidas, EstimatorKind::LassoUmidas],
            poolings: vec![Pooling::Pooled, Pooling::Individual],
            kernels: vec![KernelChoice::Parzen, KernelChoice::Qs],
            bandwidths: vec![10.0, 20.0, 30.0],
            weight_scales: vec![0.0, 0.2, 0.25, 1.0 / 3.0],
            level: 0.05,
            nodewise_lambda: None,
            dgp: DgpConfig::default(),
        }
    }
}

/// Parses the optional config file and applies `key=value` overrides.
pub fn load(file: Option<&str>, sets: &[String]) -> Result<RunConfig, CliError> {
    let mut table = match file {
        Some(text) => text.parse::<toml::Table>().map_err(|e| CliError::Input(format!("config: {e}")))?,
        None => toml::Table::new(),
    };
    for s in sets {
        apply_set(&mut table, s)?;
    }
    toml::Value::Table(table).try_into().map_err(|e| CliError::Input(format!("config: {e}")))
}

fn apply_set(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Input(format!("--set expects key=value, got `{assignment}`")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Input(format!("--set: malformed key `{key}`")));
    }
    // TOML literal if it parses as one, bare string otherwise.
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut node = table;
    for p in parents {
        let entry = node.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| CliError::Input(format!("--set: `{p}` is not a section")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}
