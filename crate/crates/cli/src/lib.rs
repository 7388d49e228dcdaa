//! Command-line driver for `sgl-panel`: `fit`, `cv`, `test` and `simulate`.
//!
//! Artifacts go to `--output` (stdout when absent). When an artifact is
//! written to a file, a human-readable summary is printed to stdout.
//! Exit codes: 0 success, 1 input error, 2 numerical failure or
//! non-convergence (the artifact is still written).

pub mod artifacts;
pub mod config;
pub mod input;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sgl_panel::design::{build_midas_design, build_umidas_design, DesignProblem, InterceptMode, PanelDataset};
use sgl_panel::dictionary::build_dictionary;
use sgl_panel::estimators::{fit_cross_validated, CvResult, LambdaGrid, SgLassoEstimator, SgLassoFit};
use sgl_panel::inference::{granger_test, group_rows, inference_design, nodewise_precision, HacConfig};
use sgl_panel::simulate::{run_experiment, EstimatorKind, ExperimentConfig, FitSettings};
use sgl_panel::solver::PenaltyConfig;

use artifacts::{format_p_values, CvArtifact, FitArtifact, TestArtifact, TestCell, SCHEMA_VERSION};
use config::{EstimatorChoice, KernelArg, RunConfig};
use input::{read_panel, RawPanel};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<sgl_panel::Error> for CliError {
    fn from(e: sgl_panel::Error) -> Self {
        match e {
            sgl_panel::Error::NearSingularDesign { .. } | sgl_panel::Error::SingularCovariance(_) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sgl-panel", version, about = "Sparse-group LASSO for mixed-frequency panels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Fit an estimator and write its coefficients as JSON.
    Fit,
    /// Fit, then run debiased Granger-causality tests per covariate.
    Test,
    /// Cross-validate (λ, γ) and write the full table as JSON.
    Cv,
    /// Run a Monte Carlo experiment and write rejection frequencies as CSV.
    Simulate,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// Long-format panel CSV.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Artifact path; stdout when absent.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set cv.n_folds=5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Base seed of `simulate` (required there).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub estimator: Option<EstimatorChoice>,
    /// Single HAC kernel instead of the configured list.
    #[arg(long, global = true, value_enum)]
    pub kernel: Option<KernelArg>,
    /// Single HAC bandwidth M_T instead of the configured list.
    #[arg(long, global = true)]
    pub bandwidth: Option<f64>,
    /// Fixed mixing weight in [0, 1]; skips the γ grid.
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Fixed penalty level; skips the λ grid.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
}

/// Successful runs either converged or produced an artifact from an
/// unconverged solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    NotConverged,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::NotConverged => 2,
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    check_flags(cli)?;
    let text = match &cli.opts.config {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let mut cfg = config::load(text.as_deref(), &cli.opts.set)?;
    apply_flags(&mut cfg, &cli.opts, cli.command)?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.opts.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Fit => cmd_fit(&cli.opts, &cfg),
        Command::Cv => cmd_cv(&cli.opts, &cfg),
        Command::Test => cmd_test(&cli.opts, &cfg),
        Command::Simulate => cmd_simulate(&cli.opts, &cfg),
    })
}

fn check_flags(cli: &Cli) -> Result<(), CliError> {
    let o = &cli.opts;
    let reject = |cond: bool, msg: &str| if cond { Err(CliError::Input(msg.to_string())) } else { Ok(()) };
    match cli.command {
        Command::Fit | Command::Cv | Command::Test => {
            reject(o.input.is_none(), "--input is required")?;
            reject(o.seed.is_some(), "--seed only applies to simulate")?;
        }
        Command::Simulate => {
            reject(o.input.is_some(), "simulate does not read --input")?;
            reject(o.seed.is_none(), "simulate requires --seed")?;
            reject(o.lambda.is_some() || o.gamma.is_some(), "simulate tunes λ and γ by cross-validation")?;
        }
    }
    if matches!(cli.command, Command::Fit | Command::Cv) {
        reject(o.kernel.is_some() || o.bandwidth.is_some(), "--kernel and --bandwidth only apply to test and simulate")?;
    }
    if cli.command == Command::Cv {
        reject(o.lambda.is_some(), "cv selects λ; use --set cv.* to change the grid")?;
    }
    reject(o.threads == Some(0), "--threads must be >= 1")
}

fn apply_flags(cfg: &mut RunConfig, o: &Options, command: Command) -> Result<(), CliError> {
    if let Some(e) = o.estimator {
        if command == Command::Simulate {
            cfg.simulate.estimators = vec![match e {
                EstimatorChoice::PooledSgl => EstimatorKind::SgLassoMidas,
                EstimatorChoice::LassoUmidas => EstimatorKind::LassoUmidas,
                EstimatorChoice::FeSgl => return Err(CliError::Input("simulate compares pooled-sgl and lasso-umidas".into())),
            }];
        }
        cfg.fit.estimator = e;
    }
    if let Some(k) = o.kernel {
        cfg.test.kernels = vec![k.into()];
        cfg.simulate.kernels = vec![k.into()];
    }
    if let Some(b) = o.bandwidth {
        cfg.test.bandwidths = vec![b];
        cfg.simulate.bandwidths = vec![b];
    }
    if o.gamma.is_some() {
        cfg.fit.gamma = o.gamma;
    }
    if o.lambda.is_some() {
        cfg.fit.lambda = o.lambda;
    }
    Ok(())
}

fn write_output(o: &Options, content: &[u8], summary: Option<&str>) -> Result<(), CliError> {
    match &o.output {
        Some(p) => {
            std::fs::write(p, content).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            if let Some(s) = summary {
                print!("{s}");
            }
        }
        None => std::io::stdout().write_all(content).map_err(|e| CliError::Input(format!("stdout: {e}")))?,
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("artifacts serialize");
    s.push(b'\n');
    s
}

fn load_panel(o: &Options) -> Result<RawPanel, CliError> {
    let path = o.input.as_ref().expect("checked");
    let file = std::fs::File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    read_panel(file)
}

/// Design matrix of the configured estimator.
pub fn build_problem(data: &PanelDataset, cfg: &RunConfig) -> Result<DesignProblem, CliError> {
    let problem = match cfg.fit.estimator {
        EstimatorChoice::LassoUmidas => build_umidas_design(data)?,
        EstimatorChoice::PooledSgl | EstimatorChoice::FeSgl => {
            if cfg.fit.dictionary_functions == 0 {
                return Err(CliError::Input("fit.dictionary_functions must be >= 1".into()));
            }
            let dicts = data
                .covariates()
                .iter()
                .map(|c| build_dictionary(c.lags(), cfg.fit.dictionary_functions.min(c.lags())))
                .collect::<Result<Vec<_>, _>>()?;
            build_midas_design(data, &dicts)?
        }
    };
    Ok(match cfg.fit.estimator {
        EstimatorChoice::FeSgl => problem.with_intercept(InterceptMode::FixedEffects),
        _ => problem,
    })
}

/// Fits with fixed `(λ, γ)` when both are set, cross-validating the rest.
pub fn estimate(problem: &DesignProblem, cfg: &RunConfig) -> Result<(SgLassoFit, Option<CvResult>), CliError> {
    let solver = cfg.solver.to_config();
    let gamma = match cfg.fit.estimator {
        EstimatorChoice::LassoUmidas => match cfg.fit.gamma {
            Some(g) if g != 1.0 => return Err(CliError::Input("lasso-umidas fixes γ = 1".into())),
            _ => Some(1.0),
        },
        _ => cfg.fit.gamma,
    };
    let template = PenaltyConfig::new(0.0, gamma.unwrap_or(1.0), problem.groups().clone())?;
    match (cfg.fit.lambda, gamma) {
        (Some(l), Some(g)) => {
            let fit = SgLassoEstimator::new(problem)?.fit(&template.with_gamma(g).with_lambda(l), &solver, None)?;
            Ok((fit, None))
        }
        (lambda, gamma) => {
            let mut cv = cfg.cv.to_config();
            if let Some(l) = lambda {
                cv.lambda_grid = LambdaGrid::Values(vec![l]);
            }
            if let Some(g) = gamma {
                cv.gamma_grid = vec![g];
            }
            let (fit, res) = fit_cross_validated(problem, &template, &cv, &solver)?;
            Ok((fit, Some(res)))
        }
    }
}

fn outcome(converged: bool) -> Outcome {
    if converged { Outcome::Success } else { Outcome::NotConverged }
}

fn cmd_fit(o: &Options, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let raw = load_panel(o)?;
    let data = raw.aligned(cfg.data.horizon, cfg.data.response_lags)?;
    let problem = build_problem(&data, cfg)?;
    let (fit, cv) = estimate(&problem, cfg)?;
    let artifact = FitArtifact::new(cfg.fit.estimator, &raw.entities, &problem, &fit, cv.as_ref());
    let summary = format!(
        "{} fit: λ = {:.6}, γ = {}, {} of {} slopes nonzero, converged = {}\n",
        cfg.fit.estimator.label(),
        fit.penalty.lambda,
        fit.penalty.gamma,
        fit.slopes.iter().filter(|b| **b != 0.0).count(),
        fit.slopes.len(),
        fit.converged()
    );
    write_output(o, &to_json(&artifact), Some(&summary))?;
    Ok(outcome(fit.converged()))
}

fn cmd_cv(o: &Options, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let raw = load_panel(o)?;
    let data = raw.aligned(cfg.data.horizon, cfg.data.response_lags)?;
    let problem = build_problem(&data, cfg)?;
    let mut cv = cfg.cv.to_config();
    let gamma = match cfg.fit.estimator {
        EstimatorChoice::LassoUmidas => 1.0,
        _ => cfg.fit.gamma.unwrap_or(1.0),
    };
    if cfg.fit.estimator == EstimatorChoice::LassoUmidas || cfg.fit.gamma.is_some() {
        cv.gamma_grid = vec![gamma];
    }
    let template = PenaltyConfig::new(0.0, gamma, problem.groups().clone())?;
    let res = sgl_panel::estimators::cross_validate(&problem, &template, &cv, &cfg.solver.to_config())?;
    let artifact = CvArtifact::new(cfg.fit.estimator, cv.n_folds, &res);
    let summary = format!("selected λ = {:.6}, γ = {} (held-out MSE {:.6})\n", res.best_lambda, res.best_gamma, res.best().mse);
    write_output(o, &to_json(&artifact), Some(&summary))?;
    let unconverged = res.table.iter().any(|c| c.unconverged_folds > 0);
    Ok(outcome(!unconverged))
}

fn cmd_test(o: &Options, cfg: &RunConfig) -> Result<Outcome, CliError> {
    if cfg.fit.estimator == EstimatorChoice::FeSgl {
        return Err(CliError::Input("debiased tests are available for pooled estimators only".into()));
    }
    if cfg.test.kernels.is_empty() || cfg.test.bandwidths.is_empty() {
        return Err(CliError::Input("test needs at least one kernel and one bandwidth".into()));
    }
    let raw = load_panel(o)?;
    let data = raw.aligned(cfg.data.horizon, cfg.data.response_lags)?;
    let problem = build_problem(&data, cfg)?;
    let targets: Vec<String> = if cfg.test.covariates.is_empty() {
        data.covariates().iter().map(|c| c.name.clone()).collect()
    } else {
        cfg.test.covariates.clone()
    };
    let row_sets = targets
        .iter()
        .map(|name| {
            let mut rows = group_rows(problem.groups(), name).map_err(|_| CliError::Input(format!("unknown covariate `{name}`")))?;
            if cfg.fit.estimator == EstimatorChoice::LassoUmidas {
                // Singleton groups per lag: collect every lag of the covariate.
                let prefix = format!("{name}[");
                rows = problem.column_names().iter().enumerate().filter(|(_, c)| c.starts_with(&prefix)).map(|(j, _)| j + 1).collect();
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let (fit, cv) = estimate(&problem, cfg)?;
    let solver = cfg.solver.to_config();
    let z = inference_design(&problem, &fit)?;
    let nodewise = cfg.cv.nodewise(cfg.test.nodewise_lambda);
    let t = problem.n_periods();
    let mut tests = Vec::new();
    for (name, rows) in targets.iter().zip(&row_sets) {
        let precision = nodewise_precision(&z, t, rows, &nodewise, &solver);
        for kernel in &cfg.test.kernels {
            for &bandwidth in &cfg.test.bandwidths {
                let hac = HacConfig { kernel: (*kernel).into(), bandwidth };
                let mut cell = TestCell {
                    covariate: name.clone(),
                    kernel: kernel.label().to_string(),
                    bandwidth,
                    statistic: None,
                    df: rows.len(),
                    p_value: None,
                    debiased: Vec::new(),
                    standard_errors: Vec::new(),
                    warnings: Vec::new(),
                    error: None,
                };
                match precision.as_ref().map_err(Clone::clone).and_then(|p| granger_test(&fit, &z, t, p, &hac)) {
                    Ok(r) => {
                        cell.statistic = Some(r.statistic);
                        cell.p_value = Some(r.p_value);
                        cell.debiased = r.debiased.original.iter().copied().collect();
                        cell.standard_errors = r.standard_errors.iter().copied().collect();
                        cell.warnings = r.warnings;
                    }
                    Err(e) => cell.error = Some(e.to_string()),
                }
                tests.push(cell);
            }
        }
    }
    let fit_artifact = FitArtifact::new(cfg.fit.estimator, &raw.entities, &problem, &fit, cv.as_ref());
    let artifact = TestArtifact { schema_version: SCHEMA_VERSION, fit: fit_artifact, tests };
    write_output(o, &to_json(&artifact), Some(&format_p_values(&artifact.tests)))?;
    Ok(outcome(fit.converged()))
}

/// Experiment grid of a `simulate` run.
pub fn experiment_config(cfg: &RunConfig, seed: u64) -> ExperimentConfig {
    let sim = &cfg.simulate;
    ExperimentConfig {
        dgp: sim.dgp.clone(),
        estimators: sim.estimators.clone(),
        poolings: sim.poolings.clone(),
        kernels: sim.kernels.clone(),
        bandwidths: sim.bandwidths.clone(),
        weight_scales: sim.weight_scales.clone(),
        replications: sim.replications,
        base_seed: seed,
        fit: FitSettings {
            dictionary_functions: cfg.fit.dictionary_functions,
            cv: cfg.cv.to_config(),
            nodewise: cfg.cv.nodewise(sim.nodewise_lambda),
            solver: cfg.solver.to_config(),
            level: sim.level,
        },
    }
}

/// Long-format CSV, one row per cell and statistic.
pub fn records_csv(result: &sgl_panel::simulate::ExperimentResult) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in result.records() {
        w.serialize(r).expect("records serialize");
    }
    w.into_inner().expect("in-memory writer")
}

fn cmd_simulate(o: &Options, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let exp = experiment_config(cfg, o.seed.expect("checked"));
    let result = run_experiment(&exp)?;
    write_output(o, &records_csv(&result), Some(&result.format_table()))?;
    Ok(Outcome::Success)
}
