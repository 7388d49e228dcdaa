//! JSON artifacts written by `fit`, `cv` and `test`. Each carries
//! `schema_version` and deserializes back into the same structure.

use serde::{Deserialize, Serialize};
use sgl_panel::design::DesignProblem;
use sgl_panel::estimators::{CvResult, SgLassoFit};

use crate::config::EstimatorChoice;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub group: String,
    /// Original data scale.
    pub value: f64,
    /// Scale the penalty was applied to.
    pub standardized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEntry {
    pub label: String,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySummary {
    pub lambda: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub n_obs: usize,
    pub mean_squared: f64,
    pub max_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSelection {
    pub best_lambda: f64,
    pub best_gamma: f64,
    pub cv_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArtifact {
    pub schema_version: u32,
    pub estimator: EstimatorChoice,
    pub entities: Vec<String>,
    pub n_periods: usize,
    /// One pooled intercept or one per entity.
    pub intercepts: Vec<f64>,
    pub coefficients: Vec<Coefficient>,
    pub groups: Vec<GroupEntry>,
    pub penalty: PenaltySummary,
    pub cross_validation: Option<CvSelection>,
    pub diagnostics: Diagnostics,
    pub residuals: ResidualSummary,
}

impl FitArtifact {
    pub fn new(
        estimator: EstimatorChoice,
        entities: &[String],
        problem: &DesignProblem,
        fit: &SgLassoFit,
        cv: Option<&CvResult>,
    ) -> Self {
        let names = problem.column_names();
        let groups = problem.groups();
        let coefficients = (0..fit.slopes.len())
            .map(|j| Coefficient {
                name: names[j].clone(),
                group: groups.labels()[groups.group_of(j)].clone(),
                value: fit.slopes[j],
                standardized: fit.standardized_slopes[j],
            })
            .collect();
        let group_entries = groups
            .iter()
            .zip(groups.labels())
            .map(|(members, label)| GroupEntry { label: label.clone(), columns: members.iter().map(|&j| names[j].clone()).collect() })
            .collect();
        let n = fit.residuals.len();
        FitArtifact {
            schema_version: SCHEMA_VERSION,
            estimator,
            entities: entities.to_vec(),
            n_periods: problem.n_periods(),
            intercepts: fit.intercepts.clone(),
            coefficients,
            groups: group_entries,
            penalty: PenaltySummary { lambda: fit.penalty.lambda, gamma: fit.penalty.gamma },
            cross_validation: cv.map(|c| CvSelection { best_lambda: c.best_lambda, best_gamma: c.best_gamma, cv_mse: c.best().mse }),
            diagnostics: Diagnostics {
                objective: fit.diagnostics.objective,
                iterations: fit.diagnostics.iterations,
                converged: fit.diagnostics.converged,
                kkt_residual: fit.diagnostics.kkt_residual,
            },
            residuals: ResidualSummary {
                n_obs: n,
                mean_squared: fit.residuals.norm_squared() / n as f64,
                max_abs: fit.residuals.amax(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub lambda: f64,
    pub gamma: f64,
    pub mse: f64,
    pub fold_mse: Vec<f64>,
    pub unconverged_folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvArtifact {
    pub schema_version: u32,
    pub estimator: EstimatorChoice,
    pub n_folds: usize,
    pub best_lambda: f64,
    pub best_gamma: f64,
    pub table: Vec<CvRow>,
}

impl CvArtifact {
    pub fn new(estimator: EstimatorChoice, n_folds: usize, res: &CvResult) -> Self {
        CvArtifact {
            schema_version: SCHEMA_VERSION,
            estimator,
            n_folds,
            best_lambda: res.best_lambda,
            best_gamma: res.best_gamma,
            table: res
                .table
                .iter()
                .map(|c| CvRow {
                    lambda: c.lambda,
                    gamma: c.gamma,
                    mse: c.mse,
                    fold_mse: c.fold_mse.clone(),
                    unconverged_folds: c.unconverged_folds,
                })
                .collect(),
        }
    }
}

/// One Wald test, or the reason it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCell {
    pub covariate: String,
    pub kernel: String,
    pub bandwidth: f64,
    pub statistic: Option<f64>,
    pub df: usize,
    pub p_value: Option<f64>,
    /// Debiased coefficients of the group on the original scale.
    pub debiased: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestArtifact {
    pub schema_version: u32,
    pub fit: FitArtifact,
    pub tests: Vec<TestCell>,
}

/// p-values with covariates as rows and `kernel / M_T` as columns.
pub fn format_p_values(tests: &[TestCell]) -> String {
    let mut columns: Vec<(String, f64)> = Vec::new();
    let mut rows: Vec<String> = Vec::new();
    for c in tests {
        if !columns.iter().any(|(k, b)| *k == c.kernel && *b == c.bandwidth) {
            columns.push((c.kernel.clone(), c.bandwidth));
        }
        if !rows.contains(&c.covariate) {
            rows.push(c.covariate.clone());
        }
    }
    let width = rows.iter().map(String::len).max().unwrap_or(0).max(9);
    let mut out = format!("{:<width$}", "covariate");
    for (k, b) in &columns {
        out.push_str(&format!(" {:>12}", format!("{k}/{b}")));
    }
    out.push('\n');
    for r in &rows {
        out.push_str(&format!("{r:<width$}"));
        for (k, b) in &columns {
            let cell = tests.iter().find(|c| c.covariate == *r && c.kernel == *k && c.bandwidth == *b);
            match cell.and_then(|c| c.p_value) {
                Some(p) => out.push_str(&format!(" {p:>12.4}")),
                None => out.push_str(&format!(" {:>12}", "error")),
            }
        }
        out.push('\n');
    }
    out
}
