//! Long-format panel CSV: `entity, period, subperiod, variable, value`.
//!
//! The response is variable `y` at subperiod 1. Covariate `k` at
//! high-frequency lag `j` (1 = most recent) uses subperiod `j`. Entities and
//! covariates keep their order of first appearance; periods are sorted.

use std::collections::{BTreeSet, HashMap};
use std::io::Read;

use nalgebra::DMatrix;
use serde::Deserialize;
use sgl_panel::design::{Covariate, PanelDataset};

use crate::CliError;

pub const RESPONSE: &str = "y";
const HEADER: [&str; 5] = ["entity", "period", "subperiod", "variable", "value"];

#[derive(Debug, Deserialize)]
struct Row {
    entity: String,
    period: i64,
    subperiod: usize,
    variable: String,
    value: f64,
}

/// A parsed panel before alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPanel {
    pub entities: Vec<String>,
    pub periods: Vec<i64>,
    /// `N × T`.
    pub response: DMatrix<f64>,
    pub covariates: Vec<Covariate>,
}

impl RawPanel {
    pub fn aligned(&self, horizon: usize, response_lags: usize) -> Result<PanelDataset, CliError> {
        PanelDataset::aligned(self.response.clone(), self.covariates.clone(), horizon, response_lags)
            .map_err(|e| CliError::Input(e.to_string()))
    }
}

pub fn read_panel(reader: impl Read) -> Result<RawPanel, CliError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| CliError::Input(format!("header: {e}")))?;
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(CliError::Input(format!("header must be `{}`", HEADER.join(","))));
    }

    let mut rows = Vec::new();
    for rec in rdr.deserialize::<Row>() {
        let row = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Input(format!("line {line}: {e}"))
        })?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Input("input has no data rows".into()));
    }

    let mut entities: Vec<String> = Vec::new();
    let mut entity_index = HashMap::new();
    let mut variables: Vec<String> = Vec::new();
    let mut lags: HashMap<String, usize> = HashMap::new();
    let mut periods = BTreeSet::new();
    for (k, r) in rows.iter().enumerate() {
        let line = k + 2;
        if !r.value.is_finite() {
            return Err(CliError::Input(format!("line {line}: value is not finite")));
        }
        if r.subperiod == 0 {
            return Err(CliError::Input(format!("line {line}: subperiods start at 1")));
        }
        if r.variable == RESPONSE && r.subperiod != 1 {
            return Err(CliError::Input(format!("line {line}: response `{RESPONSE}` must use subperiod 1")));
        }
        if !entity_index.contains_key(&r.entity) {
            entity_index.insert(r.entity.clone(), entities.len());
            entities.push(r.entity.clone());
        }
        if r.variable != RESPONSE && !lags.contains_key(&r.variable) {
            variables.push(r.variable.clone());
        }
        let m = lags.entry(r.variable.clone()).or_insert(0);
        *m = (*m).max(r.subperiod);
        periods.insert(r.period);
    }
    if !lags.contains_key(RESPONSE) {
        return Err(CliError::Input(format!("no rows for the response `{RESPONSE}`")));
    }
    let periods: Vec<i64> = periods.into_iter().collect();
    let period_index: HashMap<i64, usize> = periods.iter().enumerate().map(|(k, &p)| (p, k)).collect();
    let (n, t) = (entities.len(), periods.len());

    let mut response = DMatrix::from_element(n, t, f64::NAN);
    let mut blocks: HashMap<&str, Vec<DMatrix<f64>>> =
        variables.iter().map(|v| (v.as_str(), vec![DMatrix::from_element(t, lags[v], f64::NAN); n])).collect();
    for (k, r) in rows.iter().enumerate() {
        let (i, s) = (entity_index[&r.entity], period_index[&r.period]);
        let slot = if r.variable == RESPONSE {
            &mut response[(i, s)]
        } else {
            &mut blocks.get_mut(r.variable.as_str()).expect("known variable")[i][(s, r.subperiod - 1)]
        };
        if !slot.is_nan() {
            return Err(CliError::Input(format!(
                "line {}: duplicate entry for entity `{}`, period {}, variable `{}`, subperiod {}",
                k + 2,
                r.entity,
                r.period,
                r.variable,
                r.subperiod
            )));
        }
        *slot = r.value;
    }

    for i in 0..n {
        for s in 0..t {
            if response[(i, s)].is_nan() {
                return Err(CliError::Input(format!("missing `{RESPONSE}` for entity `{}`, period {}", entities[i], periods[s])));
            }
        }
    }
    let mut covariates = Vec::with_capacity(variables.len());
    for v in &variables {
        let values = blocks.remove(v.as_str()).expect("known variable");
        for (i, b) in values.iter().enumerate() {
            if let Some(pos) = b.iter().position(|x| x.is_nan()) {
                let (s, j) = (pos % t, pos / t);
                return Err(CliError::Input(format!(
                    "missing `{v}` for entity `{}`, period {}, subperiod {}",
                    entities[i],
                    periods[s],
                    j + 1
                )));
            }
        }
        covariates.push(Covariate::new(v.clone(), values));
    }
    Ok(RawPanel { entities, periods, response, covariates })
}
