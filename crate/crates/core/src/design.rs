//! Panel data containers and stacked regression designs.
//!
//! Rows of every stacked design are entity-major: rows `i*T .. (i+1)*T`
//! hold entity `i`'s periods in time order.

use nalgebra::{DMatrix, DVector};

use crate::dictionary::MidasDictionary;
use crate::error::{Error, Result};

/// One covariate observed at `lags` high-frequency points per low-frequency period.
///
/// `values[i]` is the `T × m` matrix `X_{i,k}` whose row `t` holds
/// `x_{i,t}, x_{i,t-1/m}, …, x_{i,t-(m-1)/m}` (most recent first).
#[derive(Debug, Clone, PartialEq)]
pub struct Covariate {
    pub name: String,
    pub values: Vec<DMatrix<f64>>,
}

impl Covariate {
    pub fn new(name: impl Into<String>, values: Vec<DMatrix<f64>>) -> Self {
        Self { name: name.into(), values }
    }

    /// Frequency ratio `m_k`.
    pub fn lags(&self) -> usize {
        self.values.first().map_or(0, |v| v.ncols())
    }
}

/// Balanced panel of low-frequency responses and high-frequency covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    response: DMatrix<f64>,
    covariates: Vec<Covariate>,
    lagged_responses: Vec<Covariate>,
    horizon: usize,
}

impl PanelDataset {
    /// Builds a dataset from an `N × T` response matrix and covariates that
    /// are already aligned with it.
    pub fn new(response: DMatrix<f64>, covariates: Vec<Covariate>) -> Result<Self> {
        let data = Self { response, covariates, lagged_responses: Vec::new(), horizon: 0 };
        data.validate()?;
        Ok(data)
    }

    /// Aligns raw series for forecasting `horizon` periods ahead with
    /// `response_lags` lags of the response as extra predictors.
    ///
    /// Row `t` of the result pairs the target `y_{t+h}` with covariates of
    /// period `t`. Lagged responses are the most recent observed values at
    /// the forecast origin: `y_{t-l}` when `h = 0` and `y_{t+1-l}` when `h ≥ 1`.
    pub fn aligned(
        raw_response: DMatrix<f64>,
        covariates: Vec<Covariate>,
        horizon: usize,
        response_lags: usize,
    ) -> Result<Self> {
        let raw = Self { response: raw_response, covariates, lagged_responses: Vec::new(), horizon: 0 };
        raw.validate()?;
        let (n, t_raw) = raw.response.shape();
        let shift = usize::from(horizon > 0);
        let first = response_lags.saturating_sub(shift);
        if t_raw <= first + horizon {
            return Err(Error::InvalidArgument(format!(
                "{t_raw} periods cannot accommodate horizon {horizon} with {response_lags} response lags"
            )));
        }
        let origins: Vec<usize> = (first..t_raw - horizon).collect();
        let t = origins.len();
        let response = DMatrix::from_fn(n, t, |i, r| raw.response[(i, origins[r] + horizon)]);
        let covariates = raw
            .covariates
            .iter()
            .map(|c| {
                let values = c.values.iter().map(|v| v.select_rows(&origins)).collect();
                Covariate::new(c.name.clone(), values)
            })
            .collect();
        let lagged_responses = (1..=response_lags)
            .map(|l| {
                let values = (0..n)
                    .map(|i| DMatrix::from_fn(t, 1, |r, _| raw.response[(i, origins[r] + shift - l)]))
                    .collect();
                Covariate::new(format!("y_lag{l}"), values)
            })
            .collect();
        let data = Self { response, covariates, lagged_responses, horizon };
        data.validate()?;
        Ok(data)
    }

    fn validate(&self) -> Result<()> {
        let (n, t) = self.response.shape();
        if n == 0 || t == 0 {
            return Err(Error::InvalidArgument("panel must have at least one entity and one period".into()));
        }
        if self.response.iter().any(|v| !v.is_finite()) {
            return Err(Error::MissingData("response contains missing or non-finite values".into()));
        }
        for c in self.covariates.iter().chain(&self.lagged_responses) {
            if c.values.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "covariate `{}` has {} entities, response has {n}",
                    c.name,
                    c.values.len()
                )));
            }
            let m = c.lags();
            if m == 0 {
                return Err(Error::InvalidArgument(format!("covariate `{}` has no lags", c.name)));
            }
            for v in &c.values {
                if v.shape() != (t, m) {
                    return Err(Error::DimensionMismatch(format!(
                        "covariate `{}` block has shape {:?}, expected ({t}, {m})",
                        c.name,
                        v.shape()
                    )));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::MissingData(format!(
                        "covariate `{}` contains missing or non-finite values",
                        c.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_entities(&self) -> usize {
        self.response.nrows()
    }

    pub fn n_periods(&self) -> usize {
        self.response.ncols()
    }

    /// `N × T` response matrix.
    pub fn response(&self) -> &DMatrix<f64> {
        &self.response
    }

    pub fn covariates(&self) -> &[Covariate] {
        &self.covariates
    }

    pub fn lagged_responses(&self) -> &[Covariate] {
        &self.lagged_responses
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Restricts the panel to a single entity.
    pub fn entity(&self, i: usize) -> Result<PanelDataset> {
        if i >= self.n_entities() {
            return Err(Error::InvalidArgument(format!("entity {i} out of range")));
        }
        let pick = |c: &Covariate| Covariate::new(c.name.clone(), vec![c.values[i].clone()]);
        Ok(Self {
            response: self.response.rows(i, 1).into_owned(),
            covariates: self.covariates.iter().map(pick).collect(),
            lagged_responses: self.lagged_responses.iter().map(pick).collect(),
            horizon: self.horizon,
        })
    }

    /// Stacked response vector (entity-major).
    pub fn stacked_response(&self) -> DVector<f64> {
        let (n, t) = self.response.shape();
        DVector::from_fn(n * t, |r, _| self.response[(r / t, r % t)])
    }
}

/// A partition of the coefficient indices `0..p` into labelled groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStructure {
    groups: Vec<Vec<usize>>,
    labels: Vec<String>,
    group_of: Vec<usize>,
}

impl GroupStructure {
    pub fn new(groups: Vec<Vec<usize>>, labels: Vec<String>) -> Result<Self> {
        if groups.len() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} groups but {} labels",
                groups.len(),
                labels.len()
            )));
        }
        let p: usize = groups.iter().map(Vec::len).sum();
        let mut group_of = vec![usize::MAX; p];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::InvalidArgument(format!("group `{}` is empty", labels[g])));
            }
            for &j in members {
                if j >= p || group_of[j] != usize::MAX {
                    return Err(Error::InvalidArgument(format!(
                        "groups do not partition 0..{p}: index {j} repeated or out of range"
                    )));
                }
                group_of[j] = g;
            }
        }
        Ok(Self { groups, labels, group_of })
    }

    /// Consecutive groups of the given sizes.
    pub fn contiguous(sizes: &[usize], labels: Vec<String>) -> Result<Self> {
        let mut start = 0;
        let groups = sizes
            .iter()
            .map(|&s| {
                let g: Vec<usize> = (start..start + s).collect();
                start += s;
                g
            })
            .collect();
        Self::new(groups, labels)
    }

    /// Every coefficient in its own group.
    pub fn singletons(labels: Vec<String>) -> Self {
        let p = labels.len();
        Self { groups: (0..p).map(|j| vec![j]).collect(), labels, group_of: (0..p).collect() }
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Number of coefficients covered.
    pub fn n_coefficients(&self) -> usize {
        self.group_of.len()
    }

    pub fn group(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn group_of(&self, j: usize) -> usize {
        self.group_of[j]
    }

    pub fn find(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.groups.iter().map(Vec::as_slice)
    }
}

/// How intercepts enter the regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterceptMode {
    /// No intercept column.
    None,
    /// One common, unpenalized intercept.
    Pooled,
    /// One unpenalized intercept per entity.
    FixedEffects,
}

/// Stacked response, slope design and group partition of a panel regression.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignProblem {
    response: DVector<f64>,
    design: DMatrix<f64>,
    groups: GroupStructure,
    intercept: InterceptMode,
    column_scales: DVector<f64>,
    column_names: Vec<String>,
    n_entities: usize,
    n_periods: usize,
}

impl DesignProblem {
    pub fn new(
        response: DVector<f64>,
        design: DMatrix<f64>,
        groups: GroupStructure,
        intercept: InterceptMode,
        n_entities: usize,
        n_periods: usize,
    ) -> Result<Self> {
        let rows = n_entities * n_periods;
        if response.len() != rows || design.nrows() != rows {
            return Err(Error::DimensionMismatch(format!(
                "expected {rows} rows (N = {n_entities}, T = {n_periods}), got y: {}, X: {}",
                response.len(),
                design.nrows()
            )));
        }
        if groups.n_coefficients() != design.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "groups cover {} coefficients, design has {} columns",
                groups.n_coefficients(),
                design.ncols()
            )));
        }
        let p = design.ncols();
        let column_names = default_column_names(&groups, p);
        Ok(Self {
            response,
            design,
            groups,
            intercept,
            column_scales: DVector::from_element(p, 1.0),
            column_names,
            n_entities,
            n_periods,
        })
    }

    pub fn with_intercept(mut self, mode: InterceptMode) -> Self {
        self.intercept = mode;
        self
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.design.ncols() {
            return Err(Error::DimensionMismatch("one name per column required".into()));
        }
        self.column_names = names;
        Ok(self)
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn groups(&self) -> &GroupStructure {
        &self.groups
    }

    pub fn intercept(&self) -> InterceptMode {
        self.intercept
    }

    pub fn column_scales(&self) -> &DVector<f64> {
        &self.column_scales
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn n_entities(&self) -> usize {
        self.n_entities
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    pub fn n_obs(&self) -> usize {
        self.response.len()
    }

    pub fn n_slopes(&self) -> usize {
        self.design.ncols()
    }

    /// Inverse of the stacking: the `N × T` response matrix.
    pub fn response_matrix(&self) -> DMatrix<f64> {
        let t = self.n_periods;
        DMatrix::from_fn(self.n_entities, t, |i, s| self.response[i * t + s])
    }

    /// Restricts every entity to the given periods (in the given order).
    pub fn select_periods(&self, periods: &[usize]) -> DesignProblem {
        let t = self.n_periods;
        let rows: Vec<usize> =
            (0..self.n_entities).flat_map(|i| periods.iter().map(move |&s| i * t + s)).collect();
        DesignProblem {
            response: self.response.select_rows(&rows),
            design: self.design.select_rows(&rows),
            groups: self.groups.clone(),
            intercept: self.intercept,
            column_scales: self.column_scales.clone(),
            column_names: self.column_names.clone(),
            n_entities: self.n_entities,
            n_periods: periods.len(),
        }
    }

    /// Restricts the problem to the listed entities (in the given order).
    pub fn select_entities(&self, entities: &[usize]) -> DesignProblem {
        let t = self.n_periods;
        let rows: Vec<usize> = entities.iter().flat_map(|&i| (0..t).map(move |s| i * t + s)).collect();
        DesignProblem {
            response: self.response.select_rows(&rows),
            design: self.design.select_rows(&rows),
            groups: self.groups.clone(),
            intercept: self.intercept,
            column_scales: self.column_scales.clone(),
            column_names: self.column_names.clone(),
            n_entities: entities.len(),
            n_periods: t,
        }
    }

    #[cfg(test)]
    pub(crate) fn with_response(&self, response: DVector<f64>) -> DesignProblem {
        DesignProblem { response, ..self.clone() }
    }
}

fn default_column_names(groups: &GroupStructure, p: usize) -> Vec<String> {
    let mut names = vec![String::new(); p];
    for (g, members) in groups.iter().enumerate() {
        let label = &groups.labels()[g];
        for (k, &j) in members.iter().enumerate() {
            names[j] = if members.len() == 1 { label.clone() } else { format!("{label}[{k}]") };
        }
    }
    names
}

fn lag_columns(data: &PanelDataset, out: &mut DMatrix<f64>, col: usize) {
    let t = data.n_periods();
    for (l, c) in data.lagged_responses().iter().enumerate() {
        for (i, v) in c.values.iter().enumerate() {
            out.view_mut((i * t, col + l), (t, 1)).copy_from(&v.column(0));
        }
    }
}

/// MIDAS design: covariate `k` contributes the columns `X_{i,k} W_k`, one
/// group per covariate; lagged responses follow as singleton groups.
pub fn build_midas_design(data: &PanelDataset, dictionaries: &[MidasDictionary]) -> Result<DesignProblem> {
    let covs = data.covariates();
    if dictionaries.len() != covs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} dictionaries for {} covariates",
            dictionaries.len(),
            covs.len()
        )));
    }
    for (c, d) in covs.iter().zip(dictionaries) {
        if d.lags() != c.lags() {
            return Err(Error::DimensionMismatch(format!(
                "dictionary for `{}` has m = {}, covariate has m = {}",
                c.name,
                d.lags(),
                c.lags()
            )));
        }
    }
    let (n, t) = (data.n_entities(), data.n_periods());
    let n_lags = data.lagged_responses().len();
    let mut sizes: Vec<usize> = dictionaries.iter().map(MidasDictionary::len).collect();
    let p: usize = sizes.iter().sum::<usize>() + n_lags;
    let mut x = DMatrix::zeros(n * t, p);
    let mut col = 0;
    for (c, d) in covs.iter().zip(dictionaries) {
        for (i, block) in c.values.iter().enumerate() {
            let agg = block * d.weights();
            x.view_mut((i * t, col), (t, d.len())).copy_from(&agg);
        }
        col += d.len();
    }
    lag_columns(data, &mut x, col);

    let mut labels: Vec<String> = covs.iter().map(|c| c.name.clone()).collect();
    labels.extend(data.lagged_responses().iter().map(|c| c.name.clone()));
    sizes.extend(std::iter::repeat_n(1, n_lags));
    let groups = GroupStructure::contiguous(&sizes, labels)?;
    let mut names = Vec::with_capacity(p);
    for (c, d) in covs.iter().zip(dictionaries) {
        names.extend((0..d.len()).map(|l| format!("{}[{l}]", c.name)));
    }
    names.extend(data.lagged_responses().iter().map(|c| c.name.clone()));
    DesignProblem::new(data.stacked_response(), x, groups, InterceptMode::Pooled, n, t)?.with_column_names(names)
}

/// Unrestricted MIDAS design: every high-frequency lag is its own column,
/// scaled by `1/m_k`, and its own group.
pub fn build_umidas_design(data: &PanelDataset) -> Result<DesignProblem> {
    let (n, t) = (data.n_entities(), data.n_periods());
    let n_lags = data.lagged_responses().len();
    let p: usize = data.covariates().iter().map(Covariate::lags).sum::<usize>() + n_lags;
    let mut x = DMatrix::zeros(n * t, p);
    let mut names = Vec::with_capacity(p);
    let mut col = 0;
    for c in data.covariates() {
        let m = c.lags();
        for (i, block) in c.values.iter().enumerate() {
            x.view_mut((i * t, col), (t, m)).copy_from(&(block / m as f64));
        }
        names.extend((1..=m).map(|j| format!("{}[lag{j}]", c.name)));
        col += m;
    }
    lag_columns(data, &mut x, col);
    names.extend(data.lagged_responses().iter().map(|c| c.name.clone()));
    let groups = GroupStructure::singletons(names.clone());
    DesignProblem::new(data.stacked_response(), x, groups, InterceptMode::Pooled, n, t)?.with_column_names(names)
}

/// Empirical norm `‖v‖_n = |v|₂ / √n`.
pub fn empirical_norm(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// Divides every slope column by its empirical norm; the accumulated
/// scales are kept so coefficients can be reported on the original scale
/// (`b_original = b_standardized / scale`).
pub fn standardize(problem: &DesignProblem) -> Result<DesignProblem> {
    let mut out = problem.clone();
    for j in 0..out.design.ncols() {
        let norm = empirical_norm(out.design.column(j).as_slice());
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::DegenerateColumn { index: j, name: out.column_names[j].clone() });
        }
        out.design.column_mut(j).unscale_mut(norm);
        out.column_scales[j] *= norm;
    }
    Ok(out)
}

/// Entity-by-entity demeaning of response and design (`M_B` applied to
/// `y` and `X`). The result has no intercept.
pub fn within_transform(problem: &DesignProblem) -> Result<DesignProblem> {
    if problem.intercept != InterceptMode::FixedEffects {
        return Err(Error::InvalidMode(format!(
            "within transform requires fixed effects, got {:?}",
            problem.intercept
        )));
    }
    let mut out = problem.clone();
    let t = problem.n_periods;
    for i in 0..problem.n_entities {
        demean_rows(&mut out.response.rows_mut(i * t, t));
        for j in 0..out.design.ncols() {
            demean_rows(&mut out.design.column_mut(j).rows_mut(i * t, t));
        }
    }
    out.intercept = InterceptMode::None;
    Ok(out)
}

fn demean_rows<S>(v: &mut nalgebra::Matrix<f64, nalgebra::Dyn, nalgebra::U1, S>)
where
    S: nalgebra::StorageMut<f64, nalgebra::Dyn, nalgebra::U1>,
{
    let mean = v.mean();
    v.add_scalar_mut(-mean);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::build_dictionary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_panel(n: usize, t: usize, lags: &[usize], seed: u64) -> PanelDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = DMatrix::from_fn(n, t, |_, _| rng.random::<f64>() - 0.5);
        let covs = lags
            .iter()
            .enumerate()
            .map(|(k, &m)| {
                let v = (0..n).map(|_| DMatrix::from_fn(t, m, |_, _| rng.random::<f64>() * 2.0 - 1.0)).collect();
                Covariate::new(format!("x{k}"), v)
            })
            .collect();
        PanelDataset::new(y, covs).unwrap()
    }

    #[test]
    fn identity_aggregation_reproduces_raw_column() {
        let data = random_panel(3, 4, &[1], 1);
        let d = MidasDictionary::from_weights(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let prob = build_midas_design(&data, &[d]).unwrap();
        assert_eq!(prob.groups().len(), 1);
        for i in 0..3 {
            for s in 0..4 {
                assert_eq!(prob.design()[(i * 4 + s, 0)], data.covariates()[0].values[i][(s, 0)]);
            }
        }
    }

    #[test]
    fn constant_dictionary_averages_lags() {
        let data = random_panel(2, 5, &[12], 2);
        let prob = build_midas_design(&data, &[build_dictionary(12, 1).unwrap()]).unwrap();
        for i in 0..2 {
            for s in 0..5 {
                let mean = data.covariates()[0].values[i].row(s).mean();
                assert!((prob.design()[(i * 5 + s, 0)] - mean).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn midas_dimensions_and_groups() {
        let data = random_panel(2, 3, &[5, 7], 3);
        let dicts = [build_dictionary(5, 3).unwrap(), build_dictionary(7, 3).unwrap()];
        let prob = build_midas_design(&data, &dicts).unwrap();
        assert_eq!(prob.design().shape(), (6, 6));
        assert_eq!(prob.groups().group(0), &[0, 1, 2]);
        assert_eq!(prob.groups().group(1), &[3, 4, 5]);
    }

    #[test]
    fn midas_rejects_mismatched_dictionary() {
        let data = random_panel(2, 3, &[5], 3);
        let err = build_midas_design(&data, &[build_dictionary(6, 2).unwrap()]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn umidas_dimensions() {
        let data = random_panel(2, 3, &[12], 4);
        let prob = build_umidas_design(&data).unwrap();
        assert_eq!(prob.n_slopes(), 12);
        assert_eq!(prob.groups().len(), 12);

        let data = random_panel(1, 2, &[1, 12, 365], 5);
        assert_eq!(build_umidas_design(&data).unwrap().n_slopes(), 378);
    }

    #[test]
    fn umidas_equals_midas_with_scaled_identity() {
        let data = random_panel(3, 6, &[4, 1], 6);
        let dicts: Vec<_> = [4usize, 1]
            .iter()
            .map(|&m| MidasDictionary::from_weights(DMatrix::identity(m, m) / m as f64).unwrap())
            .collect();
        let a = build_midas_design(&data, &dicts).unwrap();
        let b = build_umidas_design(&data).unwrap();
        assert_eq!(a.design(), b.design());
    }

    #[test]
    fn m_one_umidas_matches_midas_l1() {
        let data = random_panel(2, 5, &[1, 1], 7);
        let dicts = [build_dictionary(1, 1).unwrap(), build_dictionary(1, 1).unwrap()];
        let a = build_midas_design(&data, &dicts).unwrap();
        let b = build_umidas_design(&data).unwrap();
        assert!((a.design() - b.design()).abs().max() < 1e-15);
    }

    #[test]
    fn lagged_response_alignment() {
        let y = DMatrix::from_row_slice(1, 5, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let x = Covariate::new("x", vec![DMatrix::from_row_slice(5, 1, &[10.0, 20.0, 30.0, 40.0, 50.0])]);
        let data = PanelDataset::aligned(y.clone(), vec![x.clone()], 0, 1).unwrap();
        assert_eq!(data.response().as_slice(), &[2.0, 3.0, 4.0, 5.0]);
        assert_eq!(data.lagged_responses()[0].values[0].as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(data.covariates()[0].values[0].as_slice(), &[20.0, 30.0, 40.0, 50.0]);

        let data = PanelDataset::aligned(y, vec![x], 1, 1).unwrap();
        assert_eq!(data.response().as_slice(), &[2.0, 3.0, 4.0, 5.0]);
        assert_eq!(data.lagged_responses()[0].values[0].as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(data.covariates()[0].values[0].as_slice(), &[10.0, 20.0, 30.0, 40.0]);

        let prob = build_midas_design(&data, &[build_dictionary(1, 1).unwrap()]).unwrap();
        assert_eq!(prob.groups().len(), 2);
        assert_eq!(prob.groups().labels()[1], "y_lag1");
    }

    #[test]
    fn missing_values_rejected() {
        let y = DMatrix::from_row_slice(1, 2, &[1.0, f64::NAN]);
        assert!(matches!(PanelDataset::new(y, vec![]), Err(Error::MissingData(_))));
    }

    #[test]
    fn standardize_examples() {
        let groups = GroupStructure::singletons(vec!["a".into(), "b".into()]);
        let x = DMatrix::from_column_slice(4, 2, &[2.0, 2.0, 2.0, 2.0, 1.0, -1.0, 1.0, -1.0]);
        let prob = DesignProblem::new(DVector::zeros(4), x, groups, InterceptMode::Pooled, 1, 4).unwrap();
        let s = standardize(&prob).unwrap();
        assert_eq!(s.column_scales().as_slice(), &[2.0, 1.0]);
        assert!(s.design().column(0).iter().all(|&v| v == 1.0));
        assert_eq!(s.design().column(1), prob.design().column(1));
    }

    #[test]
    fn standardize_unit_norms_and_degenerate() {
        let data = random_panel(3, 7, &[3, 2], 8);
        let prob = build_umidas_design(&data).unwrap();
        let s = standardize(&prob).unwrap();
        for j in 0..s.n_slopes() {
            assert!((empirical_norm(s.design().column(j).as_slice()) - 1.0).abs() < 1e-10);
        }

        let groups = GroupStructure::singletons(vec!["zero".into()]);
        let prob = DesignProblem::new(DVector::zeros(3), DMatrix::zeros(3, 1), groups, InterceptMode::Pooled, 1, 3)
            .unwrap();
        match standardize(&prob) {
            Err(Error::DegenerateColumn { index, name }) => {
                assert_eq!(index, 0);
                assert_eq!(name, "zero");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn within_transform_properties() {
        let data = random_panel(4, 6, &[3], 9);
        let prob = build_midas_design(&data, &[build_dictionary(3, 2).unwrap()])
            .unwrap()
            .with_intercept(InterceptMode::FixedEffects);
        let w = within_transform(&prob).unwrap();
        assert_eq!(w.intercept(), InterceptMode::None);
        for i in 0..4 {
            assert!(w.response().rows(i * 6, 6).mean().abs() < 1e-12);
            for j in 0..2 {
                assert!(w.design().view((i * 6, j), (6, 1)).mean().abs() < 1e-12);
            }
        }
        let twice = within_transform(&w.clone().with_intercept(InterceptMode::FixedEffects)).unwrap();
        assert!((twice.design() - w.design()).abs().max() < 1e-12);
        assert!((twice.response() - w.response()).abs().max() < 1e-12);

        assert!(matches!(within_transform(&prob.with_intercept(InterceptMode::Pooled)), Err(Error::InvalidMode(_))));
    }

    #[test]
    fn within_constant_entity_response_is_zero() {
        let mut y = DMatrix::from_element(2, 4, 3.0);
        y[(1, 2)] = 7.0;
        let x = Covariate::new("x", vec![DMatrix::from_fn(4, 1, |r, _| r as f64); 2]);
        let data = PanelDataset::new(y, vec![x]).unwrap();
        let prob = build_umidas_design(&data).unwrap().with_intercept(InterceptMode::FixedEffects);
        let w = within_transform(&prob).unwrap();
        assert!(w.response().rows(0, 4).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stacking_round_trips() {
        let data = random_panel(3, 5, &[2], 10);
        let prob = build_umidas_design(&data).unwrap();
        assert_eq!(&prob.response_matrix(), data.response());
    }

    #[test]
    fn group_structure_validation() {
        assert!(GroupStructure::new(vec![vec![0, 1], vec![1]], vec!["a".into(), "b".into()]).is_err());
        assert!(GroupStructure::new(vec![vec![0], vec![]], vec!["a".into(), "b".into()]).is_err());
        assert!(GroupStructure::new(vec![vec![0], vec![3]], vec!["a".into(), "b".into()]).is_err());
        let g = GroupStructure::new(vec![vec![2, 0], vec![1]], vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(g.group_of(0), 0);
        assert_eq!(g.group_of(1), 1);
        assert_eq!(g.n_coefficients(), 3);
    }
}
