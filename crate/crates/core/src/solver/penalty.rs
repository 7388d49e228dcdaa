//! The sparse-group penalty `Ω(b) = γ|b|₁ + (1-γ) Σ_G |b_G|₂`, its proximal
//! operator, dual norm and optimality residual.

use nalgebra::DVector;

use crate::design::GroupStructure;
use crate::error::{Error, Result};

/// Regularization settings for one fit.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub groups: GroupStructure,
    /// `false` marks coefficients left out of the penalty.
    pub penalized: Vec<bool>,
}

impl PenaltyConfig {
    /// Every coefficient penalized.
    pub fn new(lambda: f64, gamma: f64, groups: GroupStructure) -> Result<Self> {
        let p = groups.n_coefficients();
        Self::with_mask(lambda, gamma, groups, vec![true; p])
    }

    pub fn with_mask(lambda: f64, gamma: f64, groups: GroupStructure, penalized: Vec<bool>) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        if penalized.len() != groups.n_coefficients() {
            return Err(Error::DimensionMismatch(format!(
                "penalty mask has {} entries, groups cover {}",
                penalized.len(),
                groups.n_coefficients()
            )));
        }
        Ok(Self { lambda, gamma, groups, penalized })
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..self.clone() }
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..self.clone() }
    }

    /// Same λ, γ and mask over a different partition of the same coefficients.
    pub fn clone_with_groups(&self, groups: GroupStructure) -> Self {
        Self { groups, ..self.clone() }
    }

    pub fn n_coefficients(&self) -> usize {
        self.penalized.len()
    }

    /// The penalty splits into `λ|b_j|` terms: lasso weights, or at most one
    /// penalized coefficient per group.
    pub(crate) fn is_separable(&self) -> bool {
        self.gamma == 1.0 || (0..self.groups.len()).all(|g| self.active(g).count() <= 1)
    }

    /// Penalized members of group `g`.
    fn active(&self, g: usize) -> impl Iterator<Item = usize> + Clone + '_ {
        self.groups.group(g).iter().copied().filter(|&j| self.penalized[j])
    }
}

pub fn soft_threshold(x: f64, threshold: f64) -> f64 {
    if x > threshold {
        x - threshold
    } else if x < -threshold {
        x + threshold
    } else {
        0.0
    }
}

/// `Ω(b)` over the penalized coefficients (not multiplied by λ).
pub fn penalty_value(b: &[f64], cfg: &PenaltyConfig) -> Result<f64> {
    if b.len() != cfg.n_coefficients() {
        return Err(Error::DimensionMismatch(format!(
            "coefficient vector has length {}, penalty covers {}",
            b.len(),
            cfg.n_coefficients()
        )));
    }
    Ok(penalty_unchecked(b, cfg))
}

pub(crate) fn penalty_unchecked(b: &[f64], cfg: &PenaltyConfig) -> f64 {
    let mut l1 = 0.0;
    let mut l21 = 0.0;
    for g in 0..cfg.groups.len() {
        let mut sq = 0.0;
        for j in cfg.active(g) {
            l1 += b[j].abs();
            sq += b[j] * b[j];
        }
        l21 += sq.sqrt();
    }
    cfg.gamma * l1 + (1.0 - cfg.gamma) * l21
}

/// Proximal operator of `t·Ω` with `t = eta_lambda`:
/// `argmin_z ½|z - v|² + t(γ|z|₁ + (1-γ)Σ_G|z_G|₂)`.
///
/// Within each group the entries are soft-thresholded at `γt`, then the group
/// is shrunk towards zero by `max(0, 1 - (1-γ)t/|u_G|₂)`.
pub fn prox_sg(v: &[f64], eta_lambda: f64, gamma: f64, groups: &GroupStructure) -> Vec<f64> {
    let mut out = v.to_vec();
    for g in groups.iter() {
        shrink_group(&mut out, g.iter().copied(), eta_lambda, gamma);
    }
    out
}

fn shrink_group(z: &mut [f64], members: impl Iterator<Item = usize> + Clone, t: f64, gamma: f64) {
    let mut sq = 0.0;
    for j in members.clone() {
        z[j] = soft_threshold(z[j], gamma * t);
        sq += z[j] * z[j];
    }
    let norm = sq.sqrt();
    let factor = if norm > 0.0 { (1.0 - (1.0 - gamma) * t / norm).max(0.0) } else { 0.0 };
    for j in members {
        z[j] *= factor;
    }
}

/// Prox of `t·Ω` restricted to the penalized coordinates; unpenalized
/// coordinates pass through unchanged.
pub(crate) fn prox_masked(z: &mut [f64], t: f64, cfg: &PenaltyConfig) {
    for g in 0..cfg.groups.len() {
        shrink_group(z, cfg.active(g), t, cfg.gamma);
    }
}

/// Dual norm of one group's penalty: the smallest `λ` with
/// `|S(u, λγ)|₂ ≤ λ(1-γ)`, i.e. `u ∈ λ ∂Ω_G(0)`.
pub fn group_dual_norm(u: &[f64], gamma: f64) -> f64 {
    let linf = u.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let l2 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if linf == 0.0 {
        return 0.0;
    }
    if gamma >= 1.0 {
        return linf;
    }
    if gamma <= 0.0 {
        return l2;
    }
    let excess = |lam: f64| {
        let s: f64 = u.iter().map(|&x| soft_threshold(x, lam * gamma).powi(2)).sum();
        s.sqrt() - lam * (1.0 - gamma)
    };
    let mut lo = 0.0;
    let mut hi = (linf / gamma).min(l2 / (1.0 - gamma));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    hi
}

/// Dual norm `Ω*(u) = max_G Ω_G*(u_G)` over penalized coordinates.
pub fn dual_norm(u: &[f64], cfg: &PenaltyConfig) -> f64 {
    (0..cfg.groups.len())
        .map(|g| {
            let sub: Vec<f64> = cfg.active(g).map(|j| u[j]).collect();
            group_dual_norm(&sub, cfg.gamma)
        })
        .fold(0.0, f64::max)
}

/// Largest violation of `-grad ∈ 2λ ∂Ω(b)` (unpenalized: `grad = 0`).
///
/// A zero group contributes `max(0, |S(grad_G, 2λγ)|₂ - 2λ(1-γ))`; inside a
/// nonzero group each coordinate contributes its own subgradient gap.
pub fn kkt_violation(b: &DVector<f64>, grad: &DVector<f64>, cfg: &PenaltyConfig) -> f64 {
    let lam2 = 2.0 * cfg.lambda;
    let gamma = cfg.gamma;
    let mut worst = 0.0_f64;
    for (j, &pen) in cfg.penalized.iter().enumerate() {
        if !pen {
            worst = worst.max(grad[j].abs());
        }
    }
    for g in 0..cfg.groups.len() {
        let members: Vec<usize> = cfg.active(g).collect();
        if members.is_empty() {
            continue;
        }
        let norm = members.iter().map(|&j| b[j] * b[j]).sum::<f64>().sqrt();
        if norm == 0.0 {
            let s = members
                .iter()
                .map(|&j| soft_threshold(grad[j], lam2 * gamma).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(s - lam2 * (1.0 - gamma));
        } else {
            for &j in &members {
                let gap = if b[j] != 0.0 {
                    (grad[j] + lam2 * (gamma * b[j].signum() + (1.0 - gamma) * b[j] / norm)).abs()
                } else {
                    (grad[j].abs() - lam2 * gamma).max(0.0)
                };
                worst = worst.max(gap);
            }
        }
    }
    worst.max(0.0)
}
