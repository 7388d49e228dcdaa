//! Reference solvers used as independent oracles. None of them share code
//! with the library's solver or proximal operator.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng))
}

pub fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

fn soft(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

/// Objective `|y - Xb|²/n + 2λ(γ|b|₁ + (1-γ)Σ|b_G|₂)`.
pub fn sgl_objective(x: &DMatrix<f64>, y: &DVector<f64>, groups: &[Vec<usize>], lambda: f64, gamma: f64, b: &DVector<f64>) -> f64 {
    let n = x.nrows() as f64;
    let r = y - x * b;
    let l1: f64 = b.iter().map(|v| v.abs()).sum();
    let l21: f64 = groups.iter().map(|g| g.iter().map(|&j| b[j] * b[j]).sum::<f64>().sqrt()).sum();
    r.norm_squared() / n + 2.0 * lambda * (gamma * l1 + (1.0 - gamma) * l21)
}

/// Cyclic coordinate descent for `|y - Xb|²/n + 2λ|b|₁`.
pub fn lasso_cd(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let n = x.nrows() as f64;
    let p = x.ncols();
    let g = x.tr_mul(x) / n;
    let c = x.tr_mul(y) / n;
    let mut b = DVector::zeros(p);
    for _sweep in 0..200_000 {
        let mut delta = 0.0_f64;
        for j in 0..p {
            let partial = c[j] - g.row(j).transpose().dot(&b) + g[(j, j)] * b[j];
            let new = soft(partial, lambda) / g[(j, j)];
            delta = delta.max((new - b[j]).abs());
            b[j] = new;
        }
        if delta < 1e-14 {
            break;
        }
    }
    b
}

/// Block coordinate descent for `|y - Xb|²/n + 2λΣ|b_G|₂`; each block is
/// solved exactly in the eigenbasis of its Gram block by a scalar root search.
pub fn group_lasso_bcd(x: &DMatrix<f64>, y: &DVector<f64>, groups: &[Vec<usize>], lambda: f64) -> DVector<f64> {
    let n = x.nrows() as f64;
    let p = x.ncols();
    let g = x.tr_mul(x) / n;
    let c = x.tr_mul(y) / n;
    let eig: Vec<SymmetricEigen<f64, nalgebra::Dyn>> = groups
        .iter()
        .map(|grp| DMatrix::from_fn(grp.len(), grp.len(), |a, b| g[(grp[a], grp[b])]).symmetric_eigen())
        .collect();
    let mut b = DVector::zeros(p);
    for _sweep in 0..200_000 {
        let mut delta = 0.0_f64;
        for (k, grp) in groups.iter().enumerate() {
            // Block problem: min bᵀA b - 2 bᵀr + 2λ|b|, with A = G_GG, r = c_G - G_{G,-G} b_{-G}.
            let gb = &g * &b;
            let r = DVector::from_fn(grp.len(), |a, _| {
                let j = grp[a];
                let own: f64 = grp.iter().map(|&l| g[(j, l)] * b[l]).sum();
                c[j] - (gb[j] - own)
            });
            let new = if r.norm() <= lambda {
                DVector::zeros(grp.len())
            } else {
                let e = &eig[k];
                let rt = e.eigenvectors.tr_mul(&r);
                // b = (A + (λ/t) I)^{-1} r with t = |b|: solve Σ rt_i²/(d_i t + λ)² = 1.
                let h = |t: f64| rt.iter().zip(e.eigenvalues.iter()).map(|(r, d)| r * r / (d * t + lambda).powi(2)).sum::<f64>() - 1.0;
                let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
                while h(hi) > 0.0 {
                    hi *= 2.0;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if h(mid) > 0.0 { lo = mid } else { hi = mid }
                }
                let t = 0.5 * (lo + hi);
                let coef = DVector::from_fn(grp.len(), |i, _| rt[i] * t / (e.eigenvalues[i] * t + lambda));
                &e.eigenvectors * coef
            };
            for (a, &j) in grp.iter().enumerate() {
                delta = delta.max((new[a] - b[j]).abs());
                b[j] = new[a];
            }
        }
        if delta < 1e-14 {
            break;
        }
    }
    b
}

/// Consensus ADMM splitting the objective into the least-squares term, the
/// ℓ₁ term and the group term, each handled by its own elementary prox.
pub fn sgl_admm(x: &DMatrix<f64>, y: &DVector<f64>, groups: &[Vec<usize>], lambda: f64, gamma: f64) -> DVector<f64> {
    let n = x.nrows() as f64;
    let p = x.ncols();
    let g = x.tr_mul(x) / n;
    let c = x.tr_mul(y) / n;
    let rho = 1.0;
    let chol = (&g * 2.0 + DMatrix::identity(p, p) * rho).cholesky().unwrap();
    let mut w = DVector::zeros(p);
    let (mut u0, mut u1, mut u2) = (DVector::zeros(p), DVector::zeros(p), DVector::zeros(p));
    let t1 = 2.0 * lambda * gamma / rho;
    let t2 = 2.0 * lambda * (1.0 - gamma) / rho;
    for _ in 0..400_000 {
        let xv = chol.solve(&(&c * 2.0 + (&w - &u0) * rho));
        let z1 = (&w - &u1).map(|v| soft(v, t1));
        let mut z2 = &w - &u2;
        for grp in groups {
            let norm = grp.iter().map(|&j| z2[j] * z2[j]).sum::<f64>().sqrt();
            let f = if norm > 0.0 { (1.0 - t2 / norm).max(0.0) } else { 0.0 };
            for &j in grp {
                z2[j] *= f;
            }
        }
        let w_new = (&xv + &u0 + &z1 + &u1 + &z2 + &u2) / 3.0;
        u0 += &xv - &w_new;
        u1 += &z1 - &w_new;
        u2 += &z2 - &w_new;
        let primal = (&xv - &w_new).amax().max((&z1 - &w_new).amax()).max((&z2 - &w_new).amax());
        let dual = (&w_new - &w).amax() * rho;
        w = w_new;
        if primal < 1e-12 && dual < 1e-12 {
            // Report the sparse copy where the ℓ₁ prox produced exact zeros.
            return z1;
        }
    }
    w
}

/// Prox objective `½|z - v|² + t(γ|z|₁ + (1-γ)|z|₂)` for one group.
pub fn prox_objective(z: &[f64], v: &[f64], t: f64, gamma: f64) -> f64 {
    let d: f64 = z.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum::<f64>() * 0.5;
    let l1: f64 = z.iter().map(|a| a.abs()).sum();
    let l2: f64 = z.iter().map(|a| a * a).sum::<f64>().sqrt();
    d + t * (gamma * l1 + (1.0 - gamma) * l2)
}

/// Minimizes the one-group prox objective along the rays through `v` and
/// through the entrywise-shrunk `v` with a 200-point grid on the scaling,
/// refined by golden-section search around the best grid point.
pub fn prox_line_oracle(v: &[f64], t: f64, gamma: f64) -> f64 {
    let dirs = [v.to_vec(), v.iter().map(|&a| soft(a, gamma * t)).collect::<Vec<_>>()];
    let mut best = prox_objective(&vec![0.0; v.len()], v, t, gamma);
    for dir in &dirs {
        let f = |s: f64| prox_objective(&dir.iter().map(|d| d * s).collect::<Vec<_>>(), v, t, gamma);
        let grid: Vec<f64> = (0..200).map(|k| k as f64 / 199.0).collect();
        let (kbest, _) = grid.iter().enumerate().map(|(k, &s)| (k, f(s))).fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        let (mut lo, mut hi) = (grid[kbest.saturating_sub(1)], grid[(kbest + 1).min(199)]);
        let phi = 0.5 * (5.0_f64.sqrt() - 1.0);
        for _ in 0..100 {
            let a = hi - phi * (hi - lo);
            let b = lo + phi * (hi - lo);
            if f(a) < f(b) { hi = b } else { lo = a }
        }
        best = best.min(f(0.5 * (lo + hi))).min(grid.iter().map(|&s| f(s)).fold(f64::INFINITY, f64::min));
    }
    best
}

/// Random sparse-group instance: `(X, y, groups)` with `n > p`.
pub fn random_instance(rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DVector<f64>, Vec<Vec<usize>>) {
    let p = rng.random_range(4..=30);
    let n = rng.random_range((p + 10).max(20)..=200);
    let x = normal_matrix(rng, n, p);
    let mut beta = DVector::zeros(p);
    for j in 0..p.min(5) {
        beta[j] = rng.random_range(-2.0..2.0);
    }
    let y = &x * beta + normal_vector(rng, n);
    let mut groups = Vec::new();
    let mut start = 0;
    while start < p {
        let size = rng.random_range(1..=4).min(p - start);
        groups.push((start..start + size).collect());
        start += size;
    }
    (x, y, groups)
}
