//! The smooth part `f(b) = ‖y - Xb‖²_n = |y - Xb|²/n`, stored either as the
//! Gram pair `(XᵀX/n, Xᵀy/n)` or as the raw data, whichever is cheaper.
//!
//! Iterates are tracked through their "image" (`Gb` in Gram form, `Xb` in
//! direct form) so that gradients, losses and curvature along a step all
//! come from one matrix-vector product per iterate.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
enum Form {
    Gram { gram: DMatrix<f64>, cross: DVector<f64> },
    Direct { x: DMatrix<f64>, y: DVector<f64> },
}

#[derive(Debug, Clone)]
pub(crate) struct LeastSquares {
    form: Form,
    n: usize,
    /// `|y|²/n`
    yy: f64,
    top_eigenvalue: f64,
}

impl LeastSquares {
    pub fn from_data(x: DMatrix<f64>, y: DVector<f64>) -> Self {
        let (n, p) = x.shape();
        let yy = y.norm_squared() / n as f64;
        let form = if p <= 2 * n {
            let xt = x.transpose();
            let gram = (&xt * &x) / n as f64;
            let cross = (&xt * &y) / n as f64;
            Form::Gram { gram, cross }
        } else {
            Form::Direct { x, y }
        };
        let mut ls = Self { form, n, yy, top_eigenvalue: 0.0 };
        ls.top_eigenvalue = ls.estimate_top_eigenvalue();
        ls
    }

    pub fn from_gram(gram: DMatrix<f64>, cross: DVector<f64>, yy: f64, n: usize) -> Self {
        let mut ls = Self { form: Form::Gram { gram, cross }, n, yy, top_eigenvalue: 0.0 };
        ls.top_eigenvalue = ls.estimate_top_eigenvalue();
        ls
    }

    pub fn dim(&self) -> usize {
        match &self.form {
            Form::Gram { cross, .. } => cross.len(),
            Form::Direct { x, .. } => x.ncols(),
        }
    }

    /// `|y|²/n`
    pub fn response_energy(&self) -> f64 {
        self.yy
    }

    /// Largest eigenvalue of `XᵀX/n` (power iteration estimate).
    pub fn top_eigenvalue(&self) -> f64 {
        self.top_eigenvalue
    }

    fn apply_gram(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.form {
            Form::Gram { gram, .. } => gram * v,
            Form::Direct { x, .. } => x.tr_mul(&(x * v)) / self.n as f64,
        }
    }

    fn estimate_top_eigenvalue(&self) -> f64 {
        let p = self.dim();
        if p == 0 {
            return 0.0;
        }
        let mut v = DVector::from_element(p, 1.0 / (p as f64).sqrt());
        let mut est = 0.0;
        for _ in 0..60 {
            let w = self.apply_gram(&v);
            let norm = w.norm();
            if norm == 0.0 {
                return 0.0;
            }
            est = v.dot(&w);
            v = w / norm;
        }
        est.max(self.apply_gram(&v).dot(&v))
    }

    pub fn image(&self, b: &DVector<f64>) -> DVector<f64> {
        match &self.form {
            Form::Gram { gram, .. } => gram * b,
            Form::Direct { x, .. } => x * b,
        }
    }

    /// Gradient `2(XᵀX b - Xᵀy)/n` from the image of `b`.
    pub fn gradient(&self, img: &DVector<f64>) -> DVector<f64> {
        match &self.form {
            Form::Gram { cross, .. } => (img - cross) * 2.0,
            Form::Direct { x, y } => x.tr_mul(&(img - y)) * (2.0 / self.n as f64),
        }
    }

    pub fn loss(&self, b: &DVector<f64>, img: &DVector<f64>) -> f64 {
        match &self.form {
            Form::Gram { cross, .. } => (self.yy - 2.0 * b.dot(cross) + b.dot(img)).max(0.0),
            Form::Direct { y, .. } => (img - y).norm_squared() / self.n as f64,
        }
    }

    /// `dᵀ(XᵀX/n)d` from `d` and its image.
    pub fn curvature(&self, d: &DVector<f64>, img_d: &DVector<f64>) -> f64 {
        match &self.form {
            Form::Gram { .. } => d.dot(img_d),
            Form::Direct { .. } => img_d.norm_squared() / self.n as f64,
        }
    }

    /// `(XᵀX/n, Xᵀy/n)` when stored in Gram form.
    pub fn gram_parts(&self) -> Option<(&DMatrix<f64>, &DVector<f64>)> {
        match &self.form {
            Form::Gram { gram, cross } => Some((gram, cross)),
            Form::Direct { .. } => None,
        }
    }

    /// Least-squares coefficients on the columns in `subset` alone, with the
    /// remaining coefficients at zero.
    pub fn restricted_least_squares(&self, subset: &[usize]) -> DVector<f64> {
        let p = self.dim();
        let mut b = DVector::zeros(p);
        if subset.is_empty() {
            return b;
        }
        let k = subset.len();
        let (g, c) = match &self.form {
            Form::Gram { gram, cross } => {
                (DMatrix::from_fn(k, k, |r, s| gram[(subset[r], subset[s])]), cross.select_rows(subset))
            }
            Form::Direct { x, y } => {
                let xs = x.select_columns(subset);
                (xs.tr_mul(&xs) / self.n as f64, xs.tr_mul(y) / self.n as f64)
            }
        };
        let sol = match g.clone().cholesky() {
            Some(ch) => ch.solve(&c),
            None => g.svd(true, true).solve(&c, 1e-12).unwrap_or_else(|_| DVector::zeros(k)),
        };
        for (r, &j) in subset.iter().enumerate() {
            b[j] = sol[r];
        }
        b
    }
}
