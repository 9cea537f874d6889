//! Logistic regression by iteratively reweighted least squares.
//!
//! The fit maximizes the weighted log-likelihood minus `(ridge/2)·‖β‖²`
//! (intercept unpenalized) with Newton steps and step halving. Standard
//! errors come from the inverse of the *unpenalized* observed information
//! at the penalized optimum, which is a close approximation for the tiny
//! default ridge.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub ridge: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            ridge: 1e-6,
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Intercept first, then one per coefficient. `None` when the
    /// information matrix is singular at the optimum.
    pub standard_errors: Option<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
    pub ridge: f64,
    /// Max-norm of the penalized score at the returned parameters.
    pub gradient_norm: f64,
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

impl LrModel {
    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.linear_predictor(x))
    }
}

struct Problem {
    z: DMatrix<f64>,
    y: DVector<f64>,
    w: DVector<f64>,
    ridge: f64,
}

impl Problem {
    fn penalty(&self, beta: &DVector<f64>) -> f64 {
        0.5 * self.ridge * beta.rows(1, beta.len() - 1).norm_squared()
    }

    fn objective(&self, beta: &DVector<f64>) -> f64 {
        let eta = &self.z * beta;
        let ll: f64 = (0..eta.len())
            .map(|i| self.w[i] * (self.y[i] * eta[i] - softplus(eta[i])))
            .sum();
        ll - self.penalty(beta)
    }

    fn mu(&self, beta: &DVector<f64>) -> DVector<f64> {
        (&self.z * beta).map(sigmoid)
    }

    fn gradient(&self, beta: &DVector<f64>, mu: &DVector<f64>) -> DVector<f64> {
        let r = (&self.y - mu).component_mul(&self.w);
        let mut g = self.z.tr_mul(&r);
        for j in 1..g.len() {
            g[j] -= self.ridge * beta[j];
        }
        g
    }

    fn information(&self, mu: &DVector<f64>) -> DMatrix<f64> {
        let v = DVector::from_iterator(mu.len(), (0..mu.len()).map(|i| self.w[i] * mu[i] * (1.0 - mu[i])));
        let mut zw = self.z.clone();
        for (i, mut row) in zw.row_iter_mut().enumerate() {
            row *= v[i];
        }
        self.z.tr_mul(&zw)
    }

    /// Every row with positive weight predicted with its observed class at
    /// probability > 1 − 1e-6.
    fn separated(&self, mu: &DVector<f64>) -> bool {
        (0..mu.len()).all(|i| self.w[i] == 0.0 || (self.y[i] - mu[i]).abs() < 1e-6)
    }
}

/// Diagonal of the inverse, or `None` when the matrix is numerically
/// singular (smallest eigenvalue below 1e-10 of the largest).
fn covariance_diagonal(info: DMatrix<f64>) -> Option<Vec<f64>> {
    let eig = info.symmetric_eigen();
    let max = eig.eigenvalues.amax();
    if !(max > 0.0) || eig.eigenvalues.iter().any(|l| !(*l > 1e-10 * max)) {
        return None;
    }
    let k = eig.eigenvalues.len();
    let d = (0..k)
        .map(|i| (0..k).map(|j| eig.eigenvectors[(i, j)].powi(2) / eig.eigenvalues[j]).sum())
        .collect();
    Some(d)
}

/// Fits `P(y = 1 | x) = σ(intercept + coef·x)`.
pub fn fit_logistic(
    x: &DMatrix<f64>,
    y: &[bool],
    sample_weights: Option<&[f64]>,
    config: &LogisticConfig,
) -> Result<LrModel> {
    let (n, m) = x.shape();
    if y.len() != n {
        return Err(Error::Shape(format!("{n} rows but {} labels", y.len())));
    }
    if let Some(w) = sample_weights {
        if w.len() != n {
            return Err(Error::Shape(format!("{n} rows but {} weights", w.len())));
        }
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Parameter("sample weights must be finite and non-negative".into()));
        }
    }
    if config.ridge < 0.0 || !config.ridge.is_finite() {
        return Err(Error::Parameter(format!("ridge {} must be >= 0", config.ridge)));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite design value".into()));
    }
    let pos = y.iter().filter(|v| **v).count();
    if pos == 0 || pos == n {
        return Err(Error::DegenerateLabels(format!("{pos} of {n} rows positive")));
    }

    let mut z = DMatrix::from_element(n, m + 1, 1.0);
    z.columns_mut(1, m).copy_from(x);
    let prob = Problem {
        z,
        y: DVector::from_iterator(n, y.iter().map(|&v| if v { 1.0 } else { 0.0 })),
        w: DVector::from_iterator(n, (0..n).map(|i| sample_weights.map_or(1.0, |w| w[i]))),
        ridge: config.ridge,
    };

    let mut beta = DVector::zeros(m + 1);
    let mut obj = prob.objective(&beta);
    let mut converged = false;
    let mut separated = false;
    let mut iterations = 0;
    let mut mu = prob.mu(&beta);
    let mut grad = prob.gradient(&beta, &mu);
    while iterations < config.max_iter {
        if grad.amax() < config.tol {
            converged = true;
            break;
        }
        if config.ridge == 0.0 && prob.separated(&mu) {
            separated = true;
            break;
        }
        iterations += 1;
        let mut h = prob.information(&mu);
        for j in 1..=m {
            h[(j, j)] += config.ridge;
        }
        let step = match h.clone().cholesky() {
            Some(c) => c.solve(&grad),
            None if config.ridge == 0.0 && prob.separated(&mu) => {
                separated = true;
                break;
            }
            None => {
                return Err(Error::Numeric(format!(
                    "information matrix is singular at iteration {iterations}; refit with ridge > 0"
                )))
            }
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate = &beta + &step * t;
            let cand_obj = prob.objective(&candidate);
            if cand_obj >= obj - 1e-12 * obj.abs().max(1.0) {
                beta = candidate;
                obj = cand_obj;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        mu = prob.mu(&beta);
        grad = prob.gradient(&beta, &mu);
        if !accepted {
            // no ascent possible at machine precision
            converged = grad.amax() < config.tol;
            break;
        }
    }
    if !converged && !separated && grad.amax() < config.tol {
        converged = true;
    }
    if separated {
        log::warn!("complete separation detected; coefficients are not identifiable without ridge");
        converged = false;
    }

    let standard_errors = if separated {
        None
    } else {
        covariance_diagonal(prob.information(&mu)).map(|d| d.iter().map(|v| v.sqrt()).collect())
    };
    Ok(LrModel {
        intercept: beta[0],
        coefficients: beta.rows(1, m).iter().copied().collect(),
        standard_errors,
        converged,
        iterations,
        ridge: config.ridge,
        gradient_norm: grad.amax(),
    })
}
