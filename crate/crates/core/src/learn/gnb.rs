use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const VARIANCE_FLOOR: f64 = 1e-9;

/// Gaussian naive Bayes with per-class, per-feature normal densities.
/// Index 0 holds the positive class, index 1 the negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnbModel {
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
}

pub fn fit_gnb(x: &DMatrix<f64>, y: &[bool], sample_weights: Option<&[f64]>) -> Result<GnbModel> {
    let (n, m) = x.shape();
    if y.len() != n {
        return Err(Error::Shape(format!("{n} rows but {} labels", y.len())));
    }
    let w = |i: usize| sample_weights.map_or(1.0, |w| w[i]);
    let mut mass = [0.0; 2];
    let mut means = [vec![0.0; m], vec![0.0; m]];
    for i in 0..n {
        let c = usize::from(!y[i]);
        mass[c] += w(i);
        for j in 0..m {
            means[c][j] += w(i) * x[(i, j)];
        }
    }
    if mass[0] <= 0.0 || mass[1] <= 0.0 {
        return Err(Error::DegenerateLabels("naive Bayes needs weight in both classes".into()));
    }
    for c in 0..2 {
        means[c].iter_mut().for_each(|v| *v /= mass[c]);
    }
    let mut variances = [vec![0.0; m], vec![0.0; m]];
    for i in 0..n {
        let c = usize::from(!y[i]);
        for j in 0..m {
            variances[c][j] += w(i) * (x[(i, j)] - means[c][j]).powi(2);
        }
    }
    for c in 0..2 {
        variances[c].iter_mut().for_each(|v| *v = (*v / mass[c]).max(VARIANCE_FLOOR));
    }
    let total = mass[0] + mass[1];
    Ok(GnbModel {
        priors: [mass[0] / total, mass[1] / total],
        means,
        variances,
    })
}

impl GnbModel {
    fn log_joint(&self, c: usize, x: &[f64]) -> f64 {
        let mut lp = self.priors[c].ln();
        for ((v, mu), var) in x.iter().zip(&self.means[c]).zip(&self.variances[c]) {
            lp -= 0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (v - mu).powi(2) / var);
        }
        lp
    }

    /// Posterior probability of the positive class.
    pub fn score(&self, x: &[f64]) -> f64 {
        let a = self.log_joint(0, x);
        let b = self.log_joint(1, x);
        1.0 / (1.0 + (b - a).exp())
    }
}
