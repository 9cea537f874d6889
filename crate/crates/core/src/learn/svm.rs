//! Linear soft-margin SVM trained by stochastic subgradient descent.
//!
//! Minimizes `(λ/2)‖w‖² + (1/n) Σ s_i max(0, 1 − y_i (w·x_i + b))` with the
//! bias unregularized. Each epoch visits the rows in a seeded permutation
//! with step `1/(λ (t + t0))`; the epoch-averaged iterate is scored and the
//! best one so far is kept, so the reported objective trace never
//! increases. The bias of the final iterate is then set to its exact
//! minimizer given `w`.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            lambda: 1e-3,
            epochs: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
    /// Objective of the kept iterate after each epoch.
    pub objective_trace: Vec<f64>,
}

impl SvmModel {
    /// Uncalibrated margin `w·x + b`.
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

fn signed(y: &[bool]) -> Vec<f64> {
    y.iter().map(|&v| if v { 1.0 } else { -1.0 }).collect()
}

/// Primal objective for labels in {−1, +1}.
pub fn svm_objective(x: &DMatrix<f64>, y: &[f64], s: &[f64], lambda: f64, w: &[f64], b: f64) -> f64 {
    let n = x.nrows();
    let hinge: f64 = (0..n)
        .map(|i| {
            let m: f64 = b + (0..w.len()).map(|j| w[j] * x[(i, j)]).sum::<f64>();
            s[i] * (1.0 - y[i] * m).max(0.0)
        })
        .sum();
    0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>() + hinge / n as f64
}

/// Exact minimizer over `b` of the weighted hinge term, given the margins
/// without bias. The function is convex piecewise-linear, so one of the
/// breakpoints `y_i − f_i` is optimal. When the minimum is a flat segment
/// its midpoint is returned.
pub fn optimal_bias(f: &[f64], y: &[f64], s: &[f64]) -> f64 {
    let mut bps: Vec<(f64, f64, f64)> = (0..f.len()).map(|i| (y[i] - f[i], y[i], s[i])).collect();
    bps.sort_by(|a, b| a.0.total_cmp(&b.0));
    // slope for b below every breakpoint: positives are all active (−s),
    // negatives all inactive
    let mut slope: f64 = -bps.iter().filter(|p| p.1 > 0.0).map(|p| p.2).sum::<f64>();
    let scale: f64 = s.iter().sum::<f64>().max(1.0);
    for (k, &(bp, _, si)) in bps.iter().enumerate() {
        // crossing a breakpoint: a positive row leaves the active set or a
        // negative row enters it; either way the slope grows by s_i
        slope += si;
        if slope.abs() <= 1e-12 * scale {
            return bps.get(k + 1).map_or(bp, |next| 0.5 * (bp + next.0));
        }
        if slope > 0.0 {
            return bp;
        }
    }
    bps.last().map_or(0.0, |p| p.0)
}

pub fn fit_linear_svm(
    x: &DMatrix<f64>,
    y: &[bool],
    sample_weights: Option<&[f64]>,
    config: &SvmConfig,
    seed_value: u64,
) -> Result<SvmModel> {
    let (n, m) = x.shape();
    if !(config.lambda > 0.0) || !config.lambda.is_finite() {
        return Err(Error::Parameter(format!("SVM lambda must be positive, got {}", config.lambda)));
    }
    if y.len() != n {
        return Err(Error::Shape(format!("{n} rows but {} labels", y.len())));
    }
    let pos = y.iter().filter(|v| **v).count();
    if pos == 0 || pos == n {
        return Err(Error::DegenerateLabels(format!("{pos} of {n} rows positive")));
    }
    let ys = signed(y);
    let s: Vec<f64> = (0..n).map(|i| sample_weights.map_or(1.0, |w| w[i])).collect();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).iter().copied().collect()).collect();
    let max_sq = rows.iter().map(|r| 1.0 + r.iter().map(|v| v * v).sum::<f64>()).fold(1.0, f64::max);
    let s_max = s.iter().copied().fold(1.0, f64::max);
    // first step of size ~1/(max ‖x‖² s_max)
    let t0 = (max_sq * s_max / config.lambda).max(1.0);

    let mut rng = seed::rng(seed_value);
    let mut order: Vec<usize> = (0..n).collect();
    let mut w = vec![0.0; m];
    let mut b = 0.0;
    let mut t = 0.0f64;
    let mut best_w = w.clone();
    let mut best_b = optimal_bias(&vec![0.0; n], &ys, &s);
    let mut best_obj = svm_objective(x, &ys, &s, config.lambda, &best_w, best_b);
    let mut trace = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut avg_w = vec![0.0; m];
        let mut avg_b = 0.0;
        for (k, &i) in order.iter().enumerate() {
            t += 1.0;
            let eta = 1.0 / (config.lambda * (t + t0));
            let margin = b + w.iter().zip(&rows[i]).map(|(a, v)| a * v).sum::<f64>();
            let shrink = 1.0 - eta * config.lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if ys[i] * margin < 1.0 {
                let g = eta * s[i] * ys[i];
                w.iter_mut().zip(&rows[i]).for_each(|(a, v)| *a += g * v);
                b += g;
            }
            let frac = 1.0 / (k + 1) as f64;
            avg_w.iter_mut().zip(&w).for_each(|(a, v)| *a += (v - *a) * frac);
            avg_b += (b - avg_b) * frac;
        }
        let obj = svm_objective(x, &ys, &s, config.lambda, &avg_w, avg_b);
        if obj < best_obj {
            best_obj = obj;
            best_w = avg_w;
            best_b = avg_b;
        }
        trace.push(best_obj);
    }
    let f: Vec<f64> = rows.iter().map(|r| best_w.iter().zip(r).map(|(a, v)| a * v).sum()).collect();
    let refined = optimal_bias(&f, &ys, &s);
    let refined_obj = svm_objective(x, &ys, &s, config.lambda, &best_w, refined);
    if refined_obj <= best_obj {
        best_b = refined;
        if let Some(last) = trace.last_mut() {
            *last = refined_obj;
        }
    }
    Ok(SvmModel {
        weights: best_w,
        bias: best_b,
        lambda: config.lambda,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_pair_midpoint() {
        let x = DMatrix::from_column_slice(2, 1, &[-1.0, 1.0]);
        let m = fit_linear_svm(&x, &[false, true], None, &SvmConfig { lambda: 1e-3, epochs: 500 }, 1).unwrap();
        assert!(m.margin(&[0.0]).abs() < 1e-2, "decision(0) = {}", m.margin(&[0.0]));
        assert!(m.margin(&[1.0]) > 0.0 && m.margin(&[-1.0]) < 0.0);
    }

    #[test]
    fn trace_never_increases_and_is_seeded() {
        let x = DMatrix::from_fn(30, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let y: Vec<bool> = (0..30).map(|i| x[(i, 0)] + 0.5 * x[(i, 1)] > 0.3).collect();
        let cfg = SvmConfig { lambda: 0.01, epochs: 50 };
        let a = fit_linear_svm(&x, &y, None, &cfg, 3).unwrap();
        assert!(a.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(a, fit_linear_svm(&x, &y, None, &cfg, 3).unwrap());
    }

    #[test]
    fn errors() {
        let x = DMatrix::zeros(2, 1);
        assert!(matches!(
            fit_linear_svm(&x, &[true, false], None, &SvmConfig { lambda: 0.0, epochs: 1 }, 0),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            fit_linear_svm(&x, &[true, true], None, &SvmConfig::default(), 0),
            Err(Error::DegenerateLabels(_))
        ));
    }

    #[test]
    fn bias_is_exact_minimizer() {
        let f = [0.3, -1.2, 2.0, 0.1, -0.4];
        let y = [1.0, -1.0, 1.0, -1.0, 1.0];
        let s = [1.0, 2.0, 0.5, 1.0, 1.5];
        let hinge = |b: f64| (0..5).map(|i| s[i] * (1.0 - y[i] * (f[i] + b)).max(0.0)).sum::<f64>();
        let b = optimal_bias(&f, &y, &s);
        let best = (-4000..4000).map(|k| hinge(k as f64 * 1e-3)).fold(f64::INFINITY, f64::min);
        assert!(hinge(b) <= best + 1e-12);
    }
}
