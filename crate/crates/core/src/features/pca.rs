use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{FeatureGroup, FeatureMatrix};
use crate::error::{Error, Result};

/// Column means and scales of a z-scoring transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    /// Column means and sample standard deviations. A column whose spread
    /// is negligible relative to its magnitude gets scale 1.
    pub fn fit(x: &DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        if n < 2 {
            return Err(Error::InsufficientData(format!("standardization needs n >= 2, got {n}")));
        }
        let mut means = Vec::with_capacity(x.ncols());
        let mut scales = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let mean = col.iter().sum::<f64>() / n as f64;
            let ss: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
            let sd = (ss / (n - 1) as f64).sqrt();
            let constant = sd <= 1e-12 * mean.abs().max(1.0);
            means.push(mean);
            scales.push(if constant { 1.0 } else { sd });
        }
        Ok(Standardizer { means, scales })
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.means.len() {
            return Err(Error::Shape(format!("{} columns, standardizer has {}", x.ncols(), self.means.len())));
        }
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (mu, s) = (self.means[j], self.scales[j]);
            for v in col.iter_mut() {
                *v = (*v - mu) / s;
            }
        }
        Ok(out)
    }
}

/// Z-scores every column. Zero-variance columns become all-zero with scale
/// recorded as 1.
pub fn standardize(x: &FeatureMatrix) -> Result<(FeatureMatrix, Vec<f64>, Vec<f64>)> {
    let st = Standardizer::fit(&x.values)?;
    let mut values = st.apply(&x.values)?;
    // constant columns: the centered values are already 0 up to rounding
    for j in 0..values.ncols() {
        let col = x.values.column(j);
        if col.iter().all(|v| *v == col[0]) {
            values.column_mut(j).fill(0.0);
        }
    }
    let out = FeatureMatrix {
        values,
        ..x.clone()
    };
    Ok((out, st.means, st.scales))
}

/// Fitted principal-component projection, including the standardization it
/// was fitted after.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    /// `k` rows of length `m`, orthonormal.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

const EIGEN_EPS: f64 = 1e-14;
const EIGEN_MAX_ITER: usize = 10_000;

impl PcaModel {
    /// Standardizes `x`, then keeps the top-`k` eigenvectors of the sample
    /// covariance. Requires `1 <= k <= min(n - 1, m)`.
    pub fn fit(x: &DMatrix<f64>, k: usize) -> Result<Self> {
        let (n, m) = x.shape();
        if k == 0 || n < 2 || k > (n - 1).min(m) {
            return Err(Error::Parameter(format!(
                "k = {k} outside [1, min(n - 1, m)] for n = {n}, m = {m}"
            )));
        }
        Self::fit_inner(x, k, None)
    }

    /// Like [`PcaModel::fit`] but silently truncates `k` to the numerical
    /// rank (eigenvalues above `rank_tol` times the largest).
    pub fn fit_up_to(x: &DMatrix<f64>, k_max: usize, rank_tol: f64) -> Result<Self> {
        let (n, m) = x.shape();
        if k_max == 0 || n < 2 {
            return Err(Error::Parameter(format!("k = {k_max} with n = {n}")));
        }
        Self::fit_inner(x, k_max.min(n - 1).min(m), Some(rank_tol))
    }

    fn fit_inner(x: &DMatrix<f64>, k: usize, rank_tol: Option<f64>) -> Result<Self> {
        let (n, m) = x.shape();
        let st = Standardizer::fit(x)?;
        let z = st.apply(x)?;
        let cov = (z.transpose() * &z) / (n - 1) as f64;
        let eig = SymmetricEigen::try_new(cov, EIGEN_EPS, EIGEN_MAX_ITER).ok_or_else(|| {
            Error::Numeric(format!(
                "symmetric eigensolver did not converge within {EIGEN_MAX_ITER} iterations on a {m}x{m} covariance"
            ))
        })?;
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
        if total <= 0.0 {
            return Err(Error::Numeric("covariance has zero trace; every column is constant".into()));
        }
        let top = eig.eigenvalues[order[0]];
        let k = match rank_tol {
            Some(tol) => order.iter().take(k).take_while(|&&i| eig.eigenvalues[i] > tol * top).count().max(1),
            None => k,
        };
        let mut components = Vec::with_capacity(k);
        let mut eigenvalues = Vec::with_capacity(k);
        for &i in order.iter().take(k) {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            let lead = v
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |acc, (j, x)| if x.abs() > acc.1.abs() + 1e-12 { (j, *x) } else { acc });
            if lead.1 < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            components.push(v);
            eigenvalues.push(eig.eigenvalues[i].max(0.0));
        }
        let explained_variance_ratio = eigenvalues.iter().map(|l| l / total).collect();
        Ok(PcaModel {
            means: st.means,
            scales: st.scales,
            components,
            eigenvalues,
            explained_variance_ratio,
        })
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn component_matrix(&self) -> DMatrix<f64> {
        let m = self.means.len();
        DMatrix::from_fn(self.k(), m, |i, j| self.components[i][j])
    }

    /// Projects standardized rows of `x` onto the components (`n x k`).
    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let st = Standardizer {
            means: self.means.clone(),
            scales: self.scales.clone(),
        };
        let z = st.apply(x)?;
        Ok(z * self.component_matrix().transpose())
    }

    /// Maps scores back to the original feature space.
    pub fn inverse_transform(&self, scores: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = scores * self.component_matrix();
        for (j, mut col) in z.column_iter_mut().enumerate() {
            for v in col.iter_mut() {
                *v = *v * self.scales[j] + self.means[j];
            }
        }
        z
    }

    /// Transforms a feature matrix into a score matrix with columns
    /// `pc_1..pc_k`, all tagged [`FeatureGroup::Pca`].
    pub fn transform_matrix(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        FeatureMatrix::new(
            x.rows.clone(),
            x.labels.clone(),
            (1..=self.k()).map(|i| format!("pc_{i}")).collect(),
            vec![FeatureGroup::Pca; self.k()],
            self.transform(&x.values)?,
        )
    }
}

/// Column variances (denominator n - 1).
pub fn column_variances(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows() as f64;
    DVector::from_iterator(
        x.ncols(),
        x.column_iter().map(|c| {
            let mu = c.iter().sum::<f64>() / n;
            c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0)
        }),
    )
}
