//! Class-imbalance treatments: class weights, random up/down-sampling and
//! SMOTE. Binary labels use `true` for the positive class.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, Rng};

pub const DEFAULT_SMOTE_K: usize = 5;

/// Serialized in its textual form (`none`, `upsample`, `smote:5`, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum SamplerKind {
    None,
    ClassWeights,
    Upsample,
    Smote { k: usize },
    Downsample,
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplerKind::None => f.write_str("none"),
            SamplerKind::ClassWeights => f.write_str("class_weights"),
            SamplerKind::Upsample => f.write_str("upsample"),
            SamplerKind::Smote { k } => write!(f, "smote:{k}"),
            SamplerKind::Downsample => f.write_str("downsample"),
        }
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    /// Accepts `none`, `class_weights`, `upsample`, `downsample`, `smote`
    /// and `smote:K`.
    fn from_str(s: &str) -> Result<Self> {
        let kind = match s {
            "none" => SamplerKind::None,
            "class_weights" | "weights" => SamplerKind::ClassWeights,
            "upsample" => SamplerKind::Upsample,
            "downsample" => SamplerKind::Downsample,
            "smote" => SamplerKind::Smote { k: DEFAULT_SMOTE_K },
            other => match other.strip_prefix("smote:").map(str::parse::<usize>) {
                Some(Ok(k)) if k >= 1 => SamplerKind::Smote { k },
                _ => return Err(Error::Parameter(format!("unknown sampler {s:?}"))),
            },
        };
        Ok(kind)
    }
}

impl From<SamplerKind> for String {
    fn from(k: SamplerKind) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for SamplerKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

fn class_counts(y: &[bool]) -> Result<(usize, usize)> {
    let pos = y.iter().filter(|&&v| v).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateLabels(format!("{pos} positive and {neg} negative rows")));
    }
    Ok((pos, neg))
}

/// `w_c = n / (2 n_c)`, so both classes carry total weight `n / 2`.
pub fn class_weights(y: &[bool]) -> Result<(f64, f64)> {
    let (pos, neg) = class_counts(y)?;
    let n = y.len() as f64;
    Ok((n / (2.0 * pos as f64), n / (2.0 * neg as f64)))
}

/// Per-row weights from [`class_weights`].
pub fn balanced_sample_weights(y: &[bool]) -> Result<Vec<f64>> {
    let (wp, wn) = class_weights(y)?;
    Ok(y.iter().map(|&v| if v { wp } else { wn }).collect())
}

fn minority_class(y: &[bool]) -> Result<(bool, Vec<usize>, Vec<usize>)> {
    let (pos, neg) = class_counts(y)?;
    let minority = pos < neg;
    let min_idx = (0..y.len()).filter(|&i| y[i] == minority).collect();
    let maj_idx = (0..y.len()).filter(|&i| y[i] != minority).collect();
    Ok((minority, min_idx, maj_idx))
}

fn append_rows(x: &DMatrix<f64>, extra: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = x.shape();
    let mut out = x.clone().resize_vertically(n + extra.nrows(), 0.0);
    out.rows_mut(n, extra.nrows()).copy_from(extra);
    debug_assert_eq!(out.ncols(), m);
    out
}

/// Appends minority rows drawn with replacement until both classes have
/// the majority count. Original rows come first, unchanged.
pub fn upsample(x: &DMatrix<f64>, y: &[bool], seed: u64) -> Result<(DMatrix<f64>, Vec<bool>)> {
    check_rows(x, y)?;
    let (minority, min_idx, maj_idx) = minority_class(y)?;
    let need = maj_idx.len() - min_idx.len();
    let mut rng = seed::rng(seed);
    let picks: Vec<usize> = (0..need).map(|_| min_idx[rng.random_range(0..min_idx.len())]).collect();
    let extra = x.select_rows(&picks);
    let mut y_out = y.to_vec();
    y_out.extend(std::iter::repeat_n(minority, need));
    Ok((append_rows(x, &extra), y_out))
}

/// Keeps a without-replacement subset of the majority class equal in size
/// to the minority. Surviving rows keep their relative order.
pub fn downsample(x: &DMatrix<f64>, y: &[bool], seed: u64) -> Result<(DMatrix<f64>, Vec<bool>)> {
    check_rows(x, y)?;
    let (_, min_idx, maj_idx) = minority_class(y)?;
    let mut rng = seed::rng(seed);
    let mut keep: Vec<usize> = sample(&mut rng, maj_idx.len(), min_idx.len())
        .into_iter()
        .map(|i| maj_idx[i])
        .chain(min_idx)
        .collect();
    keep.sort_unstable();
    let y_out = keep.iter().map(|&i| y[i]).collect();
    Ok((x.select_rows(&keep), y_out))
}

/// Where a synthetic row came from: `base + gap * (neighbor - base)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticOrigin {
    pub base: usize,
    pub neighbor: usize,
    pub gap: f64,
}

pub fn interpolate(base: &[f64], neighbor: &[f64], gap: f64) -> Vec<f64> {
    base.iter().zip(neighbor).map(|(a, b)| a + gap * (b - a)).collect()
}

/// Indices (into `points`) of the `k` nearest other points of each point,
/// by squared Euclidean distance, ties broken by index.
pub fn nearest_neighbors(points: &DMatrix<f64>, k: usize) -> Vec<Vec<usize>> {
    let n = points.nrows();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| ((points.row(i) - points.row(j)).norm_squared(), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Generates `n_needed` synthetic minority rows. Each picks a minority row
/// uniformly, one of its `k` nearest minority neighbours uniformly and a gap
/// `u ~ U[0, 1)`. Returned origins index rows of `x`.
pub fn smote(
    x: &DMatrix<f64>,
    y: &[bool],
    k: usize,
    n_needed: usize,
    seed: u64,
) -> Result<(DMatrix<f64>, Vec<SyntheticOrigin>)> {
    check_rows(x, y)?;
    let (_, min_idx, _) = minority_class(y)?;
    if min_idx.len() < 2 {
        return Err(Error::Parameter(format!("SMOTE needs at least 2 minority rows, got {}", min_idx.len())));
    }
    if k == 0 || k > min_idx.len() - 1 {
        return Err(Error::Parameter(format!(
            "SMOTE k = {k} must lie in [1, {}]",
            min_idx.len() - 1
        )));
    }
    let minority = x.select_rows(&min_idx);
    let neighbors = nearest_neighbors(&minority, k);
    let mut rng: Rng = seed::rng(seed);
    let mut rows = DMatrix::zeros(n_needed, x.ncols());
    let mut origins = Vec::with_capacity(n_needed);
    for r in 0..n_needed {
        let i = rng.random_range(0..min_idx.len());
        let j = neighbors[i][rng.random_range(0..k)];
        let gap: f64 = rng.random();
        let synthetic = minority.row(i) + (minority.row(j) - minority.row(i)) * gap;
        rows.row_mut(r).copy_from(&synthetic);
        origins.push(SyntheticOrigin {
            base: min_idx[i],
            neighbor: min_idx[j],
            gap,
        });
    }
    Ok((rows, origins))
}

/// SMOTE until the classes balance; synthetic rows are appended.
pub fn smote_balance(x: &DMatrix<f64>, y: &[bool], k: usize, seed: u64) -> Result<(DMatrix<f64>, Vec<bool>)> {
    let (minority, min_idx, maj_idx) = minority_class(y)?;
    let need = maj_idx.len() - min_idx.len();
    let (rows, _) = smote(x, y, k, need, seed)?;
    let mut y_out = y.to_vec();
    y_out.extend(std::iter::repeat_n(minority, need));
    Ok((append_rows(x, &rows), y_out))
}

fn check_rows(x: &DMatrix<f64>, y: &[bool]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Shape(format!("{} rows but {} labels", x.nrows(), y.len())));
    }
    Ok(())
}

/// Training data after a sampler: rows, labels and optional row weights.
#[derive(Debug, Clone)]
pub struct Resampled {
    pub x: DMatrix<f64>,
    pub y: Vec<bool>,
    pub weights: Option<Vec<f64>>,
}

pub fn apply_sampler(kind: SamplerKind, x: &DMatrix<f64>, y: &[bool], seed: u64) -> Result<Resampled> {
    check_rows(x, y)?;
    let (x, y, weights) = match kind {
        SamplerKind::None => {
            class_counts(y)?;
            (x.clone(), y.to_vec(), None)
        }
        SamplerKind::ClassWeights => (x.clone(), y.to_vec(), Some(balanced_sample_weights(y)?)),
        SamplerKind::Upsample => {
            let (x, y) = upsample(x, y, seed)?;
            (x, y, None)
        }
        SamplerKind::Downsample => {
            let (x, y) = downsample(x, y, seed)?;
            (x, y, None)
        }
        SamplerKind::Smote { k } => {
            let (x, y) = smote_balance(x, y, k, seed)?;
            (x, y, None)
        }
    };
    Ok(Resampled { x, y, weights })
}
