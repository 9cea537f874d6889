//! Cross-validation folds, confusion matrices, joint accuracy, ROC/AUC and
//! the two reference baselines.
//!
//! For every dichotomy the positive class is its first letter (E, N, T, J).
//! Score ties receive half credit everywhere.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mbti::Dichotomy;
use crate::seed;

/// Number of points in the shared false-positive-rate grid used by
/// [`auc_macro`].
pub const MACRO_GRID_POINTS: usize = 1001;

/// Splits `0..keys.len()` into `k` test folds, stratified on `keys`.
///
/// Rows are grouped by key, shuffled within each group and dealt to folds
/// round-robin with one running position across groups, so every key is
/// spread as evenly as possible and fold sizes differ by at most one.
pub fn stratified_folds_by_key<K: Ord + Clone>(keys: &[K], k: usize, seed_value: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Parameter(format!("need at least 2 folds, got {k}")));
    }
    if keys.len() < k {
        return Err(Error::Stratification(format!("{} rows cannot fill {k} folds", keys.len())));
    }
    let mut groups: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, key) in keys.iter().enumerate() {
        groups.entry(key.clone()).or_default().push(i);
    }
    let mut rng = seed::rng(seed_value);
    let mut folds = vec![Vec::new(); k];
    let mut position = 0;
    for members in groups.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[position % k].push(i);
            position += 1;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

/// Stratified k-fold test sets for binary labels.
pub fn stratified_kfold(y: &[bool], k: usize, seed_value: u64) -> Result<Vec<Vec<usize>>> {
    let pos = y.iter().filter(|v| **v).count();
    let neg = y.len() - pos;
    if pos < k || neg < k {
        return Err(Error::Stratification(format!(
            "class counts {pos}/{neg} are below the fold count {k}"
        )));
    }
    stratified_folds_by_key(y, k, seed_value)
}

/// Training indices complementary to one test fold.
pub fn training_indices(n: usize, test: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    test.iter().for_each(|&i| mask[i] = false);
    (0..n).filter(|&i| mask[i]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn from_predictions(predicted: &[bool], truth: &[bool]) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(Error::Shape(format!(
                "{} predictions for {} truths",
                predicted.len(),
                truth.len()
            )));
        }
        let mut cm = ConfusionMatrix::default();
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p, t) {
                (true, true) => cm.tp += 1,
                (true, false) => cm.fp += 1,
                (false, false) => cm.tn += 1,
                (false, true) => cm.fn_ += 1,
            }
        }
        Ok(cm)
    }

    pub fn n(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.n())
    }

    /// Recall of the positive (first-letter) class.
    pub fn recall_positive(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Recall of the negative (second-letter) class.
    pub fn recall_negative(&self) -> f64 {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn recall_of(&self, positive: bool) -> f64 {
        if positive {
            self.recall_positive()
        } else {
            self.recall_negative()
        }
    }

    /// Share of rows predicted as the given class.
    pub fn predicted_share(&self, positive: bool) -> f64 {
        let k = if positive { self.tp + self.fp } else { self.tn + self.fn_ };
        ratio(k, self.n())
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        f64::NAN
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointAccuracyReport {
    pub n: usize,
    /// Percentage of users with exactly 0, 1, 2, 3 and 4 dichotomies right.
    pub exactly: [f64; 5],
    pub acc_4: f64,
    pub acc_ge3: f64,
    pub acc_ge2: f64,
    pub acc_ge1: f64,
}

impl JointAccuracyReport {
    fn from_distribution(n: usize, exactly: [f64; 5]) -> Self {
        let tail = |k: usize| exactly[k..].iter().sum::<f64>();
        JointAccuracyReport {
            n,
            exactly,
            acc_4: exactly[4],
            acc_ge3: tail(3),
            acc_ge2: tail(2),
            acc_ge1: tail(1),
        }
    }

    /// Equal-weight mean of several reports (e.g. one per fold).
    pub fn mean(reports: &[JointAccuracyReport]) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::InsufficientData("no reports to average".into()));
        }
        let k = reports.len() as f64;
        let mut exactly = [0.0; 5];
        for r in reports {
            exactly.iter_mut().zip(&r.exactly).for_each(|(a, b)| *a += b / k);
        }
        let mut out = Self::from_distribution(reports.iter().map(|r| r.n).sum(), exactly);
        let mean = |f: fn(&JointAccuracyReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
        out.acc_4 = mean(|r| r.acc_4);
        out.acc_ge3 = mean(|r| r.acc_ge3);
        out.acc_ge2 = mean(|r| r.acc_ge2);
        out.acc_ge1 = mean(|r| r.acc_ge1);
        Ok(out)
    }

    /// `[acc_4, acc_ge3, acc_ge2, acc_ge1]`.
    pub fn columns(&self) -> [f64; 4] {
        [self.acc_4, self.acc_ge3, self.acc_ge2, self.acc_ge1]
    }
}

/// Per-user count of correctly predicted dichotomies, summarised as
/// percentages. `predictions[d][i]` and `truths[d][i]` hold dichotomy `d`
/// of user `i`.
pub fn joint_accuracy(predictions: &[Vec<bool>], truths: &[Vec<bool>]) -> Result<JointAccuracyReport> {
    if predictions.len() != 4 || truths.len() != 4 {
        return Err(Error::Shape(format!(
            "expected 4 dichotomies, got {} predictions and {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    let n = truths[0].len();
    if predictions.iter().chain(truths).any(|v| v.len() != n) {
        return Err(Error::Shape("prediction and truth vectors differ in length".into()));
    }
    if n == 0 {
        return Err(Error::InsufficientData("no users to score".into()));
    }
    let mut counts = [0usize; 5];
    for i in 0..n {
        let c = (0..4).filter(|&d| predictions[d][i] == truths[d][i]).count();
        counts[c] += 1;
    }
    let exactly = counts.map(|c| 100.0 * c as f64 / n as f64);
    Ok(JointAccuracyReport::from_distribution(n, exactly))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(fpr, tpr)` from the highest threshold down; starts at (0, 0) and
    /// ends at (1, 1).
    pub points: Vec<(f64, f64)>,
}

impl RocCurve {
    /// TPR at `fpr` by linear interpolation. At an FPR where the curve
    /// rises vertically the top of the rise is returned.
    pub fn tpr_at(&self, fpr: f64) -> f64 {
        let pts = &self.points;
        let upper = pts.partition_point(|p| p.0 <= fpr);
        if upper == 0 {
            return 0.0;
        }
        let (x0, y0) = pts[upper - 1];
        if x0 == fpr || upper == pts.len() {
            return y0;
        }
        let (x1, y1) = pts[upper];
        y0 + (y1 - y0) * (fpr - x0) / (x1 - x0)
    }
}

/// ROC curve and AUC. The AUC is the probability that a random positive
/// outscores a random negative with ties counted one half; it is computed
/// as an integer count followed by a single division.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<(RocCurve, f64)> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric("NaN score".into()));
    }
    let p = labels.iter().filter(|v| **v).count() as u64;
    let q = labels.len() as u64 - p;
    if p == 0 || q == 0 {
        return Err(Error::UndefinedInput(format!(
            "AUC needs both classes; got {p} positive and {q} negative"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the area in units of one (positive, negative) pair
    let mut area2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (mut dtp, mut dfp) = (0u64, 0u64);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                dtp += 1;
            } else {
                dfp += 1;
            }
            i += 1;
        }
        area2 += dfp as u128 * (2 * tp + dtp) as u128;
        tp += dtp;
        fp += dfp;
        points.push((fp as f64 / q as f64, tp as f64 / p as f64));
    }
    let auc = area2 as f64 / (2 * p as u128 * q as u128) as f64;
    Ok((RocCurve { points }, auc))
}

/// AUC of all `(score, label)` pairs pooled across the models.
pub fn auc_micro(models: &[(Vec<f64>, Vec<bool>)]) -> Result<f64> {
    if models.is_empty() {
        return Err(Error::InsufficientData("no models to pool".into()));
    }
    for (s, l) in models {
        roc_auc(s, l)?;
    }
    let scores: Vec<f64> = models.iter().flat_map(|m| m.0.iter().copied()).collect();
    let labels: Vec<bool> = models.iter().flat_map(|m| m.1.iter().copied()).collect();
    Ok(roc_auc(&scores, &labels)?.1)
}

/// Mean of the per-model ROC curves on a shared FPR grid, integrated with
/// the trapezoid rule.
pub fn auc_macro(models: &[(Vec<f64>, Vec<bool>)]) -> Result<f64> {
    if models.is_empty() {
        return Err(Error::InsufficientData("no models to average".into()));
    }
    let curves = models
        .iter()
        .map(|(s, l)| roc_auc(s, l).map(|r| r.0))
        .collect::<Result<Vec<_>>>()?;
    let mean_tpr: Vec<f64> = (0..MACRO_GRID_POINTS)
        .map(|g| {
            let fpr = g as f64 / (MACRO_GRID_POINTS - 1) as f64;
            curves.iter().map(|c| c.tpr_at(fpr)).sum::<f64>() / curves.len() as f64
        })
        .collect();
    let last = mean_tpr.len() - 1;
    let interior: f64 = mean_tpr[1..last].iter().sum();
    Ok((0.5 * (mean_tpr[0] + mean_tpr[last]) + interior) / last as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub accuracy: JointAccuracyReport,
    pub auc: f64,
}

/// Independent fair coins for each dichotomy, reported analytically:
/// exactly `c` of 4 right with probability `C(4, c)/16`.
pub fn baseline_random(n: usize) -> BaselineReport {
    let exactly = [1.0, 4.0, 6.0, 4.0, 1.0].map(|c| 100.0 * c / 16.0);
    BaselineReport {
        accuracy: JointAccuracyReport::from_distribution(n, exactly),
        auc: 0.5,
    }
}

/// The more frequent training letter of a dichotomy; a tie goes to the
/// alphabetically first letter.
pub fn majority_letter(d: Dichotomy, train_y: &[bool]) -> bool {
    let pos = train_y.iter().filter(|v| **v).count();
    let neg = train_y.len() - pos;
    if pos != neg {
        return pos > neg;
    }
    let (first, second) = d.letters();
    first < second
}

/// Predicts each dichotomy's training-majority letter for every user. The
/// AUC of a constant predictor is 0.5.
pub fn baseline_majority(train_y: &[Vec<bool>], test_truths: &[Vec<bool>]) -> Result<BaselineReport> {
    if train_y.len() != 4 || test_truths.len() != 4 {
        return Err(Error::Shape("expected 4 dichotomies".into()));
    }
    let predictions: Vec<Vec<bool>> = Dichotomy::ALL
        .iter()
        .map(|&d| vec![majority_letter(d, &train_y[d.index()]); test_truths[d.index()].len()])
        .collect();
    Ok(BaselineReport {
        accuracy: joint_accuracy(&predictions, test_truths)?,
        auc: 0.5,
    })
}
