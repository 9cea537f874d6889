//! Feature-importance statistics: Cramér's V, Wald statistics, stepwise
//! selection, group retention tests and Wilson intervals.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balance::{apply_sampler, SamplerKind};
use crate::error::{Error, Result};
use crate::features::{FeatureGroup, FeatureMatrix};
use crate::learn::logistic::{fit_logistic, LogisticConfig, LrModel};
use crate::mbti::{Dichotomy, MbtiType};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<u64>>,
}

impl ContingencyTable {
    pub fn new(counts: Vec<Vec<u64>>) -> Result<Self> {
        let c = counts.first().map_or(0, |r| r.len());
        if counts.iter().any(|r| r.len() != c) {
            return Err(Error::Shape("contingency table rows differ in length".into()));
        }
        Ok(ContingencyTable { counts })
    }

    pub fn n(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.counts.len(), self.counts.first().map_or(0, |r| r.len()))
    }

    fn margins(&self) -> (Vec<f64>, Vec<f64>) {
        let (r, c) = self.shape();
        let rows = (0..r).map(|i| self.counts[i].iter().sum::<u64>() as f64).collect();
        let cols = (0..c).map(|j| self.counts.iter().map(|row| row[j]).sum::<u64>() as f64).collect();
        (rows, cols)
    }

    /// Pearson statistic without continuity correction. Cells whose
    /// expected count is zero contribute nothing.
    pub fn chi_squared(&self) -> f64 {
        let n = self.n() as f64;
        let (rows, cols) = self.margins();
        let mut chi = 0.0;
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &o) in row.iter().enumerate() {
                let e = rows[i] * cols[j] / n;
                if e > 0.0 {
                    chi += (o as f64 - e).powi(2) / e;
                }
            }
        }
        chi
    }

    /// 2×2 co-occurrence of two dichotomies' letters across users.
    pub fn dichotomy_pair(types: &[MbtiType], a: Dichotomy, b: Dichotomy) -> Self {
        let mut counts = vec![vec![0u64; 2]; 2];
        for t in types {
            counts[usize::from(!t.is_first(a))][usize::from(!t.is_first(b))] += 1;
        }
        ContingencyTable { counts }
    }
}

/// Bias-corrected Cramér's V in [0, 1].
pub fn cramers_v_bias_corrected(table: &ContingencyTable) -> Result<f64> {
    let (r, c) = table.shape();
    let n = table.n();
    if r < 2 || c < 2 {
        return Err(Error::Shape(format!("Cramér's V needs at least a 2×2 table, got {r}×{c}")));
    }
    if n < 2 {
        return Err(Error::Shape(format!("Cramér's V needs n ≥ 2, got {n}")));
    }
    let (rows, cols) = table.margins();
    if rows.iter().chain(&cols).any(|m| *m == 0.0) {
        return Err(Error::Shape("table has an all-zero row or column".into()));
    }
    let (nf, rf, cf) = (n as f64, r as f64, c as f64);
    let phi2 = table.chi_squared() / nf;
    let phi2_plus = (phi2 - (rf - 1.0) * (cf - 1.0) / (nf - 1.0)).max(0.0);
    let r_plus = rf - (rf - 1.0).powi(2) / (nf - 1.0);
    let c_plus = cf - (cf - 1.0).powi(2) / (nf - 1.0);
    let denom = (r_plus - 1.0).min(c_plus - 1.0);
    if !(denom > 0.0) {
        return Err(Error::Shape(format!("bias correction leaves no degrees of freedom at n = {n}")));
    }
    Ok((phi2_plus / denom).sqrt().min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldStatistic {
    pub coefficient: f64,
    pub standard_error: f64,
    pub statistic: f64,
    pub p_value: f64,
}

pub fn wald(coefficient: f64, standard_error: f64) -> WaldStatistic {
    let statistic = coefficient / standard_error;
    WaldStatistic {
        coefficient,
        standard_error,
        statistic,
        p_value: stats::two_sided_normal_p(statistic),
    }
}

/// Statistic and two-sided normal p-value for every slope coefficient.
pub fn wald_statistics(model: &LrModel) -> Result<Vec<WaldStatistic>> {
    if !model.converged {
        return Err(Error::NotConverged(format!(
            "model stopped after {} iterations with gradient {:e}; Wald statistics are not meaningful",
            model.iterations, model.gradient_norm
        )));
    }
    let se = model
        .standard_errors
        .as_ref()
        .ok_or_else(|| Error::NotConverged("model has no standard errors (singular information)".into()))?;
    Ok(model.coefficients.iter().zip(&se[1..]).map(|(&b, &s)| wald(b, s)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepAction {
    Add,
    Remove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub action: StepAction,
    pub feature: String,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupCount {
    pub retained: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub steps: Vec<Step>,
    /// Final features in the order they entered.
    pub retained: Vec<String>,
    pub groups: BTreeMap<FeatureGroup, GroupCount>,
}

impl SelectionTrace {
    /// Applies the steps to an empty set.
    pub fn replay(&self) -> Vec<String> {
        let mut set: Vec<String> = Vec::new();
        for s in &self.steps {
            match s.action {
                StepAction::Add => set.push(s.feature.clone()),
                StepAction::Remove => set.retain(|f| f != &s.feature),
            }
        }
        set
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepwiseConfig {
    pub p_in: f64,
    pub p_out: f64,
    pub max_steps: usize,
    pub sampler: SamplerKind,
    pub lr: LogisticConfig,
}

impl Default for StepwiseConfig {
    fn default() -> Self {
        StepwiseConfig {
            p_in: 0.05,
            p_out: 0.1,
            max_steps: 200,
            sampler: SamplerKind::Upsample,
            lr: LogisticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub trace: SelectionTrace,
    /// Fit on the retained features, in `trace.retained` order; `None` when
    /// nothing was retained.
    pub model: Option<LrModel>,
}

struct Fitter<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [bool],
    weights: Option<&'a [f64]>,
    lr: &'a LogisticConfig,
}

impl Fitter<'_> {
    fn fit(&self, cols: &[usize]) -> Result<(LrModel, Vec<WaldStatistic>)> {
        let model = fit_logistic(&self.x.select_columns(cols), self.y, self.weights, self.lr)?;
        let w = wald_statistics(&model)?;
        Ok((model, w))
    }
}

/// Bidirectional stepwise logistic selection from the null model.
///
/// The sampler is applied once to the whole input before the search. Each
/// forward step refits the model with every remaining candidate and adds
/// the one with the smallest p-value if it is below `p_in`; each backward
/// step drops the retained feature with the largest p-value if it exceeds
/// `p_out`. A feature is added at most once and removed at most once, and
/// the search stops after `max_steps` changes. Constant columns are never
/// candidates. Candidates whose fit fails
/// or lacks standard errors are skipped with a warning.
pub fn stepwise_select(x: &FeatureMatrix, y: &[bool], config: &StepwiseConfig, seed_value: u64) -> Result<Selection> {
    if !(config.p_in > 0.0 && config.p_in < config.p_out && config.p_out <= 1.0) {
        return Err(Error::Parameter(format!(
            "need 0 < p_in < p_out ≤ 1, got p_in {} and p_out {}",
            config.p_in, config.p_out
        )));
    }
    if y.len() != x.n_rows() {
        return Err(Error::Shape(format!("{} rows but {} labels", x.n_rows(), y.len())));
    }
    x.validate()?;
    let data = apply_sampler(config.sampler, &x.values, y, seed_value)?;
    let fitter = Fitter {
        x: &data.x,
        y: &data.y,
        weights: data.weights.as_deref(),
        lr: &config.lr,
    };

    let m = x.n_cols();
    let constant: Vec<bool> = (0..m)
        .map(|j| {
            let c = data.x.column(j);
            c.iter().all(|v| *v == c[0])
        })
        .collect();
    let mut retained: Vec<usize> = Vec::new();
    let mut used: BTreeSet<(StepAction, usize)> = BTreeSet::new();
    let mut steps = Vec::new();
    let mut current: Option<(LrModel, Vec<WaldStatistic>)> = None;
    while steps.len() < config.max_steps {
        let mut changed = false;

        let candidates: Vec<usize> = (0..m)
            .filter(|&j| !constant[j] && !retained.contains(&j) && !used.contains(&(StepAction::Add, j)))
            .collect();
        let fits: Vec<(usize, Option<(LrModel, Vec<WaldStatistic>)>)> = candidates
            .par_iter()
            .map(|&j| {
                let mut cols = retained.clone();
                cols.push(j);
                match fitter.fit(&cols) {
                    Ok(f) => (j, Some(f)),
                    Err(e) => {
                        log::debug!("stepwise: skipping candidate {}: {e}", x.columns[j]);
                        (j, None)
                    }
                }
            })
            .collect();
        let best = fits
            .into_iter()
            .filter_map(|(j, f)| f.map(|f| (j, f)))
            .filter(|(_, f)| f.1.last().is_some_and(|w| !w.p_value.is_nan()))
            .min_by(|a, b| {
                let pa = a.1 .1.last().unwrap().p_value;
                let pb = b.1 .1.last().unwrap().p_value;
                pa.total_cmp(&pb).then(a.0.cmp(&b.0))
            });
        if let Some((j, fit)) = best {
            let p = fit.1.last().unwrap().p_value;
            if p < config.p_in {
                retained.push(j);
                used.insert((StepAction::Add, j));
                steps.push(Step {
                    action: StepAction::Add,
                    feature: x.columns[j].clone(),
                    p_value: p,
                });
                current = Some(fit);
                changed = true;
            }
        }
        if steps.len() >= config.max_steps {
            break;
        }

        if let Some((_, w)) = &current {
            let worst = (0..retained.len())
                .filter(|&k| !used.contains(&(StepAction::Remove, retained[k])))
                .max_by(|&a, &b| w[a].p_value.total_cmp(&w[b].p_value).then(b.cmp(&a)));
            if let Some(k) = worst {
                let p = w[k].p_value;
                if p > config.p_out {
                    let j = retained.remove(k);
                    used.insert((StepAction::Remove, j));
                    steps.push(Step {
                        action: StepAction::Remove,
                        feature: x.columns[j].clone(),
                        p_value: p,
                    });
                    current = if retained.is_empty() {
                        None
                    } else {
                        Some(fitter.fit(&retained)?)
                    };
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let mut groups: BTreeMap<FeatureGroup, GroupCount> = BTreeMap::new();
    for (j, g) in x.groups.iter().enumerate() {
        let e = groups.entry(*g).or_insert(GroupCount { retained: 0, total: 0 });
        e.total += 1;
        e.retained += usize::from(retained.contains(&j));
    }
    Ok(Selection {
        trace: SelectionTrace {
            steps,
            retained: retained.iter().map(|&j| x.columns[j].clone()).collect(),
            groups,
        },
        model: current.map(|c| c.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub feature: String,
    pub group: FeatureGroup,
    pub statistic: f64,
    pub p_value: f64,
    /// Letter the feature pushes the prediction toward.
    pub preferred: char,
}

/// Retained features ranked by descending |Wald statistic|; ties keep the
/// model's column order.
pub fn variable_importance(
    names: &[String],
    groups: &[FeatureGroup],
    model: &LrModel,
    dichotomy: Dichotomy,
) -> Result<Vec<Importance>> {
    let w = wald_statistics(model)?;
    if names.len() != w.len() || groups.len() != w.len() {
        return Err(Error::Shape(format!(
            "{} names and {} groups for {} coefficients",
            names.len(),
            groups.len(),
            w.len()
        )));
    }
    let mut out: Vec<Importance> = w
        .iter()
        .enumerate()
        .map(|(j, s)| Importance {
            feature: names[j].clone(),
            group: groups[j],
            statistic: s.statistic,
            p_value: s.p_value,
            preferred: dichotomy.letter(s.coefficient > 0.0),
        })
        .collect();
    out.sort_by(|a, b| b.statistic.abs().total_cmp(&a.statistic.abs()));
    Ok(out)
}

pub const SUMMARY_ROWS: usize = 12;

pub fn top_importance(ranked: &[Importance], k: usize) -> &[Importance] {
    &ranked[..k.min(ranked.len())]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquaredTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Pearson chi-squared on the G×2 retained/excluded table. Groups with no
/// features are left out. If no feature at all was retained (or all were)
/// the table carries no information and the result is statistic 0, p 1.
pub fn group_retention_chisq(counts: &[GroupCount]) -> Result<ChiSquaredTest> {
    if let Some(bad) = counts.iter().find(|c| c.retained > c.total) {
        return Err(Error::Parameter(format!("{} retained out of {}", bad.retained, bad.total)));
    }
    let rows: Vec<Vec<u64>> = counts
        .iter()
        .filter(|c| c.total > 0)
        .map(|c| vec![c.retained as u64, (c.total - c.retained) as u64])
        .collect();
    if rows.len() < 2 {
        return Err(Error::TestUndefined(format!(
            "need at least 2 non-empty groups, got {}",
            rows.len()
        )));
    }
    let df = rows.len() - 1;
    let table = ContingencyTable::new(rows)?;
    let statistic = table.chi_squared();
    Ok(ChiSquaredTest {
        statistic,
        df,
        p_value: stats::chi_squared_sf(statistic, df as f64)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilsonInterval {
    pub successes: u64,
    pub n: u64,
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
}

impl WilsonInterval {
    pub fn estimate(&self) -> f64 {
        self.successes as f64 / self.n as f64
    }
}

pub fn wilson_ci(successes: u64, n: u64, level: f64) -> Result<WilsonInterval> {
    if n == 0 || successes > n {
        return Err(Error::Parameter(format!("Wilson interval needs 0 ≤ {successes} ≤ n = {n} and n ≥ 1")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Parameter(format!("confidence level {level} outside (0, 1)")));
    }
    let z = stats::normal_quantile((1.0 + level) / 2.0)?;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let lower = if successes == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let upper = if successes == n { 1.0 } else { (center + half).clamp(p, 1.0) };
    Ok(WilsonInterval {
        successes,
        n,
        level,
        lower,
        upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(c: &[&[u64]]) -> ContingencyTable {
        ContingencyTable::new(c.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn cramers_v_examples() {
        assert_eq!(cramers_v_bias_corrected(&table(&[&[5, 5], &[5, 5]])).unwrap(), 0.0);
        assert!((cramers_v_bias_corrected(&table(&[&[10, 0], &[0, 10]])).unwrap() - 1.0).abs() < 1e-12);
        // chi² = 20, n = 80: phi²+ = 0.25 − 1/79, denominator 1 − 1/79
        let want = ((0.25_f64 - 1.0 / 79.0) / (1.0 - 1.0 / 79.0)).sqrt();
        let v = cramers_v_bias_corrected(&table(&[&[30, 10], &[10, 30]])).unwrap();
        assert!((v - want).abs() < 1e-12 && (v - 0.4903).abs() < 1e-4);
        assert!(cramers_v_bias_corrected(&table(&[&[3, 0], &[4, 0]])).is_err());
        assert!(cramers_v_bias_corrected(&table(&[&[3, 4]])).is_err());
    }

    proptest! {
        #[test]
        fn cramers_v_symmetries(c in proptest::collection::vec(1u64..40, 6)) {
            let t = table(&[&c[0..3], &c[3..6]]);
            let tt = table(&[&[c[0], c[3]], &[c[1], c[4]], &[c[2], c[5]]]);
            let perm = table(&[&[c[5], c[3], c[4]], &[c[2], c[0], c[1]]]);
            let v = cramers_v_bias_corrected(&t).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!((v - cramers_v_bias_corrected(&tt).unwrap()).abs() < 1e-12);
            prop_assert!((v - cramers_v_bias_corrected(&perm).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn wilson_complement(n in 1u64..500, frac in 0.0f64..=1.0, level in 0.5f64..0.999) {
            let s = ((n as f64) * frac).round() as u64;
            let a = wilson_ci(s, n, level).unwrap();
            let b = wilson_ci(n - s, n, level).unwrap();
            prop_assert!(0.0 <= a.lower && a.lower <= a.estimate() && a.estimate() <= a.upper && a.upper <= 1.0);
            prop_assert!((a.lower - (1.0 - b.upper)).abs() < 1e-12);
            prop_assert!((a.upper - (1.0 - b.lower)).abs() < 1e-12);
        }
    }

    #[test]
    fn wilson_examples() {
        let w = wilson_ci(0, 10, 0.95).unwrap();
        assert_eq!(w.lower, 0.0);
        assert!((w.upper - 0.2775).abs() < 1e-4);
        let w = wilson_ci(5, 10, 0.95).unwrap();
        assert!((w.lower - 0.2366).abs() < 1e-4 && (w.upper - 0.7634).abs() < 1e-4);
        let w = wilson_ci(10, 10, 0.95).unwrap();
        assert!((w.lower - (1.0 - 0.2775)).abs() < 1e-4 && w.upper == 1.0);
        assert!(wilson_ci(11, 10, 0.95).is_err());
        assert!(wilson_ci(0, 0, 0.95).is_err());
    }

    #[test]
    fn wald_examples() {
        assert_eq!(wald(0.0, 1.0).p_value, 1.0);
        assert!((wald(1.959963984540054, 1.0).p_value - 0.05).abs() < 1e-9);
        assert_eq!(wald(-1.5, 0.5).p_value, wald(1.5, 0.5).p_value);
        let m = LrModel {
            intercept: 0.0,
            coefficients: vec![1.0],
            standard_errors: None,
            converged: false,
            iterations: 100,
            ridge: 0.0,
            gradient_norm: 1.0,
        };
        assert!(matches!(wald_statistics(&m), Err(Error::NotConverged(_))));
    }

    #[test]
    fn retention_chisq() {
        let g = |r, t| GroupCount { retained: r, total: t };
        let t = group_retention_chisq(&[g(10, 10), g(0, 10)]).unwrap();
        assert!((t.statistic - 20.0).abs() < 1e-12);
        assert_eq!(t.df, 1);
        assert!((t.p_value / 7.744216431044088e-06 - 1.0).abs() < 1e-8);
        let same = group_retention_chisq(&[g(2, 10), g(4, 20)]).unwrap();
        assert!(same.statistic.abs() < 1e-12 && (same.p_value - 1.0).abs() < 1e-12);
        assert!(matches!(group_retention_chisq(&[g(1, 4), g(0, 0)]), Err(Error::TestUndefined(_))));
        assert_eq!(group_retention_chisq(&[g(0, 4), g(0, 6), g(0, 3)]).unwrap().p_value, 1.0);
    }

    #[test]
    fn importance_ranking() {
        let m = LrModel {
            intercept: 0.0,
            coefficients: vec![3.0, -5.0],
            standard_errors: Some(vec![1.0, 1.0, 1.0]),
            converged: true,
            iterations: 3,
            ridge: 0.0,
            gradient_norm: 0.0,
        };
        let names = vec!["f1".to_string(), "f2".to_string()];
        let groups = vec![FeatureGroup::Liwc; 2];
        let r = variable_importance(&names, &groups, &m, Dichotomy::TF).unwrap();
        assert_eq!(r[0].feature, "f2");
        assert_eq!((r[0].preferred, r[1].preferred), ('F', 'T'));
        assert_eq!(top_importance(&r, SUMMARY_ROWS).len(), 2);
    }

    fn planted(n: usize, m: usize, signal: &[usize], seed_value: u64) -> (FeatureMatrix, Vec<bool>) {
        crate::synth::planted_design(n, m, signal, 2.5, seed_value).unwrap()
    }

    #[test]
    fn stepwise_finds_strong_signal() {
        let (x, y) = planted(400, 11, &[4], 8);
        let sel = stepwise_select(&x, &y, &StepwiseConfig::default(), 1).unwrap();
        assert!(sel.trace.retained.contains(&"x4".to_string()));
        assert_eq!(sel.trace.replay(), sel.trace.retained);
        let counts = &sel.trace.groups;
        assert_eq!(counts.values().map(|c| c.total).sum::<usize>(), 11);
        assert_eq!(counts.values().map(|c| c.retained).sum::<usize>(), sel.trace.retained.len());
        let model = sel.model.unwrap();
        assert_eq!(model.coefficients.len(), sel.trace.retained.len());
        // deterministic and independent of thread count
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let again = pool.install(|| stepwise_select(&x, &y, &StepwiseConfig::default(), 1).unwrap());
        assert_eq!(again.trace, sel.trace);
    }

    #[test]
    fn stepwise_rejects_bad_thresholds() {
        let (x, y) = planted(50, 2, &[0], 1);
        let cfg = StepwiseConfig { p_in: 0.2, p_out: 0.1, ..Default::default() };
        assert!(matches!(stepwise_select(&x, &y, &cfg, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn dichotomy_pair_table() {
        let types: Vec<MbtiType> = ["ENTJ", "ENFP", "ISTJ", "INTP"].iter().map(|s| s.parse().unwrap()).collect();
        let t = ContingencyTable::dichotomy_pair(&types, Dichotomy::EI, Dichotomy::NS);
        assert_eq!(t.counts, vec![vec![2, 0], vec![1, 1]]);
    }
}
