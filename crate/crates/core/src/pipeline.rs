//! Stage wiring and report rendering.
//!
//! Every stage is a pure function of its inputs and a [`RunConfig`]; all
//! randomness comes from `RunConfig::seed` through labelled child seeds:
//!
//! * `cv/folds` for the fold assignment,
//! * `cv/{fold}/{dichotomy}/sampler` and `cv/{fold}/{dichotomy}/model`
//!   inside cross-validation,
//! * `importance/{dichotomy}` for the stepwise upsampling.
//!
//! Reports carry a provenance header with the SHA-256 of the canonical
//! JSON form of the config and no timestamps, so equal configs give equal
//! bytes regardless of the thread count.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::BufRead;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::balance::{apply_sampler, SamplerKind};
use crate::corpus::{self, FilterOutcome, FilterPolicy, ParsedCorpus, UserRecord};
use crate::error::{Error, Result};
use crate::eval::{
    self, auc_macro, auc_micro, baseline_majority, baseline_random, joint_accuracy, roc_auc, BaselineReport,
    ConfusionMatrix, JointAccuracyReport,
};
use crate::features::{self, FeatureGroup, FeatureMatrix, Lexicons, PcaModel};
use crate::inference::{
    self, group_retention_chisq, stepwise_select, top_importance, variable_importance, wilson_ci, ChiSquaredTest,
    Importance, SelectionTrace, StepwiseConfig, WilsonInterval,
};
use crate::learn::{fit_model, ModelConfig, ModelKind};
use crate::mbti::Dichotomy;
use crate::seed;
use crate::textprep::StopwordDetector;

/// Relative eigenvalue cutoff below which principal components are dropped.
pub const PCA_RANK_TOLERANCE: f64 = 1e-10;

/// Which columns the importance run considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImportancePreset {
    /// Interpretable groups only: SM, BOTOMETER, LIWC and VADER.
    Descriptive,
    /// All five base groups including the embeddings.
    Groups,
    /// Emoji counts only.
    Emoji,
}

impl ImportancePreset {
    pub fn groups(self) -> &'static [FeatureGroup] {
        match self {
            ImportancePreset::Descriptive => &[
                FeatureGroup::Sm,
                FeatureGroup::Botometer,
                FeatureGroup::Liwc,
                FeatureGroup::Vader,
            ],
            ImportancePreset::Groups => &FeatureGroup::TABLE,
            ImportancePreset::Emoji => &[FeatureGroup::Emoji],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ImportancePreset::Descriptive => "descriptive",
            ImportancePreset::Groups => "groups",
            ImportancePreset::Emoji => "emoji",
        }
    }
}

impl FromStr for ImportancePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [ImportancePreset::Descriptive, ImportancePreset::Groups, ImportancePreset::Emoji]
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown importance preset {s:?}")))
    }
}

/// Analysis parameters. File locations and thread counts are deliberately
/// not part of it, so they never change a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub folds: usize,
    pub pca_components: usize,
    pub sampler: SamplerKind,
    pub model_kind: ModelKind,
    pub filter: FilterPolicy,
    pub parts: Vec<FeatureGroup>,
    pub models: ModelConfig,
    pub stepwise: StepwiseConfig,
    pub importance_preset: ImportancePreset,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            folds: 10,
            pca_components: 200,
            sampler: SamplerKind::None,
            model_kind: ModelKind::Lr,
            filter: FilterPolicy::default(),
            parts: FeatureGroup::TABLE.to_vec(),
            models: ModelConfig::default(),
            stepwise: StepwiseConfig::default(),
            importance_preset: ImportancePreset::Descriptive,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Parameter(format!("folds must be >= 2, got {}", self.folds)));
        }
        if self.pca_components < 1 {
            return Err(Error::Parameter("pca_components must be >= 1".into()));
        }
        if self.parts.is_empty() {
            return Err(Error::Parameter("no feature groups selected".into()));
        }
        if self.parts.contains(&FeatureGroup::Pca) {
            return Err(Error::Parameter("PCA is not an assembled feature group".into()));
        }
        self.filter.validate()
    }

    /// Compact JSON with fields in declaration order.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

const EVALUATION_ASSUMPTIONS: [&str; 9] = [
    "duplicate records share a user id; post text is NFC-normalized before tokenization",
    "the positive class of each dichotomy is its first letter (E, N, T, J)",
    "folds are stratified on the four-letter type and shared by the four dichotomy models",
    "accuracies and AUCs are means over folds with equal weight; confusion matrices are summed over folds",
    "standardization and PCA are fit on the training rows of each fold",
    "samplers touch training rows only",
    "macro AUC averages TPR on a 1001-point FPR grid; tied scores count one half",
    "the majority baseline breaks ties toward the alphabetically first letter",
    "svm is linear, trained on the hinge loss by subgradient descent, with uncalibrated margins",
];

const IMPORTANCE_ASSUMPTIONS: [&str; 4] = [
    "features are z-scored before selection; constant columns are never candidates",
    "the stepwise sampler is drawn once per dichotomy before the search",
    "t-statistics are Wald statistics with normal p-values",
    "chi-squared retention tests use no continuity correction",
];

fn provenance(title: &str, config: &RunConfig, assumptions: &[&str]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {title}");
    let _ = writeln!(s, "# config-sha256: {}", config.hash());
    let _ = writeln!(s, "# seed: {}", config.seed);
    let _ = writeln!(s, "# config: {}", config.canonical_json());
    let _ = writeln!(s, "# assumptions:");
    for a in assumptions {
        let _ = writeln!(s, "#   - {a}");
    }
    s
}

/// Parses JSON-lines records and drops repeated user ids.
pub fn ingest<R: BufRead>(reader: R) -> Result<ParsedCorpus> {
    let mut parsed = corpus::parse_records(reader)?;
    parsed.records = corpus::deduplicate(parsed.records);
    Ok(parsed)
}

pub fn filter(records: Vec<UserRecord>, policy: &FilterPolicy) -> Result<FilterOutcome> {
    policy.validate()?;
    Ok(corpus::filter_corpus(records, policy, &StopwordDetector::default()))
}

pub fn featurize(records: &[UserRecord], parts: &[FeatureGroup]) -> Result<FeatureMatrix> {
    if records.is_empty() {
        return Err(Error::InsufficientData("no records to featurize".into()));
    }
    features::assemble_matrix(records, parts, Lexicons::default(), None)
}

/// Fits PCA on every row and returns the score matrix.
pub fn reduce(matrix: &FeatureMatrix, components: usize) -> Result<(FeatureMatrix, PcaModel)> {
    let pca = PcaModel::fit_up_to(&matrix.values, components, PCA_RANK_TOLERANCE)?;
    Ok((pca.transform_matrix(matrix)?, pca))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyResult {
    pub dichotomy: String,
    /// Percent, mean over folds.
    pub accuracy: f64,
    /// Mean over folds.
    pub auc: f64,
    /// Summed over folds.
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierRow {
    pub name: String,
    pub joint: JointAccuracyReport,
    pub auc_macro: f64,
    pub auc_micro: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config: RunConfig,
    pub n_users: usize,
    pub n_features: usize,
    /// Principal components used in each fold (0 when the input was already
    /// reduced).
    pub components_per_fold: Vec<usize>,
    pub rows: Vec<ClassifierRow>,
    pub dichotomies: Vec<DichotomyResult>,
}

struct FoldResult {
    components: usize,
    confusion: [ConfusionMatrix; 4],
    accuracy: [f64; 4],
    auc: [f64; 4],
    joint: JointAccuracyReport,
    auc_macro: f64,
    auc_micro: f64,
    majority: BaselineReport,
}

fn select_rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    x.select_rows(idx)
}

fn run_fold(
    fold: usize,
    test: &[usize],
    x: &DMatrix<f64>,
    targets: &[Vec<bool>],
    reduced: bool,
    config: &RunConfig,
) -> Result<FoldResult> {
    let train = eval::training_indices(x.nrows(), test);
    let (mut xtr, mut xte) = (select_rows(x, &train), select_rows(x, test));
    let mut components = 0;
    if !reduced {
        let pca = PcaModel::fit_up_to(&xtr, config.pca_components, PCA_RANK_TOLERANCE)?;
        components = pca.k();
        xtr = pca.transform(&xtr)?;
        xte = pca.transform(&xte)?;
    }
    let pick = |y: &[bool], idx: &[usize]| idx.iter().map(|&i| y[i]).collect::<Vec<bool>>();
    let mut scored = Vec::with_capacity(4);
    let mut predictions = Vec::with_capacity(4);
    let mut truths = Vec::with_capacity(4);
    let mut train_truths = Vec::with_capacity(4);
    let mut confusion = [ConfusionMatrix::default(); 4];
    let mut accuracy = [0.0; 4];
    let mut auc = [0.0; 4];
    for d in Dichotomy::ALL {
        let k = d.index();
        let ytr = pick(&targets[k], &train);
        let yte = pick(&targets[k], test);
        let label = |what: &str| format!("cv/{fold}/{}/{what}", d.name());
        let data = apply_sampler(config.sampler, &xtr, &ytr, seed::derive(config.seed, &label("sampler")))?;
        let model = fit_model(
            config.model_kind,
            &config.models,
            &data.x,
            &data.y,
            data.weights.as_deref(),
            seed::derive(config.seed, &label("model")),
        )?;
        let scores = model.predict_scores(&xte)?;
        let threshold = model.default_threshold();
        let pred: Vec<bool> = scores.iter().map(|s| *s > threshold).collect();
        confusion[k] = ConfusionMatrix::from_predictions(&pred, &yte)?;
        accuracy[k] = 100.0 * confusion[k].accuracy();
        auc[k] = roc_auc(&scores, &yte)
            .map_err(|e| Error::Stratification(format!("fold {fold}, {}: {e}", d.name())))?
            .1;
        scored.push((scores, yte.clone()));
        predictions.push(pred);
        truths.push(yte);
        train_truths.push(ytr);
    }
    Ok(FoldResult {
        components,
        confusion,
        accuracy,
        auc,
        joint: joint_accuracy(&predictions, &truths)?,
        auc_macro: auc_macro(&scored)?,
        auc_micro: auc_micro(&scored)?,
        majority: baseline_majority(&train_truths, &truths)?,
    })
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Cross-validates the configured classifier on every dichotomy.
pub fn evaluate(matrix: &FeatureMatrix, config: &RunConfig) -> Result<EvaluationReport> {
    config.validate()?;
    matrix.validate()?;
    let targets: Vec<Vec<bool>> = Dichotomy::ALL.iter().map(|&d| matrix.targets(d)).collect::<Result<_>>()?;
    for d in Dichotomy::ALL {
        let pos = targets[d.index()].iter().filter(|v| **v).count();
        let neg = matrix.n_rows() - pos;
        if pos < config.folds || neg < config.folds {
            return Err(Error::Stratification(format!(
                "{} has {pos}/{neg} users per letter, fewer than {} folds",
                d.name(),
                config.folds
            )));
        }
    }
    let keys: Vec<u8> = matrix.labels.iter().map(|l| l.expect("checked by targets").index()).collect();
    let folds = eval::stratified_folds_by_key(&keys, config.folds, seed::derive(config.seed, "cv/folds"))?;
    let reduced = matrix.groups.iter().all(|g| *g == FeatureGroup::Pca);

    let results: Vec<FoldResult> = folds
        .par_iter()
        .enumerate()
        .map(|(f, test)| run_fold(f, test, &matrix.values, &targets, reduced, config))
        .collect::<Result<_>>()?;

    let joint = JointAccuracyReport::mean(&results.iter().map(|r| r.joint.clone()).collect::<Vec<_>>())?;
    let majority_joint =
        JointAccuracyReport::mean(&results.iter().map(|r| r.majority.accuracy.clone()).collect::<Vec<_>>())?;
    let random = baseline_random(matrix.n_rows());
    let rows = vec![
        ClassifierRow {
            name: "random".into(),
            joint: random.accuracy,
            auc_macro: random.auc,
            auc_micro: random.auc,
        },
        ClassifierRow {
            name: "majority class".into(),
            joint: majority_joint,
            auc_macro: 0.5,
            auc_micro: 0.5,
        },
        ClassifierRow {
            name: format!("{} ({})", config.model_kind, config.sampler),
            joint,
            auc_macro: mean(results.iter().map(|r| r.auc_macro)),
            auc_micro: mean(results.iter().map(|r| r.auc_micro)),
        },
    ];
    let dichotomies = Dichotomy::ALL
        .iter()
        .map(|&d| {
            let k = d.index();
            let mut confusion = ConfusionMatrix::default();
            results.iter().for_each(|r| confusion.add(&r.confusion[k]));
            DichotomyResult {
                dichotomy: d.name().to_string(),
                accuracy: mean(results.iter().map(|r| r.accuracy[k])),
                auc: mean(results.iter().map(|r| r.auc[k])),
                confusion,
            }
        })
        .collect();
    Ok(EvaluationReport {
        config: config.clone(),
        n_users: matrix.n_rows(),
        n_features: matrix.n_cols(),
        components_per_fold: results.iter().map(|r| r.components).collect(),
        rows,
        dichotomies,
    })
}

impl EvaluationReport {
    pub fn render_text(&self) -> String {
        let mut s = provenance("persona evaluation report", &self.config, &EVALUATION_ASSUMPTIONS);
        let _ = writeln!(s);
        let _ = writeln!(s, "users: {}", self.n_users);
        let _ = writeln!(s, "features: {}", self.n_features);
        let _ = writeln!(s, "folds: {}", self.config.folds);
        let lo = self.components_per_fold.iter().min().copied().unwrap_or(0);
        let hi = self.components_per_fold.iter().max().copied().unwrap_or(0);
        if hi > 0 {
            let _ = writeln!(s, "principal components per fold: {lo}..{hi}");
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "Accurately predicted dichotomies (%)");
        let _ = writeln!(
            s,
            "{:<20}{:>8}{:>8}{:>8}{:>8}{:>11}{:>11}",
            "classifier", "4", ">=3", ">=2", ">=1", "AUC macro", "AUC micro"
        );
        for r in &self.rows {
            let c = r.joint.columns();
            let _ = writeln!(
                s,
                "{:<20}{:>8.2}{:>8.2}{:>8.2}{:>8.2}{:>11.4}{:>11.4}",
                r.name, c[0], c[1], c[2], c[3], r.auc_macro, r.auc_micro
            );
        }
        for (d, res) in Dichotomy::ALL.iter().zip(&self.dichotomies) {
            let (a, b) = d.letters();
            let cm = &res.confusion;
            let _ = writeln!(s);
            let _ = writeln!(s, "{}", res.dichotomy);
            let _ = writeln!(s, "  accuracy {:.2}%  AUC {:.4}", res.accuracy, res.auc);
            let _ = writeln!(s, "  confusion matrix (summed over folds)");
            let _ = writeln!(s, "  {:<10}{:>10}{:>10}", "", format!("pred {a}"), format!("pred {b}"));
            let _ = writeln!(s, "  {:<10}{:>10}{:>10}", format!("true {a}"), cm.tp, cm.fn_);
            let _ = writeln!(s, "  {:<10}{:>10}{:>10}", format!("true {b}"), cm.fp, cm.tn);
            let _ = writeln!(
                s,
                "  recall {a} {:.4}  recall {b} {:.4}",
                cm.recall_positive(),
                cm.recall_negative()
            );
        }
        s
    }

    /// One row per dichotomy for plotting.
    pub fn render_tsv(&self) -> String {
        let mut s = String::from("dichotomy\taccuracy\tauc\ttp\tfp\ttn\tfn\n");
        for r in &self.dichotomies {
            let c = &r.confusion;
            let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}\t{}\t{}", r.dichotomy, r.accuracy, r.auc, c.tp, c.fp, c.tn, c.fn_);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRetention {
    pub group: FeatureGroup,
    pub retained: usize,
    pub total: usize,
    pub wilson: WilsonInterval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyImportance {
    pub dichotomy: String,
    pub trace: SelectionTrace,
    pub ranked: Vec<Importance>,
    pub groups: Vec<GroupRetention>,
    /// `None` when fewer than two groups are present.
    pub retention_test: Option<ChiSquaredTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub config: RunConfig,
    pub n_users: usize,
    pub n_features: usize,
    pub dichotomies: Vec<DichotomyImportance>,
}

/// Stepwise selection and variable importance for each dichotomy.
pub fn importance(matrix: &FeatureMatrix, config: &RunConfig) -> Result<ImportanceReport> {
    config.validate()?;
    let wanted: BTreeSet<FeatureGroup> = config.importance_preset.groups().iter().copied().collect();
    let keep: Vec<usize> = (0..matrix.n_cols()).filter(|&j| wanted.contains(&matrix.groups[j])).collect();
    if keep.is_empty() {
        return Err(Error::Parameter(format!(
            "the matrix has no columns for the {} preset",
            config.importance_preset.name()
        )));
    }
    let (z, _, _) = features::standardize(&matrix.select_columns(&keep))?;
    let mut dichotomies = Vec::with_capacity(4);
    for d in Dichotomy::ALL {
        let y = z.targets(d)?;
        let sel = stepwise_select(&z, &y, &config.stepwise, seed::derive(config.seed, &format!("importance/{}", d.name())))?;
        let ranked = match &sel.model {
            Some(model) => {
                let groups: Vec<FeatureGroup> = sel
                    .trace
                    .retained
                    .iter()
                    .map(|name| z.groups[z.columns.iter().position(|c| c == name).expect("retained column")])
                    .collect();
                variable_importance(&sel.trace.retained, &groups, model, d)?
            }
            None => Vec::new(),
        };
        let counts: Vec<inference::GroupCount> = sel.trace.groups.values().copied().collect();
        let retention_test = match group_retention_chisq(&counts) {
            Ok(t) => Some(t),
            Err(Error::TestUndefined(_)) => None,
            Err(e) => return Err(e),
        };
        let groups = sel
            .trace
            .groups
            .iter()
            .map(|(g, c)| {
                Ok(GroupRetention {
                    group: *g,
                    retained: c.retained,
                    total: c.total,
                    wilson: wilson_ci(c.retained as u64, c.total as u64, 0.95)?,
                })
            })
            .collect::<Result<_>>()?;
        dichotomies.push(DichotomyImportance {
            dichotomy: d.name().to_string(),
            trace: sel.trace,
            ranked,
            groups,
            retention_test,
        });
    }
    Ok(ImportanceReport {
        config: config.clone(),
        n_users: z.n_rows(),
        n_features: z.n_cols(),
        dichotomies,
    })
}

impl ImportanceReport {
    pub fn render_text(&self) -> String {
        let mut s = provenance("persona importance report", &self.config, &IMPORTANCE_ASSUMPTIONS);
        let _ = writeln!(s);
        let _ = writeln!(s, "preset: {}", self.config.importance_preset.name());
        let _ = writeln!(s, "users: {}", self.n_users);
        let _ = writeln!(s, "features: {}", self.n_features);
        for d in &self.dichotomies {
            let _ = writeln!(s);
            let _ = writeln!(
                s,
                "{}: {} of {} features retained",
                d.dichotomy,
                d.trace.retained.len(),
                self.n_features
            );
            let _ = writeln!(s, "  {:<6}{:<32}{:<11}{:>12}{:>11}", "rank", "feature", "group", "|t|", "preferred");
            for (i, imp) in top_importance(&d.ranked, inference::SUMMARY_ROWS).iter().enumerate() {
                let _ = writeln!(
                    s,
                    "  {:<6}{:<32}{:<11}{:>12.4}{:>11}",
                    i + 1,
                    imp.feature,
                    imp.group.tag(),
                    imp.statistic.abs(),
                    imp.preferred
                );
            }
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "Retained share per group with 95% Wilson intervals");
        let _ = write!(s, "{:<11}{:>7}", "group", "count");
        for d in &self.dichotomies {
            let _ = write!(s, "{:>24}", d.dichotomy);
        }
        let _ = writeln!(s);
        if let Some(first) = self.dichotomies.first() {
            for (gi, g) in first.groups.iter().enumerate() {
                let _ = write!(s, "{:<11}{:>7}", g.group.tag(), g.total);
                for d in &self.dichotomies {
                    let r = &d.groups[gi];
                    let cell = format!(
                        "{:.3} [{:.3}, {:.3}]",
                        r.retained as f64 / r.total as f64,
                        r.wilson.lower,
                        r.wilson.upper
                    );
                    let _ = write!(s, "{cell:>24}");
                }
                let _ = writeln!(s);
            }
            let _ = write!(s, "{:<18}", "chi-squared p");
            for d in &self.dichotomies {
                let cell = match &d.retention_test {
                    Some(t) => format!("{:.4} (df {})", t.p_value, t.df),
                    None => "undefined".to_string(),
                };
                let _ = write!(s, "{cell:>24}");
            }
            let _ = writeln!(s);
        }
        s
    }

    /// Full ranked tables: dichotomy, rank, feature, group, statistic,
    /// p-value, preferred letter.
    pub fn render_tsv(&self) -> String {
        let mut s = String::from("dichotomy\trank\tfeature\tgroup\tstatistic\tp_value\tpreferred\n");
        for d in &self.dichotomies {
            for (i, imp) in d.ranked.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    d.dichotomy,
                    i + 1,
                    imp.feature,
                    imp.group.tag(),
                    imp.statistic,
                    imp.p_value,
                    imp.preferred
                );
            }
        }
        s
    }
}

/// Everything a full run produces.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub parsed: ParsedCorpus,
    pub dropped: Vec<(String, corpus::DropReason)>,
    pub kept: Vec<UserRecord>,
    pub matrix: FeatureMatrix,
    pub evaluation: EvaluationReport,
    pub importance: ImportanceReport,
}

impl PipelineOutput {
    /// Evaluation and importance reports joined into one document.
    pub fn combined_report(&self) -> String {
        combined_report(&self.evaluation, Some(&self.importance))
    }
}

pub fn combined_report(evaluation: &EvaluationReport, importance: Option<&ImportanceReport>) -> String {
    let mut s = evaluation.render_text();
    if let Some(imp) = importance {
        s.push('\n');
        s.push_str(&imp.render_text());
    }
    s
}

/// Runs ingest, filter, featurize, evaluate and importance in sequence.
/// Errors are tagged with the failing stage.
pub fn run_pipeline<R: BufRead>(corpus_reader: R, config: &RunConfig) -> Result<PipelineOutput> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let parsed = ingest(corpus_reader).map_err(|e| e.in_stage("ingest"))?;
    let outcome = filter(parsed.records.clone(), &config.filter).map_err(|e| e.in_stage("filter"))?;
    let matrix = featurize(&outcome.kept, &config.parts).map_err(|e| e.in_stage("featurize"))?;
    let evaluation = evaluate(&matrix, config).map_err(|e| e.in_stage("evaluate"))?;
    let importance = importance(&matrix, config).map_err(|e| e.in_stage("importance"))?;
    Ok(PipelineOutput {
        parsed,
        dropped: outcome.dropped,
        kept: outcome.kept,
        matrix,
        evaluation,
        importance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synthesize, SynthConfig};

    fn corpus(n: usize) -> Vec<u8> {
        let (records, _) = synthesize(&SynthConfig {
            n_users: n,
            ..Default::default()
        })
        .unwrap();
        let mut buf = Vec::new();
        corpus::write_records(&mut buf, &records).unwrap();
        buf
    }

    fn quick() -> RunConfig {
        RunConfig {
            folds: 3,
            pca_components: 20,
            stepwise: StepwiseConfig {
                max_steps: 6,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn config_round_trips_and_hashes() {
        let c = RunConfig {
            sampler: SamplerKind::Smote { k: 3 },
            ..Default::default()
        };
        let back: RunConfig = serde_json::from_str(&c.canonical_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_ne!(RunConfig::default().hash(), c.hash());
        assert!(RunConfig { folds: 1, ..Default::default() }.validate().is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"fold": 3}"#).is_err());
    }

    #[test]
    fn pipeline_shape_and_determinism() {
        let data = corpus(150);
        let cfg = quick();
        let a = run_pipeline(data.as_slice(), &cfg).unwrap();
        assert_eq!(a.kept.len(), 150);
        assert_eq!(a.evaluation.dichotomies.len(), 4);
        assert_eq!(a.evaluation.rows.len(), 3);
        let text = a.combined_report();
        assert!(text.contains(&cfg.hash()));
        for name in ["E/I", "N/S", "T/F", "J/P"] {
            assert!(text.contains(&format!("\n{name}\n")));
        }
        let b = run_pipeline(data.as_slice(), &cfg).unwrap();
        assert_eq!(text, b.combined_report());
        assert!(a.importance.dichotomies.iter().all(|d| d.ranked.len() == d.trace.retained.len()));
    }

    #[test]
    fn errors_name_their_stage() {
        let err = run_pipeline("{not json".as_bytes(), &quick()).unwrap_err();
        // an unparsable line is a reject, so the corpus is empty at featurize
        assert!(err.to_string().starts_with("featurize:"), "{err}");
        let cfg = RunConfig { folds: 1000, ..quick() };
        let err = run_pipeline(corpus(120).as_slice(), &cfg).unwrap_err();
        assert!(err.to_string().starts_with("evaluate:"), "{err}");
    }
}
