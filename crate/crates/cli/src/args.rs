use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use persona_core::balance::SamplerKind;
use persona_core::learn::ModelKind;
use persona_core::pipeline::{ImportancePreset, RunConfig};
use persona_core::FeatureGroup;

#[derive(Parser, Debug)]
#[command(name = "persona", version, about = "Predict personality dichotomies from account footprints")]
pub struct Cli {
    /// Worker threads (defaults to all cores). Never changes results.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a seeded synthetic corpus with planted signal.
    Synthesize(SynthesizeArgs),
    /// Parse JSON-lines records, drop duplicates and report rejected lines.
    Ingest(IngestArgs),
    /// Apply the inclusion filter and attach labels.
    Filter(StageArgs),
    /// Build the grouped feature matrix.
    Featurize(StageArgs),
    /// Project a feature matrix onto its principal components.
    Reduce(StageArgs),
    /// Cross-validate a classifier on all four dichotomies.
    Evaluate(ReportArgs),
    /// Stepwise selection, variable importance and group retention.
    Importance(ReportArgs),
    /// Render saved evaluation and importance results as one document.
    Report(RenderArgs),
    /// Run every stage from a raw corpus into an output directory.
    Pipeline(PipelineArgs),
}

#[derive(Args, Debug)]
pub struct SynthesizeArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth coefficients (defaults to `<out>.truth.json`).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub n_users: usize,
    /// First-letter shares for E/I, N/S, T/F, J/P.
    #[arg(long, value_delimiter = ',', num_args = 4, default_values_t = [0.5, 0.85, 0.5, 0.5])]
    pub shares: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub signal: f64,
    #[arg(long, default_value_t = 8)]
    pub embedding_dim: usize,
    #[arg(long, default_value_t = 100)]
    pub posts: usize,
    #[arg(long, default_value_t = 0.02)]
    pub contamination: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Rejected lines, one `line N: reason` per row.
    #[arg(long)]
    pub rejects: Option<PathBuf>,
}

/// Analysis flags; each overrides the matching field of `--config`.
#[derive(Args, Debug, Default)]
pub struct ConfigArgs {
    /// TOML file with any subset of the run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub pca_components: Option<usize>,
    /// none, class_weights, upsample, downsample, smote or smote:K.
    #[arg(long)]
    pub sampler: Option<SamplerKind>,
    /// lr, nb, svm or rf.
    #[arg(long = "model")]
    pub model_kind: Option<ModelKind>,
    /// Comma-separated feature groups (SM, BOTOMETER, LIWC, BERT, VADER, EMOJI).
    #[arg(long, value_delimiter = ',')]
    pub parts: Option<Vec<FeatureGroup>>,
    /// descriptive, groups or emoji.
    #[arg(long)]
    pub preset: Option<ImportancePreset>,
    #[arg(long)]
    pub min_posts: Option<usize>,
    #[arg(long)]
    pub min_english_fraction: Option<f64>,
    #[arg(long)]
    pub max_cap_score: Option<f64>,
    #[arg(long)]
    pub p_in: Option<f64>,
    #[arg(long)]
    pub p_out: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub trees: Option<usize>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => load_config(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($flag:expr => $($field:tt)+) => {
                if let Some(v) = $flag.clone() {
                    c.$($field)+ = v;
                }
            };
        }
        set!(self.seed => seed);
        set!(self.folds => folds);
        set!(self.pca_components => pca_components);
        set!(self.sampler => sampler);
        set!(self.model_kind => model_kind);
        set!(self.parts => parts);
        set!(self.preset => importance_preset);
        set!(self.min_posts => filter.min_posts);
        set!(self.min_english_fraction => filter.min_english_fraction);
        set!(self.max_cap_score => filter.max_cap_score);
        set!(self.p_in => stepwise.p_in);
        set!(self.p_out => stepwise.p_out);
        set!(self.max_steps => stepwise.max_steps);
        set!(self.trees => models.rf.n_trees);
        c.validate().context("invalid configuration")?;
        Ok(c)
    }
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Args, Debug)]
pub struct StageArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Side output: dropped ids for `filter`, the fitted components (JSON)
    /// for `reduce`.
    #[arg(long)]
    pub aux: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Feature matrix (TSV).
    #[arg(long)]
    pub input: PathBuf,
    /// Text report.
    #[arg(long)]
    pub out: PathBuf,
    /// Structured results for `report`.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Delimited table for plotting.
    #[arg(long)]
    pub tsv: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    #[arg(long)]
    pub evaluation: PathBuf,
    #[arg(long)]
    pub importance: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PipelineArgs {
    /// Raw JSON-lines corpus.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}
