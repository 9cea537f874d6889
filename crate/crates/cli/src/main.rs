mod args;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use persona_core::corpus::{self, UserRecord};
use persona_core::pipeline::{self, combined_report, EvaluationReport, ImportanceReport};
use persona_core::synth::{synthesize, SynthConfig};
use persona_core::FeatureMatrix;

use args::{Cli, Command, IngestArgs, PipelineArgs, RenderArgs, ReportArgs, StageArgs, SynthesizeArgs};

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn read_records(path: &Path) -> Result<Vec<UserRecord>> {
    let parsed = corpus::parse_records(open(path)?)?;
    if let Some(first) = parsed.rejects.first() {
        anyhow::bail!("{}: {} malformed records, first at {first}", path.display(), parsed.rejects.len());
    }
    Ok(parsed.records)
}

fn write_records(path: &Path, records: &[UserRecord]) -> Result<()> {
    let mut w = create(path)?;
    corpus::write_records(&mut w, records)?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn read_matrix(path: &Path) -> Result<FeatureMatrix> {
    FeatureMatrix::read_tsv(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn write_matrix(path: &Path, m: &FeatureMatrix) -> Result<()> {
    let mut w = create(path)?;
    m.write_tsv(&mut w)?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn synthesize_cmd(a: &SynthesizeArgs) -> Result<()> {
    let cfg = SynthConfig {
        n_users: a.n_users,
        first_letter_share: [a.shares[0], a.shares[1], a.shares[2], a.shares[3]],
        signal: a.signal,
        embedding_dim: a.embedding_dim,
        posts_per_user: a.posts,
        contamination: a.contamination,
        seed: a.seed,
    };
    let (records, truth) = synthesize(&cfg)?;
    write_records(&a.out, &records)?;
    let truth_path = a.truth.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".truth.json");
        PathBuf::from(p)
    });
    write_json(&truth_path, &truth)?;
    log::info!("wrote {} records to {}", records.len(), a.out.display());
    Ok(())
}

fn ingest_cmd(a: &IngestArgs) -> Result<()> {
    let parsed = pipeline::ingest(open(&a.input)?)?;
    write_records(&a.out, &parsed.records)?;
    if let Some(path) = &a.rejects {
        let mut w = create(path)?;
        corpus::write_rejects(&mut w, &parsed.rejects)?;
        w.flush()?;
    }
    if !parsed.rejects.is_empty() {
        log::warn!("{} malformed lines skipped", parsed.rejects.len());
    }
    Ok(())
}

fn write_dropped(path: &Path, dropped: &[(String, corpus::DropReason)]) -> Result<()> {
    let mut text = String::from("user_id\treason\n");
    for (id, reason) in dropped {
        text.push_str(&format!("{id}\t{reason}\n"));
    }
    write_text(path, &text)
}

fn filter_cmd(a: &StageArgs) -> Result<()> {
    let cfg = a.config.resolve()?;
    let out = pipeline::filter(read_records(&a.input)?, &cfg.filter)?;
    write_records(&a.out, &out.kept)?;
    if let Some(path) = &a.aux {
        write_dropped(path, &out.dropped)?;
    }
    Ok(())
}

fn featurize_cmd(a: &StageArgs) -> Result<()> {
    let cfg = a.config.resolve()?;
    let m = pipeline::featurize(&read_records(&a.input)?, &cfg.parts)?;
    write_matrix(&a.out, &m)
}

fn reduce_cmd(a: &StageArgs) -> Result<()> {
    let cfg = a.config.resolve()?;
    let (scores, pca) = pipeline::reduce(&read_matrix(&a.input)?, cfg.pca_components)?;
    write_matrix(&a.out, &scores)?;
    if let Some(path) = &a.aux {
        write_json(path, &pca)?;
    }
    Ok(())
}

fn evaluate_cmd(a: &ReportArgs) -> Result<()> {
    let cfg = a.config.resolve()?;
    let report = pipeline::evaluate(&read_matrix(&a.input)?, &cfg)?;
    write_text(&a.out, &report.render_text())?;
    if let Some(path) = &a.json {
        write_json(path, &report)?;
    }
    if let Some(path) = &a.tsv {
        write_text(path, &report.render_tsv())?;
    }
    Ok(())
}

fn importance_cmd(a: &ReportArgs) -> Result<()> {
    let cfg = a.config.resolve()?;
    let report = pipeline::importance(&read_matrix(&a.input)?, &cfg)?;
    write_text(&a.out, &report.render_text())?;
    if let Some(path) = &a.json {
        write_json(path, &report)?;
    }
    if let Some(path) = &a.tsv {
        write_text(path, &report.render_tsv())?;
    }
    Ok(())
}

fn report_cmd(a: &RenderArgs) -> Result<()> {
    let evaluation: EvaluationReport = read_json(&a.evaluation)?;
    let importance: Option<ImportanceReport> = a.importance.as_deref().map(read_json).transpose()?;
    if let Some(imp) = &importance {
        if imp.config != evaluation.config {
            log::warn!("evaluation and importance results were produced with different configurations");
        }
    }
    write_text(&a.out, &combined_report(&evaluation, importance.as_ref()))
}

/// Same stages as the individual subcommands, with every intermediate
/// written to the output directory.
fn pipeline_cmd(a: &PipelineArgs) -> Result<()> {
    let cfg = a.config.resolve()?;
    let dir = &a.out_dir;
    let out = pipeline::run_pipeline(open(&a.input)?, &cfg)?;
    write_records(&dir.join("records.jsonl"), &out.parsed.records)?;
    let mut w = create(&dir.join("rejects.txt"))?;
    corpus::write_rejects(&mut w, &out.parsed.rejects)?;
    w.flush()?;
    write_dropped(&dir.join("dropped.tsv"), &out.dropped)?;
    write_records(&dir.join("kept.jsonl"), &out.kept)?;
    write_matrix(&dir.join("features.tsv"), &out.matrix)?;
    write_text(&dir.join("evaluation.txt"), &out.evaluation.render_text())?;
    write_json(&dir.join("evaluation.json"), &out.evaluation)?;
    write_text(&dir.join("evaluation.tsv"), &out.evaluation.render_tsv())?;
    write_text(&dir.join("importance.txt"), &out.importance.render_text())?;
    write_json(&dir.join("importance.json"), &out.importance)?;
    write_text(&dir.join("importance.tsv"), &out.importance.render_tsv())?;
    write_text(&dir.join("report.txt"), &out.combined_report())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let (stage, result) = match &cli.command {
        Command::Synthesize(a) => ("synthesize", synthesize_cmd(a)),
        Command::Ingest(a) => ("ingest", ingest_cmd(a)),
        Command::Filter(a) => ("filter", filter_cmd(a)),
        Command::Featurize(a) => ("featurize", featurize_cmd(a)),
        Command::Reduce(a) => ("reduce", reduce_cmd(a)),
        Command::Evaluate(a) => ("evaluate", evaluate_cmd(a)),
        Command::Importance(a) => ("importance", importance_cmd(a)),
        Command::Report(a) => ("report", report_cmd(a)),
        Command::Pipeline(a) => ("pipeline", pipeline_cmd(a)),
    };
    result.with_context(|| format!("stage {stage} failed"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
