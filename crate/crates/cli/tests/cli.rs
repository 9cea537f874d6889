use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const QUICK: &[&str] = &["--folds", "3", "--pca-components", "10", "--max-steps", "4"];

fn persona(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_persona"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn persona")
}

fn ok(args: &[&str]) -> Output {
    let out = persona(args);
    assert!(
        out.status.success(),
        "persona {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn ok_quick(args: &[&str]) -> Output {
    ok(&[args, QUICK].concat())
}

fn corpus(dir: &Path, extra: &[&str]) -> String {
    let path = dir.join("corpus.jsonl");
    let p = path.to_str().unwrap();
    let mut args = vec!["synthesize", "--out", p, "--n-users", "300"];
    args.extend_from_slice(extra);
    ok(&args);
    p.to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synthesize_then_pipeline_writes_every_artifact() {
    let tmp = TempDir::new().unwrap();
    let input = corpus(tmp.path(), &[]);
    assert!(tmp.path().join("corpus.jsonl.truth.json").exists());
    let out = tmp.path().join("run");
    ok_quick(&["pipeline", "--input", &input, "--out-dir", s(&out)]);
    for f in [
        "records.jsonl",
        "rejects.txt",
        "dropped.tsv",
        "kept.jsonl",
        "features.tsv",
        "evaluation.txt",
        "evaluation.json",
        "evaluation.tsv",
        "importance.txt",
        "importance.json",
        "importance.tsv",
        "report.txt",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("config-sha256"));
    assert!(report.contains("majority class"));
    let dropped = fs::read_to_string(out.join("dropped.tsv")).unwrap();
    assert!(dropped.lines().count() > 1, "contamination records should be dropped");
}

#[test]
fn stagewise_commands_match_the_pipeline() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let input = corpus(d, &[]);
    let p = |n: &str| d.join(n).to_str().unwrap().to_string();
    ok(&["ingest", "--input", &input, "--out", &p("records.jsonl"), "--rejects", &p("rejects.txt")]);
    ok(&["filter", "--input", &p("records.jsonl"), "--out", &p("kept.jsonl"), "--aux", &p("dropped.tsv")]);
    ok(&["featurize", "--input", &p("kept.jsonl"), "--out", &p("features.tsv")]);
    let json = p("evaluation.json");
    ok_quick(&["evaluate", "--input", &p("features.tsv"), "--out", &p("evaluation.txt"), "--json", &json]);
    let rendered = p("report.txt");
    ok(&["report", "--evaluation", &json, "--out", &rendered]);

    ok_quick(&["pipeline", "--input", &input, "--out-dir", s(&d.join("run"))]);
    for f in ["kept.jsonl", "features.tsv", "evaluation.txt", "evaluation.json"] {
        assert_eq!(
            fs::read(d.join(f)).unwrap(),
            fs::read(d.join("run").join(f)).unwrap(),
            "{f} differs"
        );
    }
    assert_eq!(fs::read(&rendered).unwrap(), fs::read(d.join("evaluation.txt")).unwrap());
}

#[test]
fn reduce_writes_components() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let input = corpus(d, &[]);
    let p = |n: &str| d.join(n).to_str().unwrap().to_string();
    ok(&["filter", "--input", &input, "--out", &p("kept.jsonl")]);
    ok(&["featurize", "--input", &p("kept.jsonl"), "--out", &p("features.tsv")]);
    ok(&["reduce", "--input", &p("features.tsv"), "--out", &p("pcs.tsv"), "--aux", &p("pca.json"), "--pca-components", "5"]);
    let header = fs::read_to_string(p("pcs.tsv")).unwrap();
    let first = header.lines().next().unwrap();
    assert!(first.contains("pc_1"), "{first}");
    assert!(fs::metadata(p("pca.json")).unwrap().len() > 0);
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let tmp = TempDir::new().unwrap();
    let input = corpus(tmp.path(), &[]);
    let mut outputs = Vec::new();
    for threads in ["1", "8"] {
        let dir = tmp.path().join(format!("t{threads}"));
        ok_quick(&["--threads", threads, "pipeline", "--input", &input, "--out-dir", s(&dir)]);
        outputs.push(fs::read(dir.join("report.txt")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn flags_override_the_config_file() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let input = corpus(d, &[]);
    let cfg = d.join("run.toml");
    fs::write(
        &cfg,
        "seed = 7\nfolds = 4\npca_components = 10\nsampler = \"upsample\"\n[stepwise]\nmax_steps = 3\n",
    )
    .unwrap();
    let p = |n: &str| d.join(n).to_str().unwrap().to_string();
    ok(&["filter", "--input", &input, "--out", &p("kept.jsonl")]);
    ok(&["featurize", "--input", &p("kept.jsonl"), "--out", &p("features.tsv")]);
    ok(&[
        "evaluate", "--input", &p("features.tsv"), "--out", &p("e.txt"), "--json", &p("e.json"),
        "--config", s(&cfg), "--folds", "3",
    ]);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(p("e.json")).unwrap()).unwrap();
    let c = &json["config"];
    assert_eq!(c["seed"], 7);
    assert_eq!(c["folds"], 3);
    assert_eq!(c["sampler"], "upsample");
    assert_eq!(c["stepwise"]["max_steps"], 3);
    let text = fs::read_to_string(p("e.txt")).unwrap();
    assert!(text.contains("lr (upsample)"), "{text}");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "sead = 1\n").unwrap();
    let input = corpus(tmp.path(), &[]);
    let out = persona(&["pipeline", "--input", &input, "--out-dir", s(&tmp.path().join("o")), "--config", s(&cfg)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sead"), "{err}");
}

#[test]
fn failures_name_the_stage_and_exit_nonzero() {
    let tmp = TempDir::new().unwrap();
    let input = corpus(tmp.path(), &[]);
    let out = persona(&["pipeline", "--input", &input, "--out-dir", s(&tmp.path().join("o")), "--folds", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stage pipeline failed"), "{err}");
    assert!(err.contains("folds"), "{err}");

    let bad = tmp.path().join("features.tsv");
    fs::write(&bad, "not a matrix\n").unwrap();
    let out = persona(&["evaluate", "--input", s(&bad), "--out", s(&tmp.path().join("e.txt"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage evaluate failed"));
}

#[test]
fn pipeline_errors_carry_the_inner_stage() {
    let tmp = TempDir::new().unwrap();
    // Every record fails the inclusion filter.
    let input = corpus(tmp.path(), &["--posts", "10", "--contamination", "0"]);
    let out = persona(&["pipeline", "--input", &input, "--out-dir", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stage pipeline failed"), "{err}");
    assert!(err.contains("featurize:") || err.contains("filter:"), "{err}");
}

#[test]
fn no_signal_gives_chance_auc_and_upsampling_lifts_minority_recall() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let p = |n: &str| d.join(n).to_str().unwrap().to_string();
    let run = |signal: &str, sampler: &str, tag: &str| -> serde_json::Value {
        let c = p(&format!("c{tag}.jsonl"));
        ok(&["synthesize", "--out", &c, "--n-users", "600", "--signal", signal]);
        let dir = p(&format!("run{tag}"));
        ok_quick(&["pipeline", "--input", &c, "--out-dir", &dir, "--sampler", sampler]);
        serde_json::from_str(&fs::read_to_string(d.join(format!("run{tag}")).join("evaluation.json")).unwrap()).unwrap()
    };
    let null = run("0", "none", "0");
    let auc = null["rows"][2]["auc_macro"].as_f64().unwrap();
    assert!((auc - 0.5).abs() < 0.1, "macro AUC {auc}");

    let recall_s = |v: &serde_json::Value| {
        let c = &v["dichotomies"][1]["confusion"];
        let (tn, fp) = (c["tn"].as_f64().unwrap(), c["fp"].as_f64().unwrap());
        tn / (tn + fp)
    };
    let plain = run("0.5", "none", "a");
    let up = run("0.5", "upsample", "b");
    assert!(recall_s(&up) > recall_s(&plain), "{} vs {}", recall_s(&up), recall_s(&plain));
}
