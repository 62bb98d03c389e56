use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use textorder::corpus::save_corpus;
use textorder::harness::{synth_corpus, SynthConfig};

fn textorder(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_textorder")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = textorder(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(args: &[&str]) -> i32 {
    textorder(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn corpus_file(dir: &Path, name: &str, n_docs: usize, seed: u64) -> PathBuf {
    let (c, _) = synth_corpus(&SynthConfig { name: name.into(), n_docs, seed, ..SynthConfig::default() }).unwrap();
    let path = dir.join(format!("{name}.jsonl"));
    save_corpus(&c, &path).unwrap();
    path
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn unknown_flag_prints_usage_and_exits_1() {
    let out = textorder(&["eval", "--bogus", "--out", "x"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["eval"]), 1);
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&["sweep", "--help"]), 0);
}

#[test]
fn validation_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = d.join("o");
    let c = corpus_file(d, "c", 10, 1);
    assert_eq!(code(&["stats", "--in", "/no/such.jsonl", "--out", s(&out)]), 1);
    assert_eq!(code(&["stats", "--out", s(&out)]), 1);
    assert_eq!(code(&["corrupt", "--in", s(&c), "--p", "1.5", "--out", s(&out)]), 1);
    assert_eq!(code(&["stats", "--in", s(&c), "--level", "chapter", "--out", s(&out)]), 1);
    let bad = d.join("bad.jsonl");
    std::fs::write(&bad, "{not json}\n").unwrap();
    assert_eq!(code(&["stats", "--in", s(&bad), "--out", s(&out)]), 1);
    let cfg = d.join("cfg.json");
    std::fs::write(&cfg, r#"{"unknown_key": 1}"#).unwrap();
    assert_eq!(code(&["stats", "--in", s(&c), "--config", s(&cfg), "--out", s(&out)]), 1);
    let preds = d.join("p.jsonl");
    std::fs::write(&preds, "{\"id\":\"a\",\"gold\":[0,1],\"predicted\":[0,0]}\n").unwrap();
    assert_eq!(code(&["eval", "--pred", s(&preds), "--out", s(&out)]), 1);
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn runtime_failures_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus_file(dir.path(), "c", 10, 1);
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = blocker.join("sub");
    assert_eq!(code(&["stats", "--in", s(&c), "--out", s(&out)]), 2);
}

#[test]
fn eval_identity_predictions_give_pmr_one() {
    let dir = tempfile::tempdir().unwrap();
    let preds = dir.path().join("preds.jsonl");
    std::fs::write(
        &preds,
        "{\"id\":\"a\",\"gold\":[0,1,2],\"predicted\":[0,1,2]}\n{\"id\":\"b\",\"gold\":[0,1],\"predicted\":[0,1]}\n",
    )
    .unwrap();
    let out = dir.path().join("r");
    ok(&["eval", "--pred", s(&preds), "--out", s(&out)]);
    let report = json(&out.join("report.json"));
    assert_eq!(report["corpus"]["pmr"], 1.0);
    assert_eq!(report["corpus"]["K"], 2);
    assert!(std::fs::read_to_string(out.join("report.tsv")).unwrap().starts_with("dataset\tpmr"));
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "eval");
    assert_eq!(manifest["outputs"], serde_json::json!(["report.json", "report.tsv"]));
}

#[test]
fn corrupt_at_zero_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus_file(dir.path(), "c", 40, 3);
    let out = dir.path().join("d");
    ok(&["corrupt", "--p", "0", "--in", s(&c), "--out", s(&out)]);
    assert_eq!(std::fs::read(&c).unwrap(), std::fs::read(out.join("corpus.jsonl")).unwrap());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus_file(dir.path(), "c", 40, 3);
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"p": 0.3, "seed": 4, "modify_fraction": 0.25}"#).unwrap();
    let out = dir.path().join("o");
    ok(&["corrupt", "--in", s(&c), "--config", s(&cfg), "--p", "0.6", "--out", s(&out)]);
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["config"]["p"], 0.6);
    assert_eq!(m["config"]["seed"], 4);
    assert_eq!(m["seed"], 4);
    assert_eq!(m["config"]["modify_fraction"], 0.25);
    assert_eq!(m["config"]["mode_weights"], serde_json::json!([1.0, 1.0, 1.0]));
}

fn assert_replays(out: &Path) {
    let again = out.with_extension("replay");
    ok(&["replay", "--manifest", s(&out.join("manifest.json")), "--out", s(&again)]);
    let m = json(&out.join("manifest.json"));
    let mut files: Vec<String> =
        m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    files.push("manifest.json".into());
    for f in files {
        assert_eq!(std::fs::read(out.join(&f)).unwrap(), std::fs::read(again.join(&f)).unwrap(), "{f}");
    }
}

#[test]
fn pipeline_runs_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let raw = corpus_file(d, "news", 80, 9);
    let prep = d.join("prep");
    ok(&["prep", "--in", s(&raw), "--out", s(&prep)]);
    for f in ["train.jsonl", "dev.jsonl", "test.jsonl", "vocab.json", "stats.json"] {
        assert!(prep.join(f).exists(), "{f}");
    }
    assert_eq!(json(&prep.join("stats.json"))["corpus"]["documents"], 80);
    assert_replays(&prep);

    let stats = d.join("stats");
    ok(&["stats", "--in", s(&raw), "--out", s(&stats)]);
    assert_eq!(json(&stats.join("stats.json"))["documents"], 80);

    let noisy = d.join("noisy");
    ok(&["corrupt", "--in", s(&raw), "--p", "0.5", "--seed", "3", "--out", s(&noisy)]);
    assert!(json(&noisy.join("audit.json"))["contaminated"].as_u64().unwrap() > 0);
    assert_replays(&noisy);

    let (train, dev, test) = (prep.join("train.jsonl"), prep.join("dev.jsonl"), prep.join("test.jsonl"));
    let sample = d.join("sample");
    ok(&["sample", "--train", s(&train), "--dev", s(&dev), "--size", "30", "--seed", "2", "--out", s(&sample)]);
    assert_eq!(std::fs::read_to_string(sample.join("train.jsonl")).unwrap().lines().count(), 30);
    assert_replays(&sample);

    let model = d.join("model");
    ok(&[
        "train", "--train", s(&train), "--dev", s(&dev), "--hidden", "8", "--embed-dim", "8", "--max-epochs", "3",
        "--lr", "0.01", "--eval-beam-width", "2", "--seed", "11", "--out", s(&model),
    ]);
    assert_eq!(json(&model.join("history.json"))["epochs"].as_array().unwrap().len(), 3);
    assert_replays(&model);

    let order = d.join("order");
    ok(&["order", "--model", s(&model.join("model.json")), "--in", s(&test), "--beam-width", "4", "--out", s(&order)]);
    assert_replays(&order);

    let eval = d.join("eval");
    ok(&["eval", "--pred", s(&order.join("predictions.jsonl")), "--out", s(&eval)]);
    let pmr = json(&eval.join("report.json"))["corpus"]["pmr"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&pmr));
}

#[test]
fn sample_plan_writes_one_directory_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let t = corpus_file(dir.path(), "t", 30, 1);
    let v = corpus_file(dir.path(), "v", 10, 2);
    let plan = dir.path().join("plan.json");
    std::fs::write(&plan, r#"{"sizes": [5, 8], "reps": {"5": 2, "8": 1}, "dev_ratio_lock": [0.9, 0.05], "seed": 0}"#)
        .unwrap();
    let out = dir.path().join("o");
    ok(&["sample", "--train", s(&t), "--dev", s(&v), "--plan", s(&plan), "--out", s(&out)]);
    for sub in ["5_0", "5_1", "8_0"] {
        assert!(out.join(sub).join("train.jsonl").exists());
    }
    assert_eq!(json(&out.join("plan.json")).as_array().unwrap().len(), 3);
}

#[test]
fn agree_reports_agreement_and_regressions() {
    let dir = tempfile::tempdir().unwrap();
    let ratings = dir.path().join("r.tsv");
    let mut text = String::from("judge\tpassage\trating\n");
    let grid = [[1, 2, 4, 5, 3], [1, 3, 4, 5, 2], [2, 2, 5, 4, 3]];
    for (j, row) in grid.iter().enumerate() {
        for (p, r) in row.iter().enumerate() {
            text += &format!("j{j}\tp{p}\t{r}\n");
        }
    }
    std::fs::write(&ratings, text).unwrap();
    let metrics = dir.path().join("m.tsv");
    std::fs::write(&metrics, "passage\ttau\twlcs-l\np0\t-0.8\t0.1\np1\t-0.2\t0.2\np2\t0.6\t0.5\np3\t0.9\t0.7\np4\t0.1\t0.3\n")
        .unwrap();
    let out = dir.path().join("o");
    ok(&["agree", "--ratings", s(&ratings), "--metrics", s(&metrics), "--out", s(&out)]);
    let a = json(&out.join("agreement.json"));
    assert!(a["pearson"]["mean_r"].as_f64().unwrap() > 0.8);
    assert!(a["alpha"].as_f64().unwrap() > 0.5);
    let fits = json(&out.join("regressions.json"));
    assert_eq!(fits.as_array().unwrap().len(), 2);
    assert!(fits[0]["slope"].as_f64().unwrap() > 0.0);

    std::fs::write(&ratings, "judge\tpassage\trating\nj0\tp0\t9\n").unwrap();
    assert_eq!(code(&["agree", "--ratings", s(&ratings), "--out", s(&out.with_extension("bad"))]), 1);
}
