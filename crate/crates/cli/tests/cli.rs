use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn retrans(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_retrans")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = retrans(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A small synthetic workspace: corpus, lexicon, LM and run.toml.
fn workspace(sentences: usize) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let n = sentences.to_string();
    ok(&["make-synthetic", "--out", p(dir.path()), "--sentences", &n, "--lm-sentences", "300"]);
    let config = dir.path().join("run.toml");
    (dir, config)
}

/// Parses the single data row of a metrics CSV into (label, AL, NE, BLEU).
fn row(csv: &str) -> (String, f64, f64, f64) {
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("strategy,AL,NE,BLEU,n_sentences"));
    rows(lines).remove(0)
}

fn rows<'a>(lines: impl Iterator<Item = &'a str>) -> Vec<(String, f64, f64, f64)> {
    lines
        .map(|line| {
            let (label, rest) = if let Some(stripped) = line.strip_prefix('"') {
                let end = stripped.find('"').unwrap();
                (stripped[..end].to_string(), &stripped[end + 2..])
            } else {
                let (l, r) = line.split_once(',').unwrap();
                (l.to_string(), r)
            };
            let v: Vec<f64> = rest.split(',').map(|x| x.parse().unwrap()).collect();
            (label, v[0], v[1], v[2])
        })
        .collect()
}

#[test]
fn oracle_run_has_no_erasure() {
    let (dir, config) = workspace(20);
    let traces = dir.path().join("oracle.jsonl");
    let csv = ok(&["run", "--config", p(&config), "--traces", p(&traces), "--strategy", "oracle"]);
    let (label, _, ne, _) = row(&csv);
    assert_eq!(label, "oracle");
    assert_eq!(ne, 0.0);
    assert!(traces.exists());
    let sidecar = fs::read_to_string(dir.path().join("oracle.jsonl.run.json")).unwrap();
    assert!(sidecar.contains("\"fingerprint\""));
    assert!(sidecar.contains("kind = \\\"oracle\\\""));
}

#[test]
fn zero_mask_matches_plain_retranslation() {
    let (dir, config) = workspace(15);
    let a = dir.path().join("mask0.jsonl");
    let b = dir.path().join("none.jsonl");
    ok(&["run", "--config", p(&config), "--traces", p(&a), "--strategy", "mask_k", "--k", "0"]);
    ok(&["run", "--config", p(&config), "--traces", p(&b), "--strategy", "none"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn missing_reference_file_is_a_usage_error() {
    let (dir, config) = workspace(5);
    fs::remove_file(dir.path().join("test.ref")).unwrap();
    let out = retrans(&["run", "--config", p(&config), "--traces", p(&dir.path().join("t.jsonl"))]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("test.ref"), "{stderr}");
}

#[test]
fn config_errors_name_the_line() {
    let (dir, config) = workspace(5);
    let text = fs::read_to_string(&config).unwrap().replace("kind = \"toy\"", "kind = \"toy\"\nbeam = 4");
    fs::write(&config, text).unwrap();
    let out = retrans(&["run", "--config", p(&config), "--traces", p(&dir.path().join("t.jsonl"))]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("run.toml:11:") && stderr.contains("beam"), "{stderr}");
}

#[test]
fn overrides_that_do_not_fit_the_strategy_are_rejected() {
    let (dir, config) = workspace(5);
    let t = dir.path().join("t.jsonl");
    let out = retrans(&["run", "--config", p(&config), "--traces", p(&t), "--strategy", "oracle", "--k", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let out = retrans(&["run", "--config", p(&config), "--traces", p(&t), "--strategy", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn metrics_replay_matches_the_online_row() {
    let (dir, config) = workspace(20);
    let traces = dir.path().join("dyn.jsonl");
    let online = ok(&[
        "run", "--config", p(&config), "--traces", p(&traces), "--predictor", "lm_sample", "--k", "3", "--n", "3",
    ]);
    let (label, al, ne, bleu) = row(&online);
    assert_eq!(label, "dynamic:lm_sample,k=3,n=3");
    let replay = ok(&[
        "metrics", "--traces", p(&traces), "--reference", p(&dir.path().join("test.ref")), "--label", &label,
    ]);
    assert_eq!(replay, online);
    let (_, al2, ne2, bleu2) = row(&replay);
    assert_eq!((al.to_bits(), ne.to_bits(), bleu.to_bits()), (al2.to_bits(), ne2.to_bits(), bleu2.to_bits()));
}

#[test]
fn runs_are_independent_of_parallelism() {
    let (dir, config) = workspace(20);
    let a = dir.path().join("p1.jsonl");
    let b = dir.path().join("p8.jsonl");
    let base = ["run", "--config", p(&config), "--predictor", "random", "--k", "4", "--n", "2", "--beta", "0.3"];
    ok(&[&base[..], &["--traces", p(&a), "--parallelism", "1"]].concat());
    ok(&[&base[..], &["--traces", p(&b), "--parallelism", "8"]].concat());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn mask_histograms() {
    let (dir, config) = workspace(20);
    let none = dir.path().join("none.jsonl");
    ok(&["run", "--config", p(&config), "--traces", p(&none), "--strategy", "none"]);
    let hist = ok(&["mask-hist", "--traces", p(&none), "--csv"]);
    let lines: Vec<&str> = hist.lines().collect();
    assert_eq!(lines[0], "mask_length,count");
    assert_eq!(lines.len(), 2, "all mass at zero: {hist}");
    assert!(lines[1].starts_with("0,"));

    let mask = dir.path().join("mask5.jsonl");
    ok(&["run", "--config", p(&config), "--traces", p(&mask), "--strategy", "mask_k", "--k", "5"]);
    let table = ok(&["mask-hist", "--traces", p(&mask)]);
    assert!(table.contains("steps "), "{table}");

    let text = fs::read_to_string(&none).unwrap().replace("\"schema_version\":1", "\"schema_version\":9");
    let future = dir.path().join("future.jsonl");
    fs::write(&future, text).unwrap();
    let out = retrans(&["mask-hist", "--traces", p(&future)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema version 9"));
}

#[test]
fn train_lm_is_deterministic_and_reports_its_size() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.txt");
    fs::write(&corpus, "a b a\nb c\n").unwrap();
    let a = dir.path().join("a.lm");
    let b = dir.path().join("b.lm");
    let out = ok(&["train-lm", "--corpus", p(&corpus), "--order", "2", "--out", p(&a)]);
    assert!(out.contains("on 5 tokens in 2 sentences"), "{out}");
    // a, b, c plus the unknown and end-of-sentence symbols.
    assert!(out.contains("vocabulary size 5"), "{out}");
    ok(&["train-lm", "--corpus", p(&corpus), "--order", "2", "--out", p(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let uni = dir.path().join("u.lm");
    ok(&["train-lm", "--corpus", p(&corpus), "--order", "1", "--out", p(&uni)]);
    let text = fs::read_to_string(&uni).unwrap();
    assert!(text.contains("\\1-grams"));
    assert!(!text.contains("\\2-grams"));

    let empty = dir.path().join("empty.txt");
    fs::write(&empty, "").unwrap();
    let out = retrans(&["train-lm", "--corpus", p(&empty), "--out", p(&uni)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_over_fixed_masks() {
    let (dir, _) = workspace(20);
    let spec = dir.path().join("sweep.toml");
    fs::write(
        &spec,
        "base = \"run.toml\"\n\n[axes]\nkinds = [\"mask_k\", \"dynamic\"]\nk_mask = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10]\npredictor = [\"lm_greedy\"]\nk = [1]\nn = [1]\n",
    )
    .unwrap();
    let out = dir.path().join("points.csv");
    let traces = dir.path().join("traces");
    ok(&["sweep", "--spec", p(&spec), "--out", p(&out), "--traces", p(&traces), "--pareto"]);
    let csv = fs::read_to_string(&out).unwrap();
    let points = rows(csv.lines().skip(1));
    assert_eq!(points.len(), 12);
    let labels: Vec<&String> = points.iter().map(|r| &r.0).collect();
    let mut sorted = labels.clone();
    sorted.sort();
    assert_eq!(labels, sorted);
    assert_eq!(fs::read_dir(&traces).unwrap().count(), 12);

    let mut masks: Vec<(usize, f64)> = points
        .iter()
        .filter_map(|r| r.0.strip_prefix("mask_k:k=").map(|k| (k.parse().unwrap(), r.1)))
        .collect();
    masks.sort_by_key(|m| m.0);
    assert_eq!(masks.len(), 11);
    for w in masks.windows(2) {
        assert!(w[1].1 >= w[0].1, "AL drops from k={} to k={}", w[0].0, w[1].0);
    }

    let frontier = rows(fs::read_to_string(dir.path().join("points.pareto.csv")).unwrap().lines().skip(1));
    assert!(frontier.iter().any(|r| r.0.starts_with("dynamic")), "{frontier:?}");
    assert!(dir.path().join("points.csv.run.json").exists());
}

#[test]
fn single_cell_sweep_matches_run() {
    let (dir, config) = workspace(10);
    let spec = dir.path().join("one.toml");
    fs::write(&spec, "base = \"run.toml\"\n\n[[cell]]\nkind = \"mask_k\"\nk_mask = 2\n").unwrap();
    let out = dir.path().join("one.csv");
    ok(&["sweep", "--spec", p(&spec), "--out", p(&out)]);
    let single = ok(&[
        "run", "--config", p(&config), "--traces", p(&dir.path().join("t.jsonl")), "--strategy", "mask_k", "--k", "2",
    ]);
    assert_eq!(fs::read_to_string(&out).unwrap(), single);
}

#[test]
fn make_synthetic_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(&["make-synthetic", "--out", p(a.path())]);
    ok(&["make-synthetic", "--out", p(b.path())]);
    for name in ["test.src", "test.ref", "train.src", "lexicon.txt", "lm.txt", "run.toml"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    assert_eq!(fs::read_to_string(a.path().join("test.src")).unwrap().lines().count(), 200);
}
