use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use retrans::corpus;
use retrans::metrics::{evaluate, mask_histogram, summarize_histogram, NeAggregation, TradeoffPoint};
use retrans::predict::{ExtensionStrategy, NgramLm, PredictorConfig};
use retrans::sim::{self, RunConfig};
use retrans::strategy::StrategyKind;
use retrans::sweep::{self, SweepSpec};
use retrans::synthetic::{self, SyntheticSpec};

/// Simulated online speech translation by retranslation.
#[derive(Parser, Debug)]
#[command(name = "retrans", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train an n-gram language model on a tokenized corpus.
    TrainLm(TrainLmArgs),
    /// Run one configuration over a corpus.
    Run(RunArgs),
    /// Run every cell of a sweep file and write one CSV row per cell.
    Sweep(SweepArgs),
    /// Recompute AL, NE and BLEU from a trace file.
    Metrics(MetricsArgs),
    /// Histogram of mask lengths over all non-final steps.
    MaskHist(MaskHistArgs),
    /// Write the synthetic corpus, lexicon, language model and a run config.
    MakeSynthetic(SyntheticArgs),
}

#[derive(Args, Debug)]
struct TrainLmArgs {
    /// One sentence per line, whitespace tokenized.
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    #[arg(long, default_value_t = 3)]
    order: usize,
    /// Add-alpha smoothing constant.
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Treat every character as a token.
    #[arg(long)]
    char_mode: bool,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Where to write the session traces (JSONL).
    #[arg(long, value_name = "FILE")]
    traces: PathBuf,
    /// Write the metrics row here instead of stdout.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

/// Command-line overrides applied on top of the config file.
#[derive(Args, Debug, Default)]
struct Overrides {
    /// none, mask_k, dynamic or oracle.
    #[arg(long)]
    strategy: Option<StrategyKind>,
    /// Mask size for mask_k, number of predicted tokens for dynamic.
    #[arg(long)]
    k: Option<usize>,
    /// Number of source extensions for dynamic.
    #[arg(long)]
    n: Option<usize>,
    /// lm_sample, lm_greedy, unknown or random.
    #[arg(long)]
    predictor: Option<ExtensionStrategy>,
    /// Biased beam search interpolation weight.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    parallelism: Option<usize>,
    /// Language model file for the LM extension strategies.
    #[arg(long, value_name = "FILE")]
    lm: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Sweep file (TOML).
    #[arg(long, value_name = "FILE")]
    spec: PathBuf,
    /// CSV with one row per cell, sorted by strategy label.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Also write every cell's traces into this directory.
    #[arg(long, value_name = "DIR")]
    traces: Option<PathBuf>,
    /// Also write the (AL, NE) Pareto frontier next to the output CSV.
    #[arg(long)]
    pareto: bool,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    #[arg(long, value_name = "FILE")]
    traces: PathBuf,
    /// Reference translations, one per line, in sentence id order.
    #[arg(long, value_name = "FILE")]
    reference: PathBuf,
    #[arg(long)]
    char_mode: bool,
    /// Label for the CSV row. Defaults to the trace file name.
    #[arg(long)]
    label: Option<String>,
    /// How per-sentence erasure is aggregated.
    #[arg(long, value_parser = parse_aggregation, default_value = "sentence_mean")]
    ne_aggregation: NeAggregation,
}

#[derive(Args, Debug)]
struct MaskHistArgs {
    #[arg(long, value_name = "FILE")]
    traces: PathBuf,
    /// Print `mask_length,count` CSV instead of a table.
    #[arg(long)]
    csv: bool,
}

#[derive(Args, Debug)]
struct SyntheticArgs {
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long, default_value_t = SyntheticSpec::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = SyntheticSpec::default().sentences)]
    sentences: usize,
    #[arg(long, default_value_t = SyntheticSpec::default().vocab_size)]
    vocab_size: usize,
    #[arg(long, default_value_t = SyntheticSpec::default().min_len)]
    min_len: usize,
    #[arg(long, default_value_t = SyntheticSpec::default().max_len)]
    max_len: usize,
    #[arg(long, default_value_t = SyntheticSpec::default().lm_sentences)]
    lm_sentences: usize,
}

fn parse_aggregation(s: &str) -> Result<NeAggregation, String> {
    match s {
        "sentence_mean" => Ok(NeAggregation::SentenceMean),
        "corpus_ratio" => Ok(NeAggregation::CorpusRatio),
        _ => Err(format!("expected sentence_mean or corpus_ratio, got {s:?}")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::TrainLm(a) => train_lm(a),
        Command::Run(a) => run(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Metrics(a) => metrics(a),
        Command::MaskHist(a) => mask_hist(a),
        Command::MakeSynthetic(a) => make_synthetic(a),
    }
}

/// Errors raised by the library are about the user's files or settings;
/// anything else is a bug in this program.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|e| e.downcast_ref::<retrans::Error>().is_some()) {
        2
    } else {
        1
    }
}

/// Joins the error chain, skipping causes already spelled out by the
/// message above them.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn train_lm(a: TrainLmArgs) -> Result<()> {
    let sentences = corpus::read_lines(&a.corpus, a.char_mode)?;
    let lm = NgramLm::train(&sentences, a.order, a.alpha)?;
    lm.save(&a.out)?;
    let tokens: usize = sentences.iter().map(|s| s.len()).sum();
    println!(
        "trained order-{} model on {} tokens in {} sentences; vocabulary size {}; written to {}",
        lm.order(),
        tokens,
        sentences.len(),
        lm.vocab_size(),
        a.out.display()
    );
    Ok(())
}

fn apply_overrides(cfg: &mut RunConfig, o: &Overrides) -> Result<()> {
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(p) = o.parallelism {
        cfg.parallelism = p;
    }
    if let Some(lm) = &o.lm {
        cfg.lm = Some(lm.clone());
    }
    let s = &mut cfg.strategy;
    if let Some(kind) = o.strategy {
        s.kind = kind;
    }
    match s.kind {
        StrategyKind::Dynamic => {
            let mut p = s.predictor.unwrap_or(PredictorConfig {
                strategy: ExtensionStrategy::LmGreedy,
                k: 1,
                n: 1,
                seed: cfg.seed,
            });
            if let Some(strategy) = o.predictor {
                p.strategy = strategy;
            }
            if let Some(k) = o.k {
                p.k = k;
            }
            if let Some(n) = o.n {
                p.n = n;
            }
            s.predictor = Some(p.normalized());
            s.k_mask = 0;
        }
        kind => {
            if o.predictor.is_some() || o.n.is_some() {
                bail!(retrans::Error::InvalidConfig(format!(
                    "--predictor and --n only apply to the dynamic strategy, not {}",
                    kind.name()
                )));
            }
            if let Some(k) = o.k {
                if kind != StrategyKind::MaskK {
                    bail!(retrans::Error::InvalidConfig(format!("--k does not apply to strategy {}", kind.name())));
                }
                s.k_mask = k;
            }
            if kind != StrategyKind::MaskK {
                s.k_mask = 0;
            }
            s.predictor = None;
        }
    }
    if let Some(beta) = o.beta {
        s.bias_beta = beta;
    }
    cfg.validate()?;
    Ok(())
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".run.json");
    path.with_file_name(name)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

fn write_points(out: Option<&Path>, points: &[TradeoffPoint]) -> Result<()> {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| retrans::Error::Io { path: path.into(), source: e })?;
            sweep::write_csv(file, points)?;
        }
        None => sweep::write_csv(io::stdout().lock(), points)?,
    }
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    apply_overrides(&mut cfg, &a.overrides)?;
    let result = sim::run_corpus(&cfg)?;
    sim::write_traces(&a.traces, &result.traces)?;
    write_json(
        &sidecar_path(&a.traces),
        &json!({
            "fingerprint": cfg.fingerprint(),
            "config": cfg.to_toml(),
            "point": result.evaluation.point,
            "empty_final": result.evaluation.empty_final,
        }),
    )?;
    for id in &result.evaluation.empty_final {
        eprintln!("warning: sentence {id} has an empty final output; its AL counts as 0");
    }
    write_points(a.csv.as_deref(), &[result.evaluation.point])
}

fn run_sweep(a: SweepArgs) -> Result<()> {
    let spec = SweepSpec::load(&a.spec)?;
    let results = sweep::run_sweep(&spec, a.traces.as_deref())?;
    let points: Vec<TradeoffPoint> = results.into_iter().map(|r| r.point).collect();
    write_points(Some(&a.out), &points)?;
    write_json(
        &sidecar_path(&a.out),
        &json!({
            "fingerprint": spec.base.fingerprint(),
            "config": spec.base.to_toml(),
            "cells": points.iter().map(|p| &p.strategy_label).collect::<Vec<_>>(),
        }),
    )?;
    println!("{} cells written to {}", points.len(), a.out.display());
    if a.pareto {
        let frontier = sweep::pareto_frontier(&points);
        let path = a.out.with_extension("pareto.csv");
        write_points(Some(&path), &frontier)?;
        println!("Pareto frontier ({} points) written to {}", frontier.len(), path.display());
        for p in &frontier {
            println!("  {}  AL={:.4} NE={:.4} BLEU={:.2}", p.strategy_label, p.al, p.ne, p.bleu);
        }
    }
    Ok(())
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let traces = sim::read_traces(&a.traces)?;
    let references = corpus::read_lines(&a.reference, a.char_mode)?;
    let label = a.label.unwrap_or_else(|| {
        a.traces.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    });
    let evaluation = evaluate(&label, &traces, &references, a.ne_aggregation)?;
    write_points(None, &[evaluation.point])
}

fn mask_hist(a: MaskHistArgs) -> Result<()> {
    let traces = sim::read_traces(&a.traces)?;
    let hist = mask_histogram(&traces);
    let mut out = io::stdout().lock();
    if a.csv {
        writeln!(out, "mask_length,count")?;
        for (mask, count) in &hist {
            writeln!(out, "{mask},{count}")?;
        }
        return Ok(());
    }
    writeln!(out, "{:>11}  {:>7}", "mask_length", "count")?;
    for (mask, count) in &hist {
        writeln!(out, "{mask:>11}  {count:>7}")?;
    }
    if let Some(s) = summarize_histogram(&hist) {
        writeln!(
            out,
            "steps {}  mean {:.4}  median {}  share <= 2 {:.4}",
            s.count, s.mean, s.median, s.share_at_most_2
        )?;
    }
    Ok(())
}

const SYNTHETIC_RUN: &str = r#"seed = 42
parallelism = 4
lm = "lm.txt"

[corpus]
source = "test.src"
reference = "test.ref"

[translator]
kind = "toy"
lexicon = "lexicon.txt"

[strategy]
kind = "dynamic"

[strategy.predictor]
strategy = "lm_greedy"
k = 1
n = 1
seed = 42
"#;

fn make_synthetic(a: SyntheticArgs) -> Result<()> {
    let spec = SyntheticSpec {
        vocab_size: a.vocab_size,
        sentences: a.sentences,
        min_len: a.min_len,
        max_len: a.max_len,
        lm_sentences: a.lm_sentences,
        seed: a.seed,
    };
    let data = synthetic::generate(&spec)?;
    synthetic::write(&data, &a.out)?;
    NgramLm::train(&data.lm_train, 3, 0.1)?.save(&a.out.join("lm.txt"))?;
    let run = a.out.join("run.toml");
    fs::write(&run, SYNTHETIC_RUN).map_err(|e| retrans::Error::Io { path: run.clone(), source: e })?;
    println!(
        "{} test sentences, {} LM sentences, {} lexicon entries written to {}",
        data.source.len(),
        data.lm_train.len(),
        data.lexicon.len(),
        a.out.display()
    );
    Ok(())
}
