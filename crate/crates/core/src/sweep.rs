//! Parameter sweeps over strategy settings and Pareto analysis of the
//! resulting latency / flicker points.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus;
use crate::error::{Error, Result};
use crate::metrics::TradeoffPoint;
use crate::predict::{ExtensionStrategy, PredictorConfig};
use crate::sim::{self, Models, RunConfig, SessionSettings};
use crate::strategy::{StrategyConfig, StrategyKind};
use crate::tokens::SessionTrace;

/// Value lists whose cross product (per strategy kind) defines cells.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    #[serde(default)]
    pub kinds: Vec<StrategyKind>,
    #[serde(default)]
    pub k_mask: Vec<usize>,
    #[serde(default)]
    pub bias_beta: Vec<f64>,
    #[serde(default)]
    pub predictor: Vec<ExtensionStrategy>,
    #[serde(default)]
    pub k: Vec<usize>,
    #[serde(default)]
    pub n: Vec<usize>,
}

fn or_default<T: Clone>(values: &[T], fallback: T) -> Vec<T> {
    if values.is_empty() {
        vec![fallback]
    } else {
        values.to_vec()
    }
}

impl SweepAxes {
    pub fn cells(&self) -> Result<Vec<StrategyConfig>> {
        let betas = or_default(&self.bias_beta, 0.0);
        let mut out = Vec::new();
        for kind in &self.kinds {
            match kind {
                StrategyKind::None => out.extend(betas.iter().map(|b| StrategyConfig::none().with_bias(*b))),
                StrategyKind::Oracle => out.push(StrategyConfig::oracle()),
                StrategyKind::MaskK => {
                    for k in or_default(&self.k_mask, 0) {
                        out.extend(betas.iter().map(|b| StrategyConfig::mask_k(k).with_bias(*b)));
                    }
                }
                StrategyKind::Dynamic => {
                    for strategy in or_default(&self.predictor, ExtensionStrategy::LmGreedy) {
                        for k in or_default(&self.k, 1) {
                            for n in or_default(&self.n, 1) {
                                let p = PredictorConfig::new(strategy, k, n, 0)?;
                                out.extend(betas.iter().map(|b| StrategyConfig::dynamic(p).with_bias(*b)));
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Run configuration every cell starts from; only its strategy changes.
    pub base: RunConfig,
    #[serde(default)]
    pub axes: SweepAxes,
    /// Explicit cells in addition to the axes' cross product.
    #[serde(default, rename = "cell")]
    pub cells: Vec<StrategyConfig>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    base: PathBuf,
    #[serde(default)]
    axes: SweepAxes,
    #[serde(default, rename = "cell")]
    cells: Vec<StrategyConfig>,
}

impl SweepSpec {
    /// Reads a sweep file whose `base` key names a run config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: SweepFile = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.span().map(|s| sim::config::error_line(&text, s, e.message())).unwrap_or(0),
            msg: e.message().to_string(),
        })?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let base_path = if file.base.is_relative() { dir.join(&file.base) } else { file.base };
        Ok(SweepSpec { base: RunConfig::load(&base_path)?, axes: file.axes, cells: file.cells })
    }

    /// All cells, deduplicated by label and sorted by label.
    pub fn all_cells(&self) -> Result<Vec<StrategyConfig>> {
        let mut by_label = BTreeMap::new();
        for cell in self.axes.cells()?.into_iter().chain(self.cells.iter().cloned()) {
            let cell = StrategyConfig { predictor: cell.predictor.map(PredictorConfig::normalized), ..cell };
            cell.validate()?;
            by_label.entry(cell.label()).or_insert(cell);
        }
        Ok(by_label.into_values().collect())
    }
}

#[derive(Clone, Debug)]
pub struct CellResult {
    pub strategy: StrategyConfig,
    pub point: TradeoffPoint,
    pub traces: Vec<SessionTrace>,
}

/// File-name-safe form of a cell label.
pub fn label_slug(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '_' { c } else { '-' }).collect()
}

/// Runs every cell; a failure aborts the sweep naming the failing cell.
/// Results come back sorted by label. With `trace_dir`, each cell's traces
/// are written there as they complete.
pub fn run_sweep(spec: &SweepSpec, trace_dir: Option<&Path>) -> Result<Vec<CellResult>> {
    let base = &spec.base;
    base.validate()?;
    let pairs = corpus::load_parallel(&base.corpus.source, &base.corpus.reference, base.char_mode)?;
    let models = Models::load(base, &pairs)?;
    let cells = spec.all_cells()?;
    for cell in &cells {
        sim::check_models(cell, &models)?;
    }
    if let Some(dir) = trace_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(base.parallelism)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let label = cell.label();
                let settings = SessionSettings::new(cell.clone(), base.seed);
                let run = sim::run_pairs(&settings, &pairs, &models, 1, base.ne_aggregation)
                    .map_err(|e| Error::InvalidConfig(format!("sweep cell {label} failed: {e}")))?;
                if let Some(dir) = trace_dir {
                    sim::write_traces(&dir.join(format!("{}.jsonl", label_slug(&label))), &run.traces)?;
                }
                Ok(CellResult { strategy: cell.clone(), point: run.evaluation.point, traces: run.traces })
            })
            .collect()
    })
}

/// True when `a` is no worse than `b` on both AL and NE and better on one.
pub fn dominates(a: &TradeoffPoint, b: &TradeoffPoint) -> bool {
    a.al <= b.al && a.ne <= b.ne && (a.al < b.al || a.ne < b.ne)
}

/// Points not dominated by any other point, in input order.
pub fn pareto_frontier(points: &[TradeoffPoint]) -> Vec<TradeoffPoint> {
    points.iter().filter(|p| !points.iter().any(|q| dominates(q, p))).cloned().collect()
}

pub fn write_csv(out: impl Write, points: &[TradeoffPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<TradeoffPoint>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(label: &str, al: f64, ne: f64) -> TradeoffPoint {
        TradeoffPoint { strategy_label: label.into(), al, ne, bleu: 0.0, n_sentences: 1 }
    }

    #[test]
    fn frontier() {
        let pts = vec![point("a", 1.0, 0.5), point("b", 2.0, 0.1), point("c", 2.0, 0.6), point("d", 1.0, 0.5)];
        let f: Vec<String> = pareto_frontier(&pts).into_iter().map(|p| p.strategy_label).collect();
        assert_eq!(f, vec!["a", "b", "d"]);
        assert!(dominates(&pts[0], &pts[2]));
        assert!(!dominates(&pts[0], &pts[3]));
    }

    #[test]
    fn csv_header_is_stable() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[point("mask_k:k=1", 1.5, 0.25)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "strategy,AL,NE,BLEU,n_sentences\nmask_k:k=1,1.5,0.25,0.0,1\n");
    }

    #[test]
    fn axes_expand_per_kind() {
        let axes = SweepAxes {
            kinds: vec![StrategyKind::MaskK, StrategyKind::Dynamic, StrategyKind::Oracle],
            k_mask: vec![1, 2],
            bias_beta: vec![0.0, 0.5],
            predictor: vec![ExtensionStrategy::LmGreedy, ExtensionStrategy::Random],
            k: vec![1],
            n: vec![1, 3],
        };
        let cells = axes.cells().unwrap();
        // mask: 2 × 2; dynamic: 2 predictors × 2 n × 2 betas; oracle: 1.
        assert_eq!(cells.len(), 4 + 8 + 1);
    }

    #[test]
    fn cells_are_deduplicated_and_sorted() {
        let base = RunConfig::from_toml(
            "[corpus]\nsource='s'\nreference='r'\n[translator]\nkind='scripted'\nscript='x'\n[strategy]\nkind='none'\n",
            "t",
        )
        .unwrap();
        let spec = SweepSpec {
            base,
            axes: SweepAxes {
                kinds: vec![StrategyKind::Dynamic, StrategyKind::MaskK],
                predictor: vec![ExtensionStrategy::LmGreedy],
                n: vec![1, 3],
                k_mask: vec![2, 10],
                ..SweepAxes::default()
            },
            cells: vec![StrategyConfig::mask_k(2)],
        };
        let labels: Vec<String> = spec.all_cells().unwrap().iter().map(StrategyConfig::label).collect();
        assert_eq!(labels, vec!["dynamic:lm_greedy,k=1,n=1", "mask_k:k=10", "mask_k:k=2"]);
    }

    #[test]
    fn slugs_are_file_safe() {
        assert_eq!(label_slug("dynamic:random,k=5,n=3"), "dynamic-random-k-5-n-3");
    }
}
