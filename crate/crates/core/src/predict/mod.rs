//! Source-extension prediction: guesses the next `k` source tokens after
//! a prefix so the translator can be probed for instability.

mod lm;

pub use lm::{NgramLm, BOS, EOS};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokens::{Token, TokenSeq};
use crate::translator::hash::Hash64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtensionStrategy {
    LmSample,
    LmGreedy,
    Unknown,
    Random,
}

impl ExtensionStrategy {
    pub const ALL: [ExtensionStrategy; 4] = [
        ExtensionStrategy::LmSample,
        ExtensionStrategy::LmGreedy,
        ExtensionStrategy::Unknown,
        ExtensionStrategy::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExtensionStrategy::LmSample => "lm_sample",
            ExtensionStrategy::LmGreedy => "lm_greedy",
            ExtensionStrategy::Unknown => "unknown",
            ExtensionStrategy::Random => "random",
        }
    }

    pub fn needs_lm(self) -> bool {
        matches!(self, ExtensionStrategy::LmSample | ExtensionStrategy::LmGreedy)
    }

    /// Deterministic strategies produce identical samples, so only one is drawn.
    pub fn is_deterministic(self) -> bool {
        matches!(self, ExtensionStrategy::LmGreedy | ExtensionStrategy::Unknown)
    }
}

impl std::str::FromStr for ExtensionStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown extension strategy {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub strategy: ExtensionStrategy,
    /// Tokens appended per extension.
    pub k: usize,
    /// Number of extensions.
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

impl PredictorConfig {
    /// Builds a config; `n` is forced to 1 for deterministic strategies.
    pub fn new(strategy: ExtensionStrategy, k: usize, n: usize, seed: u64) -> Result<Self> {
        let cfg = PredictorConfig { strategy, k, n, seed };
        cfg.validate()?;
        Ok(cfg.normalized())
    }

    pub fn normalized(mut self) -> Self {
        if self.strategy.is_deterministic() {
            self.n = 1;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 {
            return Err(Error::InvalidConfig("predictor k and n must be at least 1".into()));
        }
        Ok(())
    }

    pub fn effective_n(&self) -> usize {
        if self.strategy.is_deterministic() {
            1
        } else {
            self.n
        }
    }
}

/// Random stream for one sample of one step of one sentence.
pub fn sample_rng(seed: u64, sentence_id: usize, step_index: usize, sample_index: usize) -> ChaCha8Rng {
    let key = Hash64::new(seed)
        .write_u64(sentence_id as u64)
        .write_u64(step_index as u64)
        .write_u64(sample_index as u64)
        .finish();
    ChaCha8Rng::seed_from_u64(key)
}

/// Most probable next token; ties go to the lexicographically smallest.
fn argmax(dist: &[(Token, f64)]) -> &Token {
    let mut best = &dist[0];
    for entry in &dist[1..] {
        if entry.1 > best.1 {
            best = entry;
        }
    }
    &best.0
}

/// Extends `prefix` `cfg.effective_n()` times.
///
/// LM strategies stop an extension early when EOS is predicted, so an
/// extension may add fewer than `k` tokens (possibly none).
pub fn predict_extensions(
    cfg: &PredictorConfig,
    lm: Option<&NgramLm>,
    vocab: &[Token],
    prefix: &TokenSeq,
    sentence_id: usize,
    step_index: usize,
) -> Result<Vec<TokenSeq>> {
    if prefix.is_empty() {
        return Err(Error::InvalidConfig("cannot extend an empty prefix".into()));
    }
    let lm = match (cfg.strategy.needs_lm(), lm) {
        (true, None) => return Err(Error::MissingLm(cfg.strategy.name())),
        (_, lm) => lm,
    };
    let mut out = Vec::with_capacity(cfg.effective_n());
    for sample in 0..cfg.effective_n() {
        let mut ext = prefix.clone();
        match cfg.strategy {
            ExtensionStrategy::Unknown => {
                for _ in 0..cfg.k {
                    ext.push(Token::unk());
                }
            }
            ExtensionStrategy::Random => {
                if vocab.is_empty() {
                    return Err(Error::InvalidConfig("random extension needs a vocabulary".into()));
                }
                let mut rng = sample_rng(cfg.seed, sentence_id, step_index, sample);
                for _ in 0..cfg.k {
                    ext.push(vocab[rng.gen_range(0..vocab.len())].clone());
                }
            }
            ExtensionStrategy::LmGreedy | ExtensionStrategy::LmSample => {
                let lm = lm.expect("checked above");
                let mut rng = sample_rng(cfg.seed, sentence_id, step_index, sample);
                for _ in 0..cfg.k {
                    let dist = lm.distribution(ext.tokens());
                    let next = if cfg.strategy == ExtensionStrategy::LmGreedy {
                        argmax(&dist).clone()
                    } else {
                        let index = WeightedIndex::new(dist.iter().map(|d| d.1))
                            .expect("LM distributions are strictly positive");
                        dist[index.sample(&mut rng)].0.clone()
                    };
                    if &next == lm.eos() {
                        break;
                    }
                    ext.push(next);
                }
            }
        }
        out.push(ext);
    }
    Ok(out)
}
