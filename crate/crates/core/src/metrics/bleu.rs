//! Corpus BLEU-4 over pre-tokenized text.
//!
//! Clipped n-gram matches and totals are summed over the corpus. For
//! n ≥ 2 a zero match count is smoothed to `(0 + 1) / (total + 1)`. The
//! brevity penalty is `exp(1 − r/c)` when the hypothesis length `c` is
//! shorter than the reference length `r`. Not bit-compatible with
//! sacreBLEU's tokenization.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::tokens::{Token, TokenSeq};

const MAX_ORDER: usize = 4;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BleuStats {
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    pub fn add(&mut self, hyp: &TokenSeq, reference: &TokenSeq) {
        self.hyp_len += hyp.len();
        self.ref_len += reference.len();
        for n in 1..=MAX_ORDER {
            let ref_counts = ngram_counts(reference.tokens(), n);
            for (gram, c) in ngram_counts(hyp.tokens(), n) {
                self.matches[n - 1] += c.min(ref_counts.get(gram).copied().unwrap_or(0));
            }
            self.totals[n - 1] += hyp.len().saturating_sub(n - 1);
        }
    }

    pub fn precisions(&self) -> [f64; MAX_ORDER] {
        let mut p = [0.0; MAX_ORDER];
        for (n, slot) in p.iter_mut().enumerate() {
            let (m, t) = (self.matches[n], self.totals[n]);
            *slot = if n > 0 && m == 0 {
                1.0 / (t as f64 + 1.0)
            } else if t == 0 {
                0.0
            } else {
                m as f64 / t as f64
            };
        }
        p
    }

    pub fn brevity_penalty(&self) -> f64 {
        if self.hyp_len == 0 {
            0.0
        } else if self.hyp_len < self.ref_len {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        } else {
            1.0
        }
    }

    /// BLEU on a 0–100 scale.
    pub fn score(&self) -> f64 {
        let p = self.precisions();
        if p.contains(&0.0) {
            return 0.0;
        }
        let log_mean = p.iter().map(|x| x.ln()).sum::<f64>() / MAX_ORDER as f64;
        100.0 * self.brevity_penalty() * log_mean.exp()
    }
}

fn ngram_counts(tokens: &[Token], n: usize) -> HashMap<&[Token], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

pub fn corpus_bleu(hypotheses: &[TokenSeq], references: &[TokenSeq]) -> Result<f64> {
    if hypotheses.len() != references.len() || hypotheses.is_empty() {
        return Err(Error::LengthMismatch { hypotheses: hypotheses.len(), references: references.len() });
    }
    let mut stats = BleuStats::default();
    for (h, r) in hypotheses.iter().zip(references) {
        stats.add(h, r);
    }
    Ok(stats.score())
}
