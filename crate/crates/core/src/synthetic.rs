//! A self-contained synthetic parallel corpus and lexicon.
//!
//! Source sentences come from a sparse first-order Markov chain over a
//! small vocabulary (so a language model has something to learn) and end
//! with ".". Each source word has one to three target senses with a
//! dominant first sense; references are the word-for-word translation with
//! dominant senses.

use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::write_lines;
use crate::error::{Error, Result};
use crate::tokens::{Token, TokenSeq};
use crate::translator::Lexicon;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    /// Source vocabulary size, including the final ".".
    pub vocab_size: usize,
    pub sentences: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Separate sentences from the same chain for LM training.
    pub lm_sentences: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec { vocab_size: 50, sentences: 200, min_len: 3, max_len: 20, lm_sentences: 2000, seed: 42 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub source: Vec<TokenSeq>,
    pub reference: Vec<TokenSeq>,
    pub lm_train: Vec<TokenSeq>,
    pub lexicon: Lexicon,
}

const SUCCESSORS: usize = 4;

fn tok(s: &str) -> Token {
    Token::new(s).expect("generated tokens contain no whitespace")
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    if spec.vocab_size < 2 || spec.min_len < 2 || spec.min_len > spec.max_len || spec.sentences == 0 {
        return Err(Error::InvalidConfig(format!("unusable synthetic corpus spec {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let words: Vec<Token> = (0..spec.vocab_size - 1).map(|i| tok(&format!("w{i:02}"))).collect();
    let stop = tok(".");

    // Each word prefers a handful of successors.
    let chain: Vec<(Vec<usize>, WeightedIndex<f64>)> = (0..words.len())
        .map(|_| {
            let next: Vec<usize> = (0..SUCCESSORS).map(|_| rng.gen_range(0..words.len())).collect();
            let weights: Vec<f64> = (0..SUCCESSORS).map(|r| 1.0 / (r as f64 + 1.0)).collect();
            (next, WeightedIndex::new(weights).expect("positive weights"))
        })
        .collect();

    let mut lexicon = Lexicon::new();
    let mut best = Vec::with_capacity(words.len());
    for (i, w) in words.iter().enumerate() {
        let senses = rng.gen_range(1..=3usize);
        let mut weights: Vec<f64> = (0..senses).map(|_| rng.gen_range(0.05..1.0)).collect();
        weights[0] += 1.0;
        let total: f64 = weights.iter().sum();
        let mut remaining = 1.0;
        for (j, wt) in weights.iter().enumerate() {
            let target = tok(&format!("t{i:02}{}", (b'a' + j as u8) as char));
            let p = if j + 1 == senses { remaining } else { wt / total };
            remaining -= p;
            lexicon.insert(w.clone(), target, p);
        }
        best.push(tok(&format!("t{i:02}a")));
    }
    lexicon.insert(stop.clone(), stop.clone(), 1.0);
    lexicon.validate()?;

    let sentence = |rng: &mut ChaCha8Rng| -> (TokenSeq, TokenSeq) {
        let len = rng.gen_range(spec.min_len..=spec.max_len);
        let mut src = Vec::with_capacity(len);
        let mut tgt = Vec::with_capacity(len);
        let mut cur = rng.gen_range(0..words.len());
        for _ in 0..len - 1 {
            src.push(words[cur].clone());
            tgt.push(best[cur].clone());
            let (next, dist) = &chain[cur];
            cur = next[dist.sample(rng)];
        }
        src.push(stop.clone());
        tgt.push(stop.clone());
        (TokenSeq::from_tokens(src), TokenSeq::from_tokens(tgt))
    };

    let (source, reference) = (0..spec.sentences).map(|_| sentence(&mut rng)).unzip();
    let lm_train = (0..spec.lm_sentences).map(|_| sentence(&mut rng).0).collect();
    Ok(SyntheticCorpus { source, reference, lm_train, lexicon })
}

/// File names written by [`write`], relative to the output directory.
pub const SOURCE_FILE: &str = "test.src";
pub const REFERENCE_FILE: &str = "test.ref";
pub const LM_TRAIN_FILE: &str = "train.src";
pub const LEXICON_FILE: &str = "lexicon.txt";

pub fn write(corpus: &SyntheticCorpus, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_lines(&dir.join(SOURCE_FILE), &corpus.source)?;
    write_lines(&dir.join(REFERENCE_FILE), &corpus.reference)?;
    write_lines(&dir.join(LM_TRAIN_FILE), &corpus.lm_train)?;
    let lex = dir.join(LEXICON_FILE);
    std::fs::write(&lex, corpus.lexicon.to_text()).map_err(|e| Error::io(&lex, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinned_shape() {
        let c = generate(&SyntheticSpec::default()).unwrap();
        assert_eq!(c.source.len(), 200);
        assert_eq!(c.reference.len(), 200);
        assert_eq!(c.lexicon.len(), 50);
        for (s, r) in c.source.iter().zip(&c.reference) {
            assert!((3..=20).contains(&s.len()));
            assert_eq!(s.len(), r.len());
            assert_eq!(s.tokens().last().unwrap().as_str(), ".");
            for t in s {
                assert!(c.lexicon.get(t).is_some());
            }
        }
        c.lexicon.validate().unwrap();
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate(&SyntheticSpec::default()).unwrap();
        assert_eq!(a, generate(&SyntheticSpec::default()).unwrap());
        let b = generate(&SyntheticSpec { seed: 7, ..SyntheticSpec::default() }).unwrap();
        assert_ne!(a.source, b.source);
    }

    #[test]
    fn rejects_degenerate_specs() {
        assert!(generate(&SyntheticSpec { min_len: 5, max_len: 4, ..SyntheticSpec::default() }).is_err());
        assert!(generate(&SyntheticSpec { vocab_size: 1, ..SyntheticSpec::default() }).is_err());
    }
}
