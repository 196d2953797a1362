//! A lexical toy decoder: every target token translates exactly one source
//! position, reordering is penalized geometrically, and a seeded hash term
//! perturbs scores as a function of the whole source prefix. That last term
//! is what makes translations of successive prefixes disagree.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::hash::{to_signed_unit, Hash64};
use super::{BiasSpec, Translation};
use crate::error::{Error, Result};
use crate::tokens::{Token, TokenSeq};

const NORMALIZATION_TOL: f64 = 1e-9;

/// Source token → target distribution. Targets are kept in file order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    entries: BTreeMap<Token, Vec<(Token, f64)>>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one `src → tgt` entry without checking normalization.
    pub fn insert(&mut self, src: Token, tgt: Token, prob: f64) {
        self.entries.entry(src).or_default().push((tgt, prob));
    }

    pub fn get(&self, src: &Token) -> Option<&[(Token, f64)]> {
        self.entries.get(src).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sources(&self) -> impl Iterator<Item = &Token> {
        self.entries.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Token, &[(Token, f64)])> {
        self.entries.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn validate(&self) -> Result<()> {
        for (src, targets) in &self.entries {
            let mut total = 0.0;
            for (tgt, p) in targets {
                if !(*p > 0.0 && *p <= 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "probability {p} for {src} → {tgt} is outside (0, 1]"
                    )));
                }
                total += p;
            }
            if (total - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::NonNormalizedLexicon { source_token: src.to_string(), total });
            }
        }
        Ok(())
    }

    /// Keeps only the most probable target of each source token, with
    /// probability 1. Ties go to the earlier entry.
    pub fn one_to_one(&self) -> Lexicon {
        let mut out = Lexicon::new();
        for (src, targets) in &self.entries {
            let mut best = &targets[0];
            for t in &targets[1..] {
                if t.1 > best.1 {
                    best = t;
                }
            }
            out.insert(src.clone(), best.0.clone(), 1.0);
        }
        out
    }

    /// Parses `src ||| tgt ||| prob` lines; `#` starts a comment line.
    pub fn parse(text: &str, origin: &str) -> Result<Lexicon> {
        let mut lex = Lexicon::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |msg: String| Error::Parse { path: origin.to_string(), line: i + 1, msg };
            let fields: Vec<&str> = line.split("|||").map(str::trim).collect();
            if fields.len() != 3 {
                return Err(perr(format!("expected `src ||| tgt ||| prob`, got {line:?}")));
            }
            let src = Token::new(fields[0]).map_err(|e| perr(e.to_string()))?;
            let tgt = Token::new(fields[1]).map_err(|e| perr(e.to_string()))?;
            let prob: f64 = fields[2]
                .parse()
                .map_err(|_| perr(format!("bad probability {:?}", fields[2])))?;
            if !(prob > 0.0 && prob <= 1.0) {
                return Err(perr(format!("probability {prob} outside (0, 1]")));
            }
            lex.insert(src, tgt, prob);
        }
        lex.validate()?;
        Ok(lex)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (src, targets) in &self.entries {
            for (tgt, p) in targets {
                out.push_str(&format!("{src} ||| {tgt} ||| {p}\n"));
            }
        }
        out
    }
}

pub fn load_lexicon(path: &Path) -> Result<Lexicon> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Lexicon::parse(&text, &path.display().to_string())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyModelConfig {
    pub lexicon: Lexicon,
    pub beam_size: usize,
    /// Per-position reordering penalty γ in (0, 1].
    pub distortion: f64,
    /// Weight λ of the hash perturbation; 0 disables it.
    pub instability: f64,
    pub eos_prob_final: f64,
    pub eos_prob_nonfinal: f64,
    pub max_len_ratio: f64,
    pub seed: u64,
}

impl ToyModelConfig {
    pub fn new(lexicon: Lexicon) -> Self {
        ToyModelConfig {
            lexicon,
            beam_size: 4,
            distortion: 0.3,
            instability: 0.5,
            eos_prob_final: 0.9,
            eos_prob_nonfinal: 0.1,
            max_len_ratio: 1.5,
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lexicon.validate()?;
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.beam_size == 0 {
            return bad("beam_size must be at least 1");
        }
        if !(self.distortion > 0.0 && self.distortion <= 1.0) {
            return bad("distortion must lie in (0, 1]");
        }
        if !(self.instability >= 0.0 && self.instability.is_finite()) {
            return bad("instability must be finite and non-negative");
        }
        for p in [self.eos_prob_final, self.eos_prob_nonfinal] {
            if !(p > 0.0 && p < 1.0) {
                return bad("EOS probabilities must lie in (0, 1)");
            }
        }
        if !(self.max_len_ratio > 0.0 && self.max_len_ratio.is_finite()) {
            return bad("max_len_ratio must be positive");
        }
        Ok(())
    }
}

/// What a decoding step can emit.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Candidate {
    /// Emit `token` by consuming the (0-based) source `position`.
    Token { token: Token, position: usize },
    Eos,
}

impl Candidate {
    pub fn token(&self) -> Option<&Token> {
        match self {
            Candidate::Token { token, .. } => Some(token),
            Candidate::Eos => None,
        }
    }
}

/// Partial hypothesis bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderState {
    pub target_so_far: Vec<Token>,
    /// Source position consumed by each target token.
    pub alignment: Vec<usize>,
    pub coverage: Vec<bool>,
    pub accumulated_logprob: f64,
    /// Set once the hypothesis departs from the bias target.
    pub diverged: bool,
}

impl DecoderState {
    pub fn initial(source_len: usize) -> Self {
        DecoderState {
            target_so_far: Vec::new(),
            alignment: Vec::new(),
            coverage: vec![false; source_len],
            accumulated_logprob: 0.0,
            diverged: false,
        }
    }

    pub fn covered(&self) -> usize {
        self.coverage.iter().filter(|c| **c).count()
    }

    fn advance(&self, cand: &Candidate, logp: f64, diverged: bool) -> DecoderState {
        let mut next = self.clone();
        if let Candidate::Token { token, position } = cand {
            next.target_so_far.push(token.clone());
            next.alignment.push(*position);
            next.coverage[*position] = true;
        }
        next.accumulated_logprob += logp;
        next.diverged = diverged;
        next
    }
}

fn ends_sentence(source: &TokenSeq) -> bool {
    matches!(source.tokens().last().map(Token::as_str), Some("." | "?" | "!"))
}

/// Target distribution of one source token; UNK maps to itself.
fn targets_of<'a>(model: &'a ToyModelConfig, src: &Token, unk: &'a [(Token, f64)]) -> Result<&'a [(Token, f64)]> {
    if src.is_unk() {
        return Ok(unk);
    }
    model
        .lexicon
        .get(src)
        .ok_or_else(|| Error::UnknownSourceToken(src.to_string()))
}

/// Normalized next-step distribution of the toy model.
///
/// Candidates are ordered by source position, then by lexicon order, with
/// EOS (when available) last.
pub fn step_distribution(
    model: &ToyModelConfig,
    state: &DecoderState,
    source: &TokenSeq,
    source_is_final_sentence: bool,
) -> Result<Vec<(Candidate, f64)>> {
    let prefix_hash = source_hash(model.seed, source);
    step_distribution_keyed(model, state, source, source_is_final_sentence, &prefix_hash)
}

fn source_hash(seed: u64, source: &TokenSeq) -> Hash64 {
    let mut h = Hash64::new(seed);
    h.write_u64(source.len() as u64);
    for t in source {
        h.write_str(t.as_str());
    }
    h
}

fn step_distribution_keyed(
    model: &ToyModelConfig,
    state: &DecoderState,
    source: &TokenSeq,
    source_is_final_sentence: bool,
    prefix_hash: &Hash64,
) -> Result<Vec<(Candidate, f64)>> {
    let unk_entry = [(Token::unk(), 1.0)];
    let produced = state.target_so_far.len();
    let expected_next = state
        .coverage
        .iter()
        .rposition(|c| *c)
        .map_or(0, |last| last + 1);

    let mut out: Vec<(Candidate, f64)> = Vec::new();
    let mut total = 0.0;
    for (j, src) in source.iter().enumerate() {
        if state.coverage[j] {
            continue;
        }
        let jump = j.abs_diff(expected_next) as i32;
        let reorder = model.distortion.powi(jump);
        for (tgt, lex_p) in targets_of(model, src, &unk_entry)? {
            let mut score = lex_p * reorder;
            if model.instability > 0.0 {
                let mut h = *prefix_hash;
                h.write_u64(produced as u64).write_str(tgt.as_str());
                score *= (model.instability * to_signed_unit(h.finish())).exp();
            }
            total += score;
            out.push((Candidate::Token { token: tgt.clone(), position: j }, score));
        }
    }

    let full = state.covered() == source.len();
    if full || produced as f64 >= model.max_len_ratio * source.len() as f64 {
        let eos = if source_is_final_sentence || ends_sentence(source) {
            model.eos_prob_final
        } else {
            model.eos_prob_nonfinal
        };
        total += eos;
        out.push((Candidate::Eos, eos));
    }

    for (_, p) in &mut out {
        *p /= total;
    }
    Ok(out)
}

/// Beam search with optional biasing towards a previous output.
///
/// Hypotheses that emit EOS leave the beam, which shrinks accordingly, so
/// a width of 1 is exactly greedy decoding. Rankings use the summed log of
/// the (possibly biased) step probabilities with no length normalization.
pub fn decode(
    model: &ToyModelConfig,
    source: &TokenSeq,
    complete: bool,
    bias: Option<&BiasSpec>,
) -> Result<Translation> {
    for t in source {
        targets_of(model, t, &[])?;
    }
    let prefix_hash = source_hash(model.seed, source);
    let beta = bias.map_or(0.0, |b| b.beta());
    let previous = bias.map(|b| b.previous_output.tokens()).unwrap_or(&[]);

    let mut live = vec![DecoderState::initial(source.len())];
    let mut finished: Vec<DecoderState> = Vec::new();

    while !live.is_empty() {
        let width = model.beam_size - finished.len();
        let mut expansions: Vec<(DecoderState, bool)> = Vec::new();
        for hyp in &live {
            let i = hyp.target_so_far.len();
            let biased = bias.is_some() && !hyp.diverged && i < previous.len();
            for (cand, p) in step_distribution_keyed(model, hyp, source, complete, &prefix_hash)? {
                let (prob, diverged) = if biased {
                    let matches = cand.token() == Some(&previous[i]);
                    let delta = if matches { 1.0 } else { 0.0 };
                    ((1.0 - beta) * p + beta * delta, !matches)
                } else {
                    (p, hyp.diverged)
                };
                let is_eos = cand == Candidate::Eos;
                expansions.push((hyp.advance(&cand, prob.ln(), diverged), is_eos));
            }
        }
        expansions.sort_by(|a, b| rank(&a.0, &b.0));
        live.clear();
        for (state, is_eos) in expansions.into_iter().take(width) {
            if is_eos {
                finished.push(state);
            } else {
                live.push(state);
            }
        }
    }

    let best = finished
        .into_iter()
        .min_by(rank)
        .expect("beam search always finishes at least one hypothesis");
    Ok(Translation {
        tokens: TokenSeq::from_tokens(best.target_so_far),
        score: best.accumulated_logprob,
    })
}

/// Best first: higher score, then the more monotone alignment, then the
/// lexicographically smaller target.
fn rank(a: &DecoderState, b: &DecoderState) -> std::cmp::Ordering {
    b.accumulated_logprob
        .total_cmp(&a.accumulated_logprob)
        .then_with(|| a.alignment.cmp(&b.alignment))
        .then_with(|| a.target_so_far.cmp(&b.target_so_far))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok(s: &str) -> Token {
        Token::new(s).unwrap()
    }

    fn lexicon(entries: &[(&str, &str, f64)]) -> Lexicon {
        let mut lex = Lexicon::new();
        for (s, t, p) in entries {
            lex.insert(tok(s), tok(t), *p);
        }
        lex
    }

    fn model(entries: &[(&str, &str, f64)]) -> ToyModelConfig {
        let mut m = ToyModelConfig::new(lexicon(entries));
        m.instability = 0.0;
        m
    }

    #[test]
    fn lexicon_parse_and_normalization() {
        let lex = Lexicon::parse("# comment\na ||| x ||| 0.7\na ||| y ||| 0.3\n", "t").unwrap();
        let total: f64 = lex.get(&tok("a")).unwrap().iter().map(|e| e.1).sum();
        assert!((total - 1.0).abs() < 1e-12);

        let err = Lexicon::parse("a ||| x ||| 0.7\n", "t").unwrap_err();
        assert!(matches!(err, Error::NonNormalizedLexicon { .. }));

        let err = Lexicon::parse("a ||| x\n", "lex.txt").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        let err = Lexicon::parse("\n\na ||| x ||| abc\n", "lex.txt").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn lexicon_text_round_trip() {
        let lex = lexicon(&[("a", "x", 0.7), ("a", "y", 0.3), ("b", "z", 1.0)]);
        assert_eq!(Lexicon::parse(&lex.to_text(), "t").unwrap(), lex);
    }

    #[test]
    fn single_uncovered_token_distribution() {
        let m = model(&[("a", "x", 1.0), ("b", "y", 1.0)]);
        let source = TokenSeq::words("a b");
        let mut state = DecoderState::initial(2);
        state.target_so_far.push(tok("x"));
        state.alignment.push(0);
        state.coverage[0] = true;
        let dist = step_distribution(&m, &state, &source, false).unwrap();
        // 1 uncovered token with γ^0 = 1; EOS is gated off (1 < 1.5 · 2 and coverage partial).
        assert_eq!(dist, vec![(Candidate::Token { token: tok("y"), position: 1 }, 1.0)]);

        let mut m2 = m.clone();
        m2.max_len_ratio = 0.5;
        let dist = step_distribution(&m2, &state, &source, false).unwrap();
        let z = 1.0 + m2.eos_prob_nonfinal;
        assert_eq!(dist.len(), 2);
        assert!((dist[0].1 - 1.0 / z).abs() < 1e-15);
        assert!((dist[1].1 - m2.eos_prob_nonfinal / z).abs() < 1e-15);
        assert_eq!(dist[1].0, Candidate::Eos);
    }

    #[test]
    fn perturbation_keeps_support_and_normalization() {
        let mut m = model(&[("a", "x", 0.6), ("a", "w", 0.4), ("b", "y", 1.0)]);
        let source = TokenSeq::words("a b");
        let state = DecoderState::initial(2);
        let plain = step_distribution(&m, &state, &source, false).unwrap();
        m.instability = 1.0;
        let noisy = step_distribution(&m, &state, &source, false).unwrap();
        let support = |d: &[(Candidate, f64)]| d.iter().map(|c| c.0.clone()).collect::<Vec<_>>();
        assert_eq!(support(&plain), support(&noisy));
        assert_ne!(plain, noisy);
        let total: f64 = noisy.iter().map(|c| c.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sentence_final_punctuation_raises_eos() {
        let mut m = model(&[("a", "x", 1.0), (".", ".", 1.0)]);
        m.max_len_ratio = 0.1;
        let mut state = DecoderState::initial(2);
        state.target_so_far.push(tok("x"));
        state.alignment.push(0);
        state.coverage[0] = true;
        // One uncovered position at distance 0 scores 1, so EOS/rest is the raw EOS score.
        let eos_ratio = |src: &str, fin: bool| {
            let d = step_distribution(&m, &state, &TokenSeq::words(src), fin).unwrap();
            assert_eq!(d.last().unwrap().0, Candidate::Eos);
            let rest: f64 = d[..d.len() - 1].iter().map(|c| c.1).sum();
            d.last().unwrap().1 / rest
        };
        assert!((eos_ratio("a a", false) - m.eos_prob_nonfinal).abs() < 1e-12);
        assert!((eos_ratio("a a", true) - m.eos_prob_final).abs() < 1e-12);
        assert!((eos_ratio("a .", false) - m.eos_prob_final).abs() < 1e-12);
    }

    #[test]
    fn unknown_source_token_is_an_error() {
        let m = model(&[("a", "x", 1.0)]);
        let err = decode(&m, &TokenSeq::words("a zzz"), true, None).unwrap_err();
        assert!(matches!(err, Error::UnknownSourceToken(ref t) if t == "zzz"));
    }

    #[test]
    fn unk_translates_to_unk() {
        let m = model(&[("a", "x", 1.0)]);
        let src = TokenSeq::from_tokens(vec![tok("a"), Token::unk()]);
        let out = decode(&m, &src, false, None).unwrap();
        assert_eq!(out.tokens, TokenSeq::from_tokens(vec![tok("x"), Token::unk()]));
    }

    #[test]
    fn config_validation() {
        let mut m = model(&[("a", "x", 1.0)]);
        assert!(m.validate().is_ok());
        m.beam_size = 0;
        assert!(m.validate().is_err());
        let mut m = model(&[("a", "x", 1.0)]);
        m.distortion = 0.0;
        assert!(m.validate().is_err());
        let mut m = model(&[("a", "x", 1.0)]);
        m.eos_prob_final = 1.0;
        assert!(m.validate().is_err());
    }
}
