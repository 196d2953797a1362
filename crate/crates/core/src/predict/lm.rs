//! Add-α smoothed n-gram language model with backoff to shorter contexts.
//!
//! For a history `h` the model looks for the longest context of at most
//! `order − 1` tokens that was seen in training and returns
//! `(c(ctx, t) + α) / (c(ctx) + α·V)`; if no context was seen it falls back
//! to the unigram estimate `(c(t) + α) / (N + α·V)`. `V` counts every
//! training token plus the reserved UNK and EOS symbols. Each of these is
//! a proper distribution over the vocabulary.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tokens::{Token, TokenSeq};

pub const EOS: &str = "⟨eos⟩";
/// Sentence-start padding; appears in contexts but is never predicted.
pub const BOS: &str = "⟨s⟩";

const FORMAT_HEADER: &str = "ngram-lm 1";

fn reserved(text: &str) -> Token {
    Token::new(text).expect("reserved symbols are valid tokens")
}

#[derive(Clone, Debug, PartialEq)]
pub struct NgramLm {
    order: usize,
    alpha: f64,
    vocab: BTreeSet<Token>,
    /// `counts[n - 1]` holds counts of n-grams ending in a predicted token.
    counts: Vec<BTreeMap<Vec<Token>, u64>>,
    /// Occurrences of each context as the prefix of a counted n-gram.
    context_counts: HashMap<Vec<Token>, u64>,
    total_tokens: u64,
    eos: Token,
    unk: Token,
}

impl NgramLm {
    pub fn train(corpus: &[TokenSeq], order: usize, alpha: f64) -> Result<Self> {
        check_params(order, alpha)?;
        if corpus.iter().all(TokenSeq::is_empty) {
            return Err(Error::EmptyCorpus);
        }
        let bos = reserved(BOS);
        let eos = reserved(EOS);
        let mut counts = vec![BTreeMap::new(); order];
        for sentence in corpus.iter().filter(|s| !s.is_empty()) {
            let mut padded = vec![bos.clone(); order - 1];
            padded.extend(sentence.iter().cloned());
            padded.push(eos.clone());
            for end in order - 1..padded.len() {
                for n in 1..=order {
                    let gram = padded[end + 1 - n..=end].to_vec();
                    *counts[n - 1].entry(gram).or_insert(0) += 1;
                }
            }
        }
        Ok(Self::from_counts(order, alpha, counts))
    }

    fn from_counts(order: usize, alpha: f64, counts: Vec<BTreeMap<Vec<Token>, u64>>) -> Self {
        let eos = reserved(EOS);
        let unk = Token::unk();
        let mut vocab: BTreeSet<Token> = counts[0].keys().map(|g| g[0].clone()).collect();
        vocab.insert(eos.clone());
        vocab.insert(unk.clone());
        let total_tokens = counts[0].values().sum();
        let mut context_counts = HashMap::new();
        for table in &counts[1..] {
            for (gram, c) in table {
                *context_counts.entry(gram[..gram.len() - 1].to_vec()).or_insert(0) += c;
            }
        }
        NgramLm { order, alpha, vocab, counts, context_counts, total_tokens, eos, unk }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Vocabulary including UNK and EOS, in sorted order.
    pub fn vocab(&self) -> impl Iterator<Item = &Token> {
        self.vocab.iter()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Vocabulary without the reserved symbols.
    pub fn word_vocab(&self) -> Vec<Token> {
        self.vocab.iter().filter(|t| **t != self.eos && **t != self.unk).cloned().collect()
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn eos(&self) -> &Token {
        &self.eos
    }

    /// The `order − 1` most recent tokens of `history`, BOS-padded, with
    /// out-of-vocabulary tokens replaced by UNK.
    fn context_of(&self, history: &[Token]) -> Vec<Token> {
        let want = self.order - 1;
        let mut ctx: Vec<Token> = history[history.len().saturating_sub(want)..]
            .iter()
            .map(|t| if self.vocab.contains(t) { t.clone() } else { self.unk.clone() })
            .collect();
        while ctx.len() < want {
            ctx.insert(0, reserved(BOS));
        }
        ctx
    }

    /// Longest seen context suffix; empty means unigram.
    fn backoff_context(&self, history: &[Token]) -> Vec<Token> {
        let mut ctx = self.context_of(history);
        while !ctx.is_empty() && !self.context_counts.contains_key(&ctx) {
            ctx.remove(0);
        }
        ctx
    }

    fn prob_in(&self, ctx: &[Token], token: &Token) -> f64 {
        let v = self.vocab.len() as f64;
        let (num, den) = if ctx.is_empty() {
            let c = self.counts[0].get(std::slice::from_ref(token)).copied().unwrap_or(0);
            (c, self.total_tokens)
        } else {
            let mut gram = ctx.to_vec();
            gram.push(token.clone());
            let c = self.counts[ctx.len()].get(&gram).copied().unwrap_or(0);
            (c, self.context_counts[ctx])
        };
        (num as f64 + self.alpha) / (den as f64 + self.alpha * v)
    }

    pub fn prob(&self, history: &[Token], token: &Token) -> f64 {
        let ctx = self.backoff_context(history);
        let token = if self.vocab.contains(token) { token } else { &self.unk };
        self.prob_in(&ctx, token)
    }

    /// Next-token distribution over the whole vocabulary, sorted by token.
    pub fn distribution(&self, history: &[Token]) -> Vec<(Token, f64)> {
        let ctx = self.backoff_context(history);
        self.vocab.iter().map(|t| (t.clone(), self.prob_in(&ctx, t))).collect()
    }

    /// Versioned text dump of the counts; deterministic for a given model.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(FORMAT_HEADER);
        out.push('\n');
        out.push_str(&format!("order {}\nalpha {:?}\n", self.order, self.alpha));
        for (i, table) in self.counts.iter().enumerate() {
            out.push_str(&format!("\\{}-grams {}\n", i + 1, table.len()));
            for (gram, c) in table {
                let words: Vec<&str> = gram.iter().map(Token::as_str).collect();
                out.push_str(&format!("{}\t{c}\n", words.join(" ")));
            }
        }
        out
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse { path: origin.to_string(), line, msg };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| lines.next().ok_or_else(|| perr(0, format!("unexpected end of file, expected {what}")));

        let (ln, header) = next("header")?;
        if header != FORMAT_HEADER {
            return Err(perr(ln, format!("unsupported LM format {header:?}")));
        }
        let (ln, order_line) = next("order")?;
        let order: usize = order_line
            .strip_prefix("order ")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| perr(ln, "expected `order N`".into()))?;
        let (ln, alpha_line) = next("alpha")?;
        let alpha: f64 = alpha_line
            .strip_prefix("alpha ")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| perr(ln, "expected `alpha X`".into()))?;
        check_params(order, alpha).map_err(|e| perr(ln, e.to_string()))?;

        let mut counts = Vec::with_capacity(order);
        for n in 1..=order {
            let (ln, section) = next("n-gram section")?;
            let expected = format!("\\{n}-grams ");
            let size: usize = section
                .strip_prefix(&expected)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| perr(ln, format!("expected `{expected}COUNT`")))?;
            let mut table = BTreeMap::new();
            for _ in 0..size {
                let (ln, row) = next("n-gram row")?;
                let (gram, c) = row.split_once('\t').ok_or_else(|| perr(ln, "expected `GRAM<TAB>COUNT`".into()))?;
                let gram: Vec<Token> = TokenSeq::words(gram).into_vec();
                if gram.len() != n {
                    return Err(perr(ln, format!("expected a {n}-gram")));
                }
                let c: u64 = c.parse().map_err(|_| perr(ln, format!("bad count {c:?}")))?;
                table.insert(gram, c);
            }
            counts.push(table);
        }
        if counts[0].is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(Self::from_counts(order, alpha, counts))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

fn check_params(order: usize, alpha: f64) -> Result<()> {
    if !(1..=4).contains(&order) {
        return Err(Error::InvalidConfig(format!("LM order {order} outside 1..=4")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidConfig(format!("smoothing alpha {alpha} must be positive")));
    }
    Ok(())
}
