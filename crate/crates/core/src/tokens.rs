//! Token and trace data model shared by every other module.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Reserved unknown-word symbol. Never produced by tokenizing real text
/// because corpora are not expected to contain it.
pub const UNK: &str = "⟨unk⟩";

/// A single whitespace-free, non-empty token.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Token(Arc<str>);

impl Token {
    pub fn new(text: &str) -> Result<Self, Error> {
        if text.is_empty() {
            return Err(Error::InvalidToken(text.to_string()));
        }
        if text.chars().any(char::is_whitespace) {
            return Err(Error::InvalidToken(text.to_string()));
        }
        Ok(Token(Arc::from(text)))
    }

    pub fn unk() -> Self {
        Token(Arc::from(UNK))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_unk(&self) -> bool {
        &*self.0 == UNK
    }
}

impl TryFrom<String> for Token {
    type Error = Error;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Token::new(&s)
    }
}

impl From<Token> for String {
    fn from(t: Token) -> String {
        t.0.to_string()
    }
}

impl fmt::Debug for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An ordered, possibly empty, sequence of tokens.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(Vec<Token>);

impl TokenSeq {
    pub fn new() -> Self {
        TokenSeq(Vec::new())
    }

    pub fn from_tokens(tokens: Vec<Token>) -> Self {
        TokenSeq(tokens)
    }

    /// Splits on whitespace, or into single non-space characters when
    /// `char_mode` is set.
    pub fn tokenize(text: &str, char_mode: bool) -> Self {
        let tokens = if char_mode {
            text.chars()
                .filter(|c| !c.is_whitespace())
                .map(|c| Token(Arc::from(c.to_string().as_str())))
                .collect()
        } else {
            text.split_whitespace().map(|w| Token(Arc::from(w))).collect()
        };
        TokenSeq(tokens)
    }

    /// Whitespace tokenization; convenient in tests and for literals.
    pub fn words(text: &str) -> Self {
        Self::tokenize(text, false)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Token> {
        self.0.iter()
    }

    pub fn get(&self, i: usize) -> Option<&Token> {
        self.0.get(i)
    }

    pub fn push(&mut self, t: Token) {
        self.0.push(t);
    }

    /// The first `n` tokens (all of them if `n` exceeds the length).
    pub fn prefix(&self, n: usize) -> TokenSeq {
        TokenSeq(self.0[..n.min(self.0.len())].to_vec())
    }

    /// Space-joined rendering, used as the scripted translator key.
    pub fn join(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(t.as_str());
        }
        out
    }

    pub fn into_vec(self) -> Vec<Token> {
        self.0
    }
}

impl fmt::Debug for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.join())
    }
}

impl FromIterator<Token> for TokenSeq {
    fn from_iter<I: IntoIterator<Item = Token>>(iter: I) -> Self {
        TokenSeq(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a TokenSeq {
    type Item = &'a Token;
    type IntoIter = std::slice::Iter<'a, Token>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Length of the longest common prefix of two token slices.
pub fn lcp_len(a: &[Token], b: &[Token]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

pub fn longest_common_prefix(a: &TokenSeq, b: &TokenSeq) -> TokenSeq {
    a.prefix(lcp_len(&a.0, &b.0))
}

/// True iff `a` is a (possibly empty, possibly equal) prefix of `b`.
pub fn is_prefix(a: &TokenSeq, b: &TokenSeq) -> bool {
    a.len() <= b.len() && lcp_len(&a.0, &b.0) == a.len()
}

/// One row of a parallel corpus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    pub sentence_id: usize,
    pub source: TokenSeq,
    pub reference: TokenSeq,
}

impl SentencePair {
    pub fn new(sentence_id: usize, source: TokenSeq, reference: TokenSeq) -> Result<Self, Error> {
        if source.is_empty() || reference.is_empty() {
            return Err(Error::EmptySentence { sentence_id });
        }
        Ok(SentencePair { sentence_id, source, reference })
    }
}

/// A translation of an extended source prefix, kept for offline analysis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub source: TokenSeq,
    pub translation: TokenSeq,
}

/// State of the session after the `step_index`-th source token arrived.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step_index: usize,
    pub source_prefix: TokenSeq,
    pub raw_hypothesis: TokenSeq,
    pub emitted_output: TokenSeq,
    pub mask_length: usize,
    pub is_final: bool,
    #[serde(default)]
    pub n_translate_calls: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<ProbeRecord>,
}

impl StepRecord {
    /// Number of raw-hypothesis tokens not shown, measured against the
    /// common prefix so that re-emitted (frozen) outputs are covered too.
    pub fn mask_of(raw: &TokenSeq, emitted: &TokenSeq) -> usize {
        raw.len() - lcp_len(raw.tokens(), emitted.tokens())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionTrace {
    pub sentence_id: usize,
    pub records: Vec<StepRecord>,
    pub final_output: TokenSeq,
}

impl SessionTrace {
    /// Emitted outputs in step order.
    pub fn outputs(&self) -> impl Iterator<Item = &TokenSeq> {
        self.records.iter().map(|r| &r.emitted_output)
    }

    pub fn source_len(&self) -> usize {
        self.records.last().map_or(0, |r| r.step_index)
    }

    /// Checks the structural invariants every well-formed trace satisfies.
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |why: String| Error::MalformedTrace { sentence_id: self.sentence_id, why };
        let last = self.records.last().ok_or_else(|| bad("no records".into()))?;
        let n = last.source_prefix.len();
        if self.records.len() != n {
            return Err(bad(format!("{} records for a {n}-token source", self.records.len())));
        }
        for (i, r) in self.records.iter().enumerate() {
            if r.step_index != i + 1 {
                return Err(bad(format!("record {i} has step_index {}", r.step_index)));
            }
            if r.source_prefix.len() != r.step_index {
                return Err(bad(format!("step {} has a {}-token prefix", r.step_index, r.source_prefix.len())));
            }
            if !is_prefix(&r.source_prefix, &last.source_prefix) {
                return Err(bad(format!("step {} prefix is not a prefix of the source", r.step_index)));
            }
            if r.is_final != (r.step_index == n) {
                return Err(bad(format!("step {} has is_final={}", r.step_index, r.is_final)));
            }
            if r.mask_length != StepRecord::mask_of(&r.raw_hypothesis, &r.emitted_output) {
                return Err(bad(format!("step {} mask_length {} inconsistent", r.step_index, r.mask_length)));
            }
        }
        if last.emitted_output != last.raw_hypothesis || self.final_output != last.emitted_output {
            return Err(bad("final output must be the unmasked final hypothesis".into()));
        }
        Ok(())
    }
}
