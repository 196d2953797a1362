//! The translation abstraction: a scripted lookup translator for
//! regression tests and a toy lexical beam-search decoder that supports
//! biased decoding.

pub mod hash;
mod scripted;
mod toy;

pub use scripted::{load_script, ScriptedTranslator};
pub use toy::{
    decode, load_lexicon, step_distribution, Candidate, DecoderState, Lexicon, ToyModelConfig,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokens::TokenSeq;

/// Interpolation target for biased beam search.
///
/// While a hypothesis still agrees with `previous_output`, each step's
/// probability becomes `(1 − β)·p + β·[candidate == previous_output[i]]`.
/// Past the end of `previous_output`, or once the hypothesis has taken a
/// different token, the raw model probability is used.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasSpec {
    pub previous_output: TokenSeq,
    beta: f64,
}

impl BiasSpec {
    pub fn new(previous_output: TokenSeq, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidConfig(format!("bias weight {beta} outside [0, 1]")));
        }
        Ok(BiasSpec { previous_output, beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Translation {
    pub tokens: TokenSeq,
    /// Log-probability under the decoder; 0 for scripted output.
    pub score: f64,
}

/// A translator usable by the simulator. Immutable once built, so one
/// instance can serve every worker thread.
#[derive(Clone, Debug)]
pub enum TranslatorModel {
    Scripted(ScriptedTranslator),
    Toy(ToyModelConfig),
}

impl TranslatorModel {
    /// Translates `source`. `complete` tells the model the source is a
    /// whole sentence rather than a prefix.
    pub fn translate(
        &self,
        source: &TokenSeq,
        complete: bool,
        bias: Option<&BiasSpec>,
    ) -> Result<Translation> {
        if source.is_empty() {
            return Err(Error::InvalidConfig("cannot translate an empty source".into()));
        }
        match self {
            TranslatorModel::Scripted(s) => s.translate(source),
            TranslatorModel::Toy(cfg) => decode(cfg, source, complete, bias),
        }
    }
}
