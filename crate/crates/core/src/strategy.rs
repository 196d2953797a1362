//! Emission policies: what to display given the current hypothesis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predict::PredictorConfig;
use crate::tokens::{is_prefix, longest_common_prefix, StepRecord, TokenSeq};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    None,
    MaskK,
    Dynamic,
    Oracle,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::None => "none",
            StrategyKind::MaskK => "mask_k",
            StrategyKind::Dynamic => "dynamic",
            StrategyKind::Oracle => "oracle",
        }
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [StrategyKind::None, StrategyKind::MaskK, StrategyKind::Dynamic, StrategyKind::Oracle]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown strategy {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    #[serde(default)]
    pub k_mask: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictor: Option<PredictorConfig>,
    #[serde(default)]
    pub bias_beta: f64,
}

impl StrategyConfig {
    pub fn none() -> Self {
        StrategyConfig { kind: StrategyKind::None, k_mask: 0, predictor: None, bias_beta: 0.0 }
    }

    pub fn mask_k(k: usize) -> Self {
        StrategyConfig { kind: StrategyKind::MaskK, k_mask: k, ..Self::none() }
    }

    pub fn dynamic(predictor: PredictorConfig) -> Self {
        StrategyConfig { kind: StrategyKind::Dynamic, predictor: Some(predictor), ..Self::none() }
    }

    pub fn oracle() -> Self {
        StrategyConfig { kind: StrategyKind::Oracle, ..Self::none() }
    }

    pub fn with_bias(mut self, beta: f64) -> Self {
        self.bias_beta = beta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.bias_beta) {
            return Err(Error::InvalidConfig(format!("bias_beta {} outside [0, 1]", self.bias_beta)));
        }
        match (self.kind, &self.predictor) {
            (StrategyKind::Dynamic, None) => {
                Err(Error::InvalidConfig("dynamic masking needs a predictor".into()))
            }
            (StrategyKind::Dynamic, Some(p)) => p.validate(),
            _ => Ok(()),
        }
    }

    /// Short human-readable identifier, e.g. `mask_k:k=3,beta=0.2`.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        match self.kind {
            StrategyKind::MaskK => parts.push(format!("k={}", self.k_mask)),
            StrategyKind::Dynamic => {
                if let Some(p) = &self.predictor {
                    parts.push(p.strategy.name().to_string());
                    parts.push(format!("k={}", p.k));
                    parts.push(format!("n={}", p.effective_n()));
                }
            }
            _ => {}
        }
        if self.bias_beta > 0.0 && self.kind != StrategyKind::Oracle {
            parts.push(format!("beta={}", self.bias_beta));
        }
        if parts.is_empty() {
            self.kind.name().to_string()
        } else {
            format!("{}:{}", self.kind.name(), parts.join(","))
        }
    }
}

/// Per-sentence emission state.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmissionState {
    pub previous_output: TokenSeq,
    pub sentence_id: usize,
    pub step_index: usize,
}

impl EmissionState {
    pub fn new(sentence_id: usize) -> Self {
        EmissionState { sentence_id, ..Self::default() }
    }
}

/// Plain retranslation.
pub fn emit_none(hypothesis: &TokenSeq) -> TokenSeq {
    hypothesis.clone()
}

/// Withholds the last `k` tokens unless the sentence is complete.
pub fn emit_mask_k(hypothesis: &TokenSeq, k: usize, is_final: bool) -> TokenSeq {
    if is_final {
        return hypothesis.clone();
    }
    hypothesis.prefix(hypothesis.len().saturating_sub(k))
}

/// Dynamic masking with the freeze rule.
///
/// Masks `hypothesis` back to its longest common prefix with every probe
/// translation. If that prefix is already contained in the previous
/// output, the previous output is shown again instead. Returns the output
/// and its mask length.
pub fn emit_dynamic(
    hypothesis: &TokenSeq,
    probe_translations: &[TokenSeq],
    state: &EmissionState,
    is_final: bool,
) -> (TokenSeq, usize) {
    if is_final {
        return (hypothesis.clone(), 0);
    }
    let agreed = probe_translations
        .iter()
        .fold(hypothesis.clone(), |acc, probe| longest_common_prefix(&acc, probe));
    let output = if is_prefix(&agreed, &state.previous_output) {
        state.previous_output.clone()
    } else {
        agreed
    };
    let mask = StepRecord::mask_of(hypothesis, &output);
    (output, mask)
}

/// Masks back to agreement with the eventual full-sentence translation.
///
/// Every output is a prefix of the full-sentence translation. A later
/// hypothesis can agree with it on fewer tokens than an earlier one did, so
/// the previous output is kept whenever it is the longer of the two.
pub fn emit_oracle(
    hypothesis: &TokenSeq,
    full_sentence_translation: &TokenSeq,
    state: &EmissionState,
    is_final: bool,
) -> TokenSeq {
    if is_final {
        return full_sentence_translation.clone();
    }
    let agreed = longest_common_prefix(hypothesis, full_sentence_translation);
    if agreed.len() < state.previous_output.len() && is_prefix(&state.previous_output, full_sentence_translation) {
        state.previous_output.clone()
    } else {
        agreed
    }
}
