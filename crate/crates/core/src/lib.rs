//! Retranslation for online spoken-language translation.
//!
//! Every partial source sentence is translated from scratch; an emission
//! strategy then decides how much of that translation to display. This
//! crate provides the strategies (plain retranslation, fixed masks,
//! dynamic masks driven by source-extension probes, an oracle mask), a
//! toy decoder with biased beam search, an n-gram extension predictor,
//! the latency / flicker / quality metrics, and a simulator that feeds
//! gold transcripts one token at a time.

pub mod corpus;
pub mod error;
pub mod metrics;
pub mod predict;
pub mod sim;
pub mod strategy;
pub mod sweep;
pub mod synthetic;
pub mod tokens;
pub mod translator;

pub use error::{Error, Result};
pub use tokens::{is_prefix, longest_common_prefix, SentencePair, SessionTrace, StepRecord, Token, TokenSeq};
