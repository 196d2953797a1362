//! Latency (Average Lag), flicker (Normalized Erasure) and quality (BLEU).

mod bleu;

pub use bleu::{corpus_bleu, BleuStats};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokens::{lcp_len, SessionTrace, TokenSeq};

/// Average Lag of one session.
///
/// `g(t)` is the first step whose displayed output had at least `t`
/// tokens, even if the output later shrank; rewriting is charged to
/// erasure, not latency. `τ` is the output length once the whole source
/// has been read. A session whose final output is empty has AL 0.
pub fn average_lag(trace: &SessionTrace) -> Result<f64> {
    let last = trace.records.last().ok_or(Error::EmptyTrace)?;
    let source_len = last.step_index as f64;
    let tau = last.emitted_output.len();
    let target_len = trace.final_output.len() as f64;
    if tau == 0 || target_len == 0.0 {
        return Ok(0.0);
    }
    let mut first_reached = vec![0usize; tau + 1];
    let mut longest = 0;
    for r in &trace.records {
        let len = r.emitted_output.len().min(tau);
        while longest < len {
            longest += 1;
            first_reached[longest] = r.step_index;
        }
    }
    let mut sum = 0.0;
    for (t, g) in first_reached.iter().enumerate().skip(1) {
        sum += *g as f64 - (t - 1) as f64 * source_len / target_len;
    }
    Ok(sum / tau as f64)
}

/// Tokens erased between consecutive displayed outputs.
pub fn erased_tokens(trace: &SessionTrace) -> usize {
    trace
        .records
        .windows(2)
        .map(|w| {
            let (prev, next) = (&w[0].emitted_output, &w[1].emitted_output);
            prev.len() - lcp_len(prev.tokens(), next.tokens())
        })
        .sum()
}

/// Erased tokens over the session divided by the final output length.
pub fn normalized_erasure(trace: &SessionTrace) -> Result<f64> {
    if trace.records.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let erased = erased_tokens(trace);
    let final_len = trace.final_output.len();
    if final_len == 0 {
        if erased == 0 {
            return Ok(0.0);
        }
        return Err(Error::FlickerOnEmptyFinal { sentence_id: trace.sentence_id, erased });
    }
    Ok(erased as f64 / final_len as f64)
}

/// How per-sentence erasure is combined over a corpus.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeAggregation {
    /// Mean of per-sentence NE.
    #[default]
    SentenceMean,
    /// Total erased tokens over total final-output tokens.
    CorpusRatio,
}

/// One row of a latency / flicker / quality comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    #[serde(rename = "strategy")]
    pub strategy_label: String,
    #[serde(rename = "AL")]
    pub al: f64,
    #[serde(rename = "NE")]
    pub ne: f64,
    #[serde(rename = "BLEU")]
    pub bleu: f64,
    pub n_sentences: usize,
}

/// Corpus-level metrics plus sentences that needed special handling.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub point: TradeoffPoint,
    /// Sentences whose final output is empty (AL defined as 0).
    pub empty_final: Vec<usize>,
}

/// Aggregates traces (any order) against references indexed by sentence id.
pub fn evaluate(
    label: &str,
    traces: &[SessionTrace],
    references: &[TokenSeq],
    aggregation: NeAggregation,
) -> Result<Evaluation> {
    if traces.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut ordered: Vec<&SessionTrace> = traces.iter().collect();
    ordered.sort_by_key(|t| t.sentence_id);

    let mut al_sum = 0.0;
    let mut ne_sum = 0.0;
    let mut erased_total = 0usize;
    let mut final_total = 0usize;
    let mut empty_final = Vec::new();
    let mut hyps = Vec::with_capacity(ordered.len());
    let mut refs = Vec::with_capacity(ordered.len());
    for trace in &ordered {
        al_sum += average_lag(trace)?;
        ne_sum += normalized_erasure(trace)?;
        erased_total += erased_tokens(trace);
        final_total += trace.final_output.len();
        if trace.final_output.is_empty() {
            empty_final.push(trace.sentence_id);
        }
        let reference = references.get(trace.sentence_id).ok_or(Error::LengthMismatch {
            hypotheses: traces.len(),
            references: references.len(),
        })?;
        hyps.push(trace.final_output.clone());
        refs.push(reference.clone());
    }
    let n = ordered.len() as f64;
    let ne = match aggregation {
        NeAggregation::SentenceMean => ne_sum / n,
        NeAggregation::CorpusRatio if final_total == 0 => 0.0,
        NeAggregation::CorpusRatio => erased_total as f64 / final_total as f64,
    };
    Ok(Evaluation {
        point: TradeoffPoint {
            strategy_label: label.to_string(),
            al: al_sum / n,
            ne,
            bleu: corpus_bleu(&hyps, &refs)?,
            n_sentences: ordered.len(),
        },
        empty_final,
    })
}

/// Count of each mask length over all non-final steps.
pub fn mask_histogram<'a>(traces: impl IntoIterator<Item = &'a SessionTrace>) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for trace in traces {
        for r in trace.records.iter().filter(|r| !r.is_final) {
            *hist.entry(r.mask_length).or_insert(0) += 1;
        }
    }
    hist
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistogramSummary {
    pub count: usize,
    pub mean: f64,
    /// Lower median for even counts.
    pub median: usize,
    /// Fraction of steps whose mask is at most 2.
    pub share_at_most_2: f64,
}

pub fn summarize_histogram(hist: &BTreeMap<usize, usize>) -> Option<HistogramSummary> {
    let count: usize = hist.values().sum();
    if count == 0 {
        return None;
    }
    let mean = hist.iter().map(|(m, c)| (*m * *c) as f64).sum::<f64>() / count as f64;
    let mut seen = 0;
    let mut median = 0;
    for (m, c) in hist {
        seen += c;
        if 2 * seen >= count {
            median = *m;
            break;
        }
    }
    let small: usize = hist.range(..=2).map(|(_, c)| c).sum();
    Some(HistogramSummary { count, mean, median, share_at_most_2: small as f64 / count as f64 })
}
