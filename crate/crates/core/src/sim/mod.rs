//! Simulated-ASR sessions: the gold source is revealed one token at a
//! time, every prefix is retranslated, and the configured strategy decides
//! what is displayed.

pub(crate) mod config;
mod trace_io;

pub use config::{CorpusConfig, RunConfig, TranslatorConfig};
pub use trace_io::{parse_traces, read_traces, traces_to_jsonl, write_traces, TRACE_SCHEMA_VERSION};

use rayon::prelude::*;

use crate::corpus;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, Evaluation, NeAggregation};
use crate::predict::{predict_extensions, NgramLm, PredictorConfig};
use crate::strategy::{emit_dynamic, emit_mask_k, emit_none, emit_oracle, EmissionState, StrategyConfig, StrategyKind};
use crate::tokens::{ProbeRecord, SentencePair, SessionTrace, StepRecord, Token, TokenSeq};
use crate::translator::{load_lexicon, load_script, BiasSpec, ToyModelConfig, TranslatorModel};

/// Read-only resources shared by every session of a run.
#[derive(Clone, Debug)]
pub struct Models {
    pub translator: TranslatorModel,
    pub lm: Option<NgramLm>,
    /// Vocabulary for the random extension strategy.
    pub vocab: Vec<Token>,
}

impl Models {
    pub fn new(translator: TranslatorModel, lm: Option<NgramLm>, pairs: &[SentencePair]) -> Self {
        let vocab = match &lm {
            Some(lm) => lm.word_vocab(),
            None => source_vocab(pairs),
        };
        Models { translator, lm, vocab }
    }

    /// Loads the translator and LM named by `cfg`.
    pub fn load(cfg: &RunConfig, pairs: &[SentencePair]) -> Result<Self> {
        let translator = match &cfg.translator {
            TranslatorConfig::Toy {
                lexicon,
                beam_size,
                distortion,
                instability,
                eos_prob_final,
                eos_prob_nonfinal,
                max_len_ratio,
                one_to_one,
            } => {
                let mut lex = load_lexicon(lexicon)?;
                if *one_to_one {
                    lex = lex.one_to_one();
                }
                let model = ToyModelConfig {
                    lexicon: lex,
                    beam_size: *beam_size,
                    distortion: *distortion,
                    instability: *instability,
                    eos_prob_final: *eos_prob_final,
                    eos_prob_nonfinal: *eos_prob_nonfinal,
                    max_len_ratio: *max_len_ratio,
                    seed: cfg.seed,
                };
                model.validate()?;
                TranslatorModel::Toy(model)
            }
            TranslatorConfig::Scripted { script, identity_fallback } => {
                let mut s = load_script(script)?;
                s.identity_fallback = *identity_fallback;
                TranslatorModel::Scripted(s)
            }
        };
        let lm = cfg.lm.as_deref().map(NgramLm::load).transpose()?;
        Ok(Models::new(translator, lm, pairs))
    }
}

fn source_vocab(pairs: &[SentencePair]) -> Vec<Token> {
    let mut v: Vec<Token> = pairs.iter().flat_map(|p| p.source.iter().cloned()).collect();
    v.sort();
    v.dedup();
    v
}

/// The parts of a run that shape a single session.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionSettings {
    pub strategy: StrategyConfig,
    pub seed: u64,
}

impl SessionSettings {
    pub fn new(strategy: StrategyConfig, seed: u64) -> Self {
        SessionSettings { strategy, seed }
    }

    fn predictor(&self) -> Option<PredictorConfig> {
        self.strategy.predictor.map(|p| PredictorConfig { seed: self.seed, ..p }.normalized())
    }
}

/// Fails up front when the strategy's predictor needs a language model
/// that was not loaded.
pub fn check_models(strategy: &StrategyConfig, models: &Models) -> Result<()> {
    match strategy.predictor {
        Some(p) if p.strategy.needs_lm() && models.lm.is_none() => Err(Error::MissingLm(p.strategy.name())),
        _ => Ok(()),
    }
}

/// Runs one sentence through the simulated session.
pub fn run_sentence(settings: &SessionSettings, pair: &SentencePair, models: &Models) -> Result<SessionTrace> {
    let source = &pair.source;
    let n = source.len();
    let sid = pair.sentence_id;
    let at = |step_index: usize| move |e: Error| Error::Step { sentence_id: sid, step_index, source: Box::new(e) };

    let strategy = &settings.strategy;
    let predictor = settings.predictor();
    let beta = strategy.bias_beta;
    let full_translation = match strategy.kind {
        StrategyKind::Oracle => Some(models.translator.translate(source, true, None).map_err(at(n))?.tokens),
        _ => None,
    };

    let mut state = EmissionState::new(sid);
    let mut records = Vec::with_capacity(n);
    for i in 1..=n {
        let prefix = source.prefix(i);
        let is_final = i == n;
        let bias = if beta > 0.0 && strategy.kind != StrategyKind::Oracle {
            Some(BiasSpec::new(state.previous_output.clone(), beta).map_err(at(i))?)
        } else {
            None
        };
        let raw = models.translator.translate(&prefix, is_final, bias.as_ref()).map_err(at(i))?.tokens;
        let mut calls = 1;
        let mut probes = Vec::new();

        let output = match strategy.kind {
            StrategyKind::None => emit_none(&raw),
            StrategyKind::MaskK => emit_mask_k(&raw, strategy.k_mask, is_final),
            StrategyKind::Oracle => {
                emit_oracle(&raw, full_translation.as_ref().expect("computed for oracle"), &state, is_final)
            }
            StrategyKind::Dynamic => {
                if !is_final {
                    let cfg = predictor.as_ref().ok_or_else(|| {
                        at(i)(Error::InvalidConfig("dynamic masking needs a predictor".into()))
                    })?;
                    let extensions = predict_extensions(cfg, models.lm.as_ref(), &models.vocab, &prefix, sid, i)
                        .map_err(at(i))?;
                    for ext in extensions {
                        let translation =
                            models.translator.translate(&ext, false, bias.as_ref()).map_err(at(i))?.tokens;
                        calls += 1;
                        probes.push(ProbeRecord { source: ext, translation });
                    }
                }
                let probe_translations: Vec<TokenSeq> = probes.iter().map(|p| p.translation.clone()).collect();
                emit_dynamic(&raw, &probe_translations, &state, is_final).0
            }
        };

        let mask_length = StepRecord::mask_of(&raw, &output);
        state.previous_output = output.clone();
        state.step_index = i;
        records.push(StepRecord {
            step_index: i,
            source_prefix: prefix,
            raw_hypothesis: raw,
            emitted_output: output,
            mask_length,
            is_final,
            n_translate_calls: calls,
            probes,
        });
    }
    let final_output = state.previous_output;
    Ok(SessionTrace { sentence_id: sid, records, final_output })
}

/// Runs every sentence; traces come back ordered by sentence id whatever
/// the degree of parallelism.
pub fn run_sentences(
    settings: &SessionSettings,
    pairs: &[SentencePair],
    models: &Models,
    parallelism: usize,
) -> Result<Vec<SessionTrace>> {
    let mut traces: Vec<SessionTrace> = if parallelism <= 1 {
        pairs.iter().map(|p| run_sentence(settings, p, models)).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
        pool.install(|| pairs.par_iter().map(|p| run_sentence(settings, p, models)).collect::<Result<_>>())?
    };
    traces.sort_by_key(|t| t.sentence_id);
    Ok(traces)
}

/// Result of a whole-corpus run.
#[derive(Clone, Debug)]
pub struct CorpusRun {
    pub traces: Vec<SessionTrace>,
    pub evaluation: Evaluation,
}

pub fn references(pairs: &[SentencePair]) -> Vec<TokenSeq> {
    let mut refs = vec![TokenSeq::new(); pairs.iter().map(|p| p.sentence_id + 1).max().unwrap_or(0)];
    for p in pairs {
        refs[p.sentence_id] = p.reference.clone();
    }
    refs
}

pub fn run_pairs(
    settings: &SessionSettings,
    pairs: &[SentencePair],
    models: &Models,
    parallelism: usize,
    aggregation: NeAggregation,
) -> Result<CorpusRun> {
    check_models(&settings.strategy, models)?;
    let traces = run_sentences(settings, pairs, models, parallelism)?;
    let evaluation = evaluate(&settings.strategy.label(), &traces, &references(pairs), aggregation)?;
    Ok(CorpusRun { traces, evaluation })
}

/// Loads corpus and models named by `cfg` and runs the whole corpus.
pub fn run_corpus(cfg: &RunConfig) -> Result<CorpusRun> {
    cfg.validate()?;
    let pairs = corpus::load_parallel(&cfg.corpus.source, &cfg.corpus.reference, cfg.char_mode)?;
    let models = Models::load(cfg, &pairs)?;
    let settings = SessionSettings::new(cfg.strategy.clone(), cfg.seed);
    run_pairs(&settings, &pairs, &models, cfg.parallelism, cfg.ne_aggregation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{average_lag, normalized_erasure};
    use crate::predict::ExtensionStrategy;
    use crate::translator::ScriptedTranslator;

    fn seq(s: &str) -> TokenSeq {
        TokenSeq::words(s)
    }

    fn scripted(lines: &[(&str, &str)]) -> Models {
        let mut s = ScriptedTranslator::new();
        for (src, tgt) in lines {
            s.insert(src, tgt);
        }
        Models { translator: TranslatorModel::Scripted(s), lm: None, vocab: vec![] }
    }

    #[test]
    fn single_token_sentence() {
        let models = scripted(&[("a", "x y")]);
        let pair = SentencePair::new(0, seq("a"), seq("x y")).unwrap();
        let p = PredictorConfig::new(ExtensionStrategy::Unknown, 1, 1, 0).unwrap();
        let trace = run_sentence(&SessionSettings::new(StrategyConfig::dynamic(p), 0), &pair, &models).unwrap();
        assert_eq!(trace.records.len(), 1);
        let r = &trace.records[0];
        assert!(r.is_final && r.probes.is_empty());
        assert_eq!(r.n_translate_calls, 1);
        assert_eq!(trace.final_output, seq("x y"));
        assert_eq!(normalized_erasure(&trace).unwrap(), 0.0);
        trace.validate().unwrap();
    }

    #[test]
    fn unknown_probe_masks_the_disputed_suffix() {
        let models = scripted(&[("a", "p"), ("a ⟨unk⟩", "p"), ("a b", "p q r"), ("a b ⟨unk⟩", "p q s t"), ("a b c", "p q s t")]);
        let pair = SentencePair::new(0, seq("a b c"), seq("p q s t")).unwrap();
        let p = PredictorConfig::new(ExtensionStrategy::Unknown, 1, 1, 0).unwrap();
        let trace = run_sentence(&SessionSettings::new(StrategyConfig::dynamic(p), 0), &pair, &models).unwrap();
        assert_eq!(trace.records[1].emitted_output, seq("p q"));
        assert_eq!(trace.records[1].mask_length, 1);
        assert_eq!(trace.records[1].n_translate_calls, 2);
        assert_eq!(trace.records[1].probes[0].translation, seq("p q s t"));
        trace.validate().unwrap();
    }

    #[test]
    fn three_sentence_corpus_aggregates() {
        // Synchronous, full-sentence-only, and a one-token sentence.
        let models = scripted(&[
            ("a", "x"),
            ("a b", "x y"),
            ("a b c", "x y z"),
            ("d", "w"),
            ("d e", "w"),
            ("f", "v"),
        ]);
        let pairs = vec![
            SentencePair::new(0, seq("a b c"), seq("x y z")).unwrap(),
            SentencePair::new(1, seq("d e"), seq("w")).unwrap(),
            SentencePair::new(2, seq("f"), seq("v")).unwrap(),
        ];
        let run = run_pairs(
            &SessionSettings::new(StrategyConfig::mask_k(1), 0),
            &pairs,
            &models,
            1,
            NeAggregation::SentenceMean,
        )
        .unwrap();
        // Sentence 0 under mask 1: outputs [], [x], [x y z] → g = [2, 3, 3]; AL = ((2-0)+(3-1)+(3-2))/3 = 5/3.
        // Sentence 1: outputs [], [w] → g = [2]; AL = 2. Sentence 2: AL = 1.
        let expected_al = (5.0 / 3.0 + 2.0 + 1.0) / 3.0;
        assert!((run.evaluation.point.al - expected_al).abs() < 1e-12);
        assert_eq!(run.evaluation.point.ne, 0.0);
        assert_eq!(run.evaluation.point.n_sentences, 3);
        let per: Vec<f64> = run.traces.iter().map(|t| average_lag(t).unwrap()).collect();
        assert!((per[0] - 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn errors_are_annotated_with_position() {
        let models = scripted(&[("a", "x")]);
        let pair = SentencePair::new(4, seq("a b"), seq("x")).unwrap();
        let err = run_sentence(&SessionSettings::new(StrategyConfig::none(), 0), &pair, &models).unwrap_err();
        match err {
            Error::Step { sentence_id: 4, step_index: 2, source } => {
                assert!(matches!(*source, Error::ScriptMiss(_)))
            }
            other => panic!("{other}"),
        }
    }
}
