use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::NeAggregation;
use crate::strategy::StrategyConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub source: PathBuf,
    pub reference: PathBuf,
}

fn default_beam() -> usize {
    4
}
fn default_distortion() -> f64 {
    0.3
}
fn default_instability() -> f64 {
    0.5
}
fn default_eos_final() -> f64 {
    0.9
}
fn default_eos_nonfinal() -> f64 {
    0.1
}
fn default_len_ratio() -> f64 {
    1.5
}
fn default_parallelism() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TranslatorConfig {
    Toy {
        lexicon: PathBuf,
        #[serde(default = "default_beam")]
        beam_size: usize,
        #[serde(default = "default_distortion")]
        distortion: f64,
        #[serde(default = "default_instability")]
        instability: f64,
        #[serde(default = "default_eos_final")]
        eos_prob_final: f64,
        #[serde(default = "default_eos_nonfinal")]
        eos_prob_nonfinal: f64,
        #[serde(default = "default_len_ratio")]
        max_len_ratio: f64,
        /// Reduce the lexicon to its best entry per source token.
        #[serde(default)]
        one_to_one: bool,
    },
    Scripted {
        script: PathBuf,
        #[serde(default)]
        identity_fallback: bool,
    },
}

impl TranslatorConfig {
    pub fn toy(lexicon: PathBuf) -> Self {
        TranslatorConfig::Toy {
            lexicon,
            beam_size: default_beam(),
            distortion: default_distortion(),
            instability: default_instability(),
            eos_prob_final: default_eos_final(),
            eos_prob_nonfinal: default_eos_nonfinal(),
            max_len_ratio: default_len_ratio(),
            one_to_one: false,
        }
    }
}

/// Line of a TOML error. Tagged tables report unknown keys with the span of
/// the whole table, so the key's own line is looked up inside that span.
pub(crate) fn error_line(text: &str, span: std::ops::Range<usize>, message: &str) -> usize {
    let start = span.start.min(text.len());
    let line_of = |offset: usize| text[..offset].matches('\n').count() + 1;
    let key = message.strip_prefix("unknown field `").and_then(|m| m.split('`').next());
    if let Some(key) = key {
        let end = span.end.min(text.len());
        let mut offset = start;
        for l in text[start..end].split_inclusive('\n') {
            if l.trim_start().strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('=')) {
                return line_of(offset);
            }
            offset += l.len();
        }
    }
    line_of(start)
}

/// Everything a run depends on. Relative paths are resolved against the
/// directory of the file the config was loaded from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub char_mode: bool,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub ne_aggregation: NeAggregation,
    /// Language model dump used by the LM extension strategies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lm: Option<PathBuf>,
    pub corpus: CorpusConfig,
    pub translator: TranslatorConfig,
    pub strategy: StrategyConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| error_line(text, s, e.message())).unwrap_or(0);
            Error::Parse { path: origin.to_string(), line, msg: e.message().to_string() }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text, &path.display().to_string())?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus.source);
        fix(&mut self.corpus.reference);
        if let Some(lm) = &mut self.lm {
            fix(lm);
        }
        match &mut self.translator {
            TranslatorConfig::Toy { lexicon, .. } => fix(lexicon),
            TranslatorConfig::Scripted { script, .. } => fix(script),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.parallelism == 0 {
            return Err(Error::InvalidConfig("parallelism must be at least 1".into()));
        }
        self.strategy.validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    /// SHA-256 of the canonical TOML rendering, hex encoded.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::StrategyKind;

    const SAMPLE: &str = r#"
seed = 42
parallelism = 2

[corpus]
source = "test.src"
reference = "test.ref"

[translator]
kind = "toy"
lexicon = "lexicon.txt"
instability = 0.5

[strategy]
kind = "dynamic"
bias_beta = 0.0

[strategy.predictor]
strategy = "random"
k = 5
n = 3
"#;

    #[test]
    fn parses_and_resolves() {
        let mut cfg = RunConfig::from_toml(SAMPLE, "run.toml").unwrap();
        assert_eq!(cfg.strategy.kind, StrategyKind::Dynamic);
        assert_eq!(cfg.strategy.predictor.unwrap().n, 3);
        cfg.resolve_paths(Path::new("/data"));
        assert_eq!(cfg.corpus.source, PathBuf::from("/data/test.src"));
        match &cfg.translator {
            TranslatorConfig::Toy { lexicon, beam_size, .. } => {
                assert_eq!(lexicon, &PathBuf::from("/data/lexicon.txt"));
                assert_eq!(*beam_size, 4);
            }
            other => panic!("{other:?}"),
        }
        cfg.validate().unwrap();
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::from_toml(SAMPLE, "run.toml").unwrap();
        let again = RunConfig::from_toml(&cfg.to_toml(), "echo").unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.fingerprint(), again.fingerprint());
        assert_eq!(cfg.fingerprint().len(), 64);
    }

    #[test]
    fn errors_carry_a_line_number() {
        let broken = SAMPLE.replace("k = 5", "k = \"five\"");
        let err = RunConfig::from_toml(&broken, "run.toml").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 20),
            other => panic!("{other}"),
        }
        let err = RunConfig::from_toml("seed = 1\nbogus = 2\n", "run.toml").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn unknown_keys_in_tagged_tables_point_at_the_key() {
        let broken = SAMPLE.replace("instability = 0.5", "instability = 0.5\nbeam = 3");
        let want = broken.lines().position(|l| l == "beam = 3").unwrap() + 1;
        match RunConfig::from_toml(&broken, "run.toml").unwrap_err() {
            Error::Parse { line, msg, .. } => {
                assert_eq!(line, want, "{msg}");
                assert!(msg.contains("beam"));
            }
            other => panic!("{other}"),
        }
    }
}
