use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid token {0:?}: tokens are non-empty and contain no whitespace")]
    InvalidToken(String),
    #[error("sentence {sentence_id}: source and reference must be non-empty")]
    EmptySentence { sentence_id: usize },
    #[error("source token {0:?} has no lexicon entry")]
    UnknownSourceToken(String),
    #[error("no scripted translation for {0:?}")]
    ScriptMiss(String),
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("{path}:{line}: duplicate script prefix {prefix:?}")]
    DuplicatePrefix { path: String, line: usize, prefix: String },
    #[error("lexicon entry for {source_token:?} sums to {total}, expected 1")]
    NonNormalizedLexicon { source_token: String, total: f64 },
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot train a language model on an empty corpus")]
    EmptyCorpus,
    #[error("predictor strategy {0} needs a language model")]
    MissingLm(&'static str),
    #[error("trace has no records")]
    EmptyTrace,
    #[error("sentence {sentence_id}: erasure {erased} with an empty final output")]
    FlickerOnEmptyFinal { sentence_id: usize, erased: usize },
    #[error("{hypotheses} hypotheses but {references} references")]
    LengthMismatch { hypotheses: usize, references: usize },
    #[error("source corpus has {sources} lines but reference corpus has {references}")]
    CorpusLengthMismatch { sources: usize, references: usize },
    #[error("sentence {sentence_id}: malformed trace: {why}")]
    MalformedTrace { sentence_id: usize, why: String },
    #[error("trace schema version {found} is not supported (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("sentence {sentence_id}, step {step_index}: {source}")]
    Step {
        sentence_id: usize,
        step_index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

}
