use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::Translation;
use crate::error::{Error, Result};
use crate::tokens::TokenSeq;

/// Exact-match lookup from a space-joined source prefix to a translation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScriptedTranslator {
    entries: HashMap<String, TokenSeq>,
    /// Copy the source through when a prefix has no script entry.
    pub identity_fallback: bool,
}

impl ScriptedTranslator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `source prefix<TAB>translation` lines. Blank lines are skipped.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut script = ScriptedTranslator::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let Some((src, tgt)) = line.split_once('\t') else {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    line: i + 1,
                    msg: "expected `source<TAB>translation`".into(),
                });
            };
            let key = TokenSeq::words(src).join();
            if key.is_empty() {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    line: i + 1,
                    msg: "empty source prefix".into(),
                });
            }
            if script.entries.contains_key(&key) {
                return Err(Error::DuplicatePrefix { path: origin.to_string(), line: i + 1, prefix: key });
            }
            script.entries.insert(key, TokenSeq::words(tgt));
        }
        Ok(script)
    }

    pub fn insert(&mut self, source: &str, translation: &str) {
        self.entries.insert(TokenSeq::words(source).join(), TokenSeq::words(translation));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn translate(&self, source: &TokenSeq) -> Result<Translation> {
        let key = source.join();
        match self.entries.get(&key) {
            Some(t) => Ok(Translation { tokens: t.clone(), score: 0.0 }),
            None if self.identity_fallback => Ok(Translation {
                tokens: source.clone(),
                score: 0.0,
            }),
            None => Err(Error::ScriptMiss(key)),
        }
    }
}

pub fn load_script(path: &Path) -> Result<ScriptedTranslator> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ScriptedTranslator::parse(&text, &path.display().to_string())
}
