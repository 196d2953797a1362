//! Parallel corpus files: one sentence per line, source and reference in
//! two files with equal line counts.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tokens::{SentencePair, TokenSeq};

pub fn read_lines(path: &Path, char_mode: bool) -> Result<Vec<TokenSeq>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(|l| TokenSeq::tokenize(l, char_mode)).collect())
}

pub fn load_parallel(source: &Path, reference: &Path, char_mode: bool) -> Result<Vec<SentencePair>> {
    let src = read_lines(source, char_mode)?;
    let reference_lines = read_lines(reference, char_mode)?;
    parallel(src, reference_lines)
}

pub fn parallel(source: Vec<TokenSeq>, reference: Vec<TokenSeq>) -> Result<Vec<SentencePair>> {
    if source.len() != reference.len() {
        return Err(Error::CorpusLengthMismatch { sources: source.len(), references: reference.len() });
    }
    if source.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    source
        .into_iter()
        .zip(reference)
        .enumerate()
        .map(|(id, (s, r))| SentencePair::new(id, s, r))
        .collect()
}

pub fn write_lines(path: &Path, lines: &[TokenSeq]) -> Result<()> {
    let mut text = String::new();
    for l in lines {
        text.push_str(&l.join());
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
