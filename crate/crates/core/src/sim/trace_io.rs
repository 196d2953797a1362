//! Trace JSONL: one `SessionTrace` object per line, each tagged with
//! `schema_version`.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokens::SessionTrace;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct TraceLineOut<'a> {
    schema_version: u32,
    #[serde(flatten)]
    trace: &'a SessionTrace,
}

#[derive(Deserialize)]
struct TraceLineIn {
    schema_version: u32,
    #[serde(flatten)]
    trace: SessionTrace,
}

pub fn traces_to_jsonl(traces: &[SessionTrace]) -> Result<String> {
    let mut out = String::new();
    for t in traces {
        out.push_str(&serde_json::to_string(&TraceLineOut { schema_version: TRACE_SCHEMA_VERSION, trace: t })?);
        out.push('\n');
    }
    Ok(out)
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_traces(path: &Path, traces: &[SessionTrace]) -> Result<()> {
    let text = traces_to_jsonl(traces)?;
    let tmp = path.with_extension("jsonl.tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn parse_traces(reader: impl BufRead, origin: &str) -> Result<Vec<SessionTrace>> {
    let mut traces = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let version: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { path: origin.to_string(), line: i + 1, msg: e.to_string() })?;
        let found = version.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != TRACE_SCHEMA_VERSION {
            return Err(Error::SchemaVersion { found, expected: TRACE_SCHEMA_VERSION });
        }
        let parsed: TraceLineIn = serde_json::from_value(version)
            .map_err(|e| Error::Parse { path: origin.to_string(), line: i + 1, msg: e.to_string() })?;
        debug_assert_eq!(parsed.schema_version, TRACE_SCHEMA_VERSION);
        traces.push(parsed.trace);
    }
    Ok(traces)
}

pub fn read_traces(path: &Path) -> Result<Vec<SessionTrace>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_traces(BufReader::new(f), &path.display().to_string())
}
