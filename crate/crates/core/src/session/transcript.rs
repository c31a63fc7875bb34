//! Append-only session record, one canonical JSON object per line.
//!
//! Keys are sorted and every float is written with six decimals so that two
//! runs over the same inputs produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    SessionStart,
    UserQuery,
    GuideResponse,
    Action,
    Event,
    PersonaChanged,
    Error,
    SessionEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub t: f64,
    pub kind: EntryKind,
    pub payload: Value,
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("transcript line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl TranscriptEntry {
    pub fn new(t: f64, kind: EntryKind, payload: Value) -> Self {
        Self { t, kind, payload }
    }

    pub fn to_line(&self) -> String {
        let value = serde_json::to_value(self).expect("transcript entries are plain JSON");
        canonical_json(&value)
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

/// Sorted keys, no whitespace, floats as `{:.6}` with negative zero folded.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Null | Value::Bool(_) | Value::String(_) => {
            out.push_str(&value.to_string());
        }
        Value::Number(n) => match (n.as_i64(), n.as_u64(), n.as_f64()) {
            (Some(i), _, _) if !n.is_f64() => {
                let _ = write!(out, "{i}");
            }
            (_, Some(u), _) if !n.is_f64() => {
                let _ = write!(out, "{u}");
            }
            (_, _, Some(f)) => {
                let s = format!("{f:.6}");
                out.push_str(if s == "-0.000000" { "0.000000" } else { &s });
            }
            _ => out.push_str(&n.to_string()),
        },
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(&map[k], out);
            }
            out.push('}');
        }
    }
}

pub fn render_transcript(entries: &[TranscriptEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&e.to_line());
        out.push('\n');
    }
    out
}

/// Writes the whole transcript and syncs it, so readers never see a partial last line.
pub fn write_transcript(path: &Path, entries: &[TranscriptEntry]) -> io::Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(render_transcript(entries).as_bytes())?;
    file.sync_all()
}

pub fn parse_transcript(text: &str) -> Result<Vec<TranscriptEntry>, TranscriptError> {
    if !text.is_empty() && !text.ends_with('\n') {
        return Err(TranscriptError::Parse { line: text.lines().count(), message: "truncated final line".into() });
    }
    text.lines()
        .enumerate()
        .map(|(i, l)| {
            TranscriptEntry::from_line(l).map_err(|e| TranscriptError::Parse { line: i + 1, message: e.to_string() })
        })
        .collect()
}

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptEntry>, TranscriptError> {
    parse_transcript(&fs::read_to_string(path)?)
}
