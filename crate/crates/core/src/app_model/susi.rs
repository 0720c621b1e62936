//! Source/sink catalogue in a SuSi-like line format:
//!
//! ```text
//! % comment
//! getDeviceId() -> SOURCE
//! sendTextMessage(java.lang.String,java.lang.String,java.lang.String,android.app.PendingIntent,android.app.PendingIntent) -> SINK
//! getLastKnownLocation(...) -> SOURCE
//! ```
//!
//! A parameter list of `...` matches any parameter signature.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::signature::split_params;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateKind {
    Source,
    Sink,
}

impl fmt::Display for CandidateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CandidateKind::Source => "source",
            CandidateKind::Sink => "sink",
        })
    }
}

impl FromStr for CandidateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "source" => Ok(CandidateKind::Source),
            "sink" => Ok(CandidateKind::Sink),
            other => Err(format!("unknown candidate kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ParamSpec {
    Any,
    Exact(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ListEntry {
    pub name: String,
    pub params: ParamSpec,
    pub kind: CandidateKind,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("source/sink list line {line}: {message}")]
pub struct ListParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceSinkList {
    pub entries: Vec<ListEntry>,
}

impl SourceSinkList {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn parse(text: &str) -> Result<Self, ListParseError> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('%') {
                continue;
            }
            let err = |message: &str| ListParseError { line: idx + 1, message: message.to_string() };
            let (method, kind) = line.rsplit_once("->").ok_or_else(|| err("missing `-> SOURCE|SINK`"))?;
            let kind = match kind.trim() {
                "SOURCE" => CandidateKind::Source,
                "SINK" => CandidateKind::Sink,
                _ => return Err(err("kind must be SOURCE or SINK")),
            };
            let method = method.trim();
            let open = method.find('(').ok_or_else(|| err("missing parameter list"))?;
            let inner = method[open + 1..].strip_suffix(')').ok_or_else(|| err("unclosed parameter list"))?;
            let name = method[..open].trim();
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(err("bad method name"));
            }
            let params = if inner.trim() == "..." {
                ParamSpec::Any
            } else {
                ParamSpec::Exact(split_params(inner))
            };
            entries.push(ListEntry { name: name.to_string(), params, kind });
        }
        Ok(SourceSinkList { entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_entries_and_comments() {
        let list = SourceSinkList::parse(
            "% SuSi excerpt\n\ngetDeviceId() -> SOURCE\nsendTextMessage(...) -> SINK\nlog(java.lang.String, int) -> SINK\n",
        )
        .unwrap();
        assert_eq!(list.entries.len(), 3);
        assert_eq!(list.entries[0].params, ParamSpec::Exact(vec![]));
        assert_eq!(list.entries[1].params, ParamSpec::Any);
        assert_eq!(
            list.entries[2].params,
            ParamSpec::Exact(vec!["java.lang.String".into(), "int".into()])
        );
    }

    #[test]
    fn rejects_bad_lines() {
        assert_eq!(SourceSinkList::parse("x() -> MAYBE").unwrap_err().line, 1);
        assert!(SourceSinkList::parse("% c\nx -> SINK").is_err());
        assert!(SourceSinkList::parse("x()").is_err());
    }
}
