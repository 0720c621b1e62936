//! Line-oriented intent/filter truth tables.
//!
//! ```text
//! # comment
//! INTENT action=VIEW categories=BROWSABLE data=http://a.com/x | FILTER actions=VIEW data=scheme:http;host:a.com | EXPECT match
//! INTENT action=SEND | FILTER actions=VIEW | EXPECT nomatch:action
//! INTENT target=app/Other | FILTER owner=app/Main | EXPECT nomatch
//! ```
//!
//! Intent keys: `action`, `categories`, `data`, `type`, `target`.
//! Filter keys: `actions`, `categories`, `data` (repeatable, `;`-separated
//! `scheme:`/`host:`/`path:`/`mime:` parts), `owner`.
//! List values are comma separated.

use thiserror::Error;

use super::{ComponentName, DataSpec, Intent, IntentAttribute, IntentFilter, MatchVerdict};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct TableError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expectation {
    Match,
    /// `None` for explicit intents, which fail without an attribute.
    NoMatch(Option<IntentAttribute>),
}

impl Expectation {
    pub fn holds_for(self, verdict: MatchVerdict) -> bool {
        match self {
            Expectation::Match => verdict.matched,
            Expectation::NoMatch(attr) => !verdict.matched && verdict.failed_attribute == attr,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TableRow {
    pub line: usize,
    pub intent: Intent,
    pub filter: IntentFilter,
    pub expect: Expectation,
}

const DEFAULT_OWNER: (&str, &str) = ("app", "Component");

pub fn parse_table(text: &str) -> Result<Vec<TableRow>, TableError> {
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |message: String| TableError { line, message };
        let sections: Vec<&str> = trimmed.split('|').map(str::trim).collect();
        let [intent_part, filter_part, expect_part] = sections[..] else {
            return Err(err("expected `INTENT ... | FILTER ... | EXPECT ...`".into()));
        };
        let intent = parse_intent(strip_keyword(intent_part, "INTENT").ok_or_else(|| err("missing INTENT".into()))?)
            .map_err(err)?;
        let filter = parse_filter(strip_keyword(filter_part, "FILTER").ok_or_else(|| err("missing FILTER".into()))?)
            .map_err(err)?;
        let expect = parse_expect(strip_keyword(expect_part, "EXPECT").ok_or_else(|| err("missing EXPECT".into()))?)
            .map_err(err)?;
        rows.push(TableRow { line, intent, filter, expect });
    }
    Ok(rows)
}

fn strip_keyword<'a>(section: &'a str, keyword: &str) -> Option<&'a str> {
    let rest = section.strip_prefix(keyword)?;
    (rest.is_empty() || rest.starts_with(char::is_whitespace)).then(|| rest.trim())
}

fn fields(text: &str) -> Result<Vec<(&str, &str)>, String> {
    text.split_whitespace()
        .map(|tok| tok.split_once('=').ok_or_else(|| format!("field `{tok}` is not key=value")))
        .collect()
}

fn list(value: &str) -> impl Iterator<Item = String> + '_ {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string)
}

fn parse_intent(text: &str) -> Result<Intent, String> {
    let mut intent = Intent::default();
    for (key, value) in fields(text)? {
        match key {
            "action" => intent.action = Some(value.to_string()),
            "categories" => intent.categories.extend(list(value)),
            "data" => intent.data_uri = Some(value.parse().map_err(|e| format!("{e}"))?),
            "type" => intent.mime_type = Some(value.to_string()),
            "target" => intent.explicit_target = Some(value.parse().map_err(|e| format!("{e}"))?),
            other => return Err(format!("unknown intent field `{other}`")),
        }
    }
    Ok(intent)
}

fn parse_filter(text: &str) -> Result<IntentFilter, String> {
    let mut filter = IntentFilter::new(ComponentName::new(DEFAULT_OWNER.0, DEFAULT_OWNER.1));
    for (key, value) in fields(text)? {
        match key {
            "actions" => filter.actions.extend(list(value)),
            "categories" => filter.categories.extend(list(value)),
            "data" => filter.data_specs.push(parse_data_spec(value)?),
            "owner" => filter.owner = value.parse().map_err(|e| format!("{e}"))?,
            other => return Err(format!("unknown filter field `{other}`")),
        }
    }
    Ok(filter)
}

fn parse_data_spec(value: &str) -> Result<DataSpec, String> {
    let mut spec = DataSpec::default();
    for part in value.split(';').filter(|p| !p.is_empty()) {
        let (key, v) = part.split_once(':').ok_or_else(|| format!("data part `{part}` is not key:value"))?;
        match key {
            "scheme" => spec.scheme = Some(v.to_string()),
            "host" => spec.authority = Some(v.to_string()),
            "path" => spec.path = Some(v.parse().map_err(|e| format!("{e}"))?),
            "mime" => spec.mime = Some(v.to_string()),
            other => return Err(format!("unknown data part `{other}`")),
        }
    }
    Ok(spec)
}

fn parse_expect(text: &str) -> Result<Expectation, String> {
    match text.split_once(':') {
        None if text == "match" => Ok(Expectation::Match),
        None if text == "nomatch" => Ok(Expectation::NoMatch(None)),
        Some(("nomatch", attr)) => Ok(Expectation::NoMatch(Some(attr.parse()?))),
        _ => Err(format!("bad expectation `{text}`")),
    }
}
