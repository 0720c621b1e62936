//! The app analysis query language: queries, answers and their text forms.
//!
//! Query grammar:
//!
//! ```text
//! query     := subject (inClause | fromTo) postOp* '?'
//! subject   := 'Flows' | 'Intents' | 'IntentFilters' | 'Permissions'
//! inClause  := 'IN' reference
//! fromTo    := 'FROM' reference 'TO' reference
//! reference := (part '->')* 'App' '(' string ')'
//! part      := ('Statement' | 'Method' | 'Class') '(' string ')'
//! postOp    := 'FILTER' reference | 'UNIFY' '[' query ']'
//! string    := "'" ( [^'\\] | '\\' . )* "'"
//! ```
//!
//! Parts must appear innermost first (Statement, Method, Class). Omitted parts
//! and parts written as `'*'` are wildcards.

mod answer;
mod parser;
mod printer;
pub mod xml;

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::app_model::Hash;

pub use answer::{apply_post_ops, Answer, Flow, Provenance};
pub use parser::parse_query;
pub use printer::{print_query, print_reference};
pub use xml::{deserialize_answer, serialize_answer};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AqlError {
    #[error("syntax error at {line}:{column}: expected one of [{}], found {found}", expected.join(", "))]
    Syntax {
        line: usize,
        column: usize,
        offset: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("semantic error at {line}:{column}: {message}")]
    Semantic { line: usize, column: usize, message: String },
    #[error("answer schema violation at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("no auxiliary answer for unified query `{0}`")]
    MissingAuxiliaryAnswer(String),
    #[error("flow endpoint is not fully resolved: {0}")]
    UnresolvedEndpoint(String),
}

/// Collapses runs of whitespace to one space and trims the ends.
pub fn normalize_text(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subject {
    Flows,
    Intents,
    IntentFilters,
    Permissions,
}

impl Subject {
    pub const ALL: [Subject; 4] = [Subject::Flows, Subject::Intents, Subject::IntentFilters, Subject::Permissions];

    pub fn keyword(self) -> &'static str {
        match self {
            Subject::Flows => "Flows",
            Subject::Intents => "Intents",
            Subject::IntentFilters => "IntentFilters",
            Subject::Permissions => "Permissions",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Subject> {
        Subject::ALL.into_iter().find(|subject| subject.keyword() == s)
    }
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// An app as named by queries and answers: its file path plus known digests.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AppIdentifier {
    pub file: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hashes: Vec<Hash>,
}

impl AppIdentifier {
    pub fn new(file: impl Into<String>, mut hashes: Vec<Hash>) -> Self {
        hashes.sort();
        hashes.dedup();
        AppIdentifier { file: normalize_text(&file.into()), hashes }
    }

    pub fn file(file: impl Into<String>) -> Self {
        AppIdentifier::new(file, Vec::new())
    }

    /// `self` used as a pattern: same file, and every hash it names is present in `other`.
    pub fn covers(&self, other: &AppIdentifier) -> bool {
        self.file == other.file && self.hashes.iter().all(|h| other.hashes.contains(h))
    }
}

/// Statement -> method -> class -> app location. `None` levels are wildcards.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Reference {
    pub statement: Option<String>,
    pub method: Option<String>,
    pub classname: Option<String>,
    pub app: AppIdentifier,
}

impl Reference {
    pub fn app(app: AppIdentifier) -> Self {
        Reference { statement: None, method: None, classname: None, app }
    }

    pub fn new(statement: Option<&str>, method: Option<&str>, classname: Option<&str>, app: AppIdentifier) -> Self {
        let norm = |s: Option<&str>| s.map(normalize_text).filter(|s| s != "*");
        Reference { statement: norm(statement), method: norm(method), classname: norm(classname), app }
    }

    pub fn statement_in(statement: &str, method: &str, classname: &str, app: AppIdentifier) -> Self {
        Reference::new(Some(statement), Some(method), Some(classname), app)
    }

    pub fn is_fully_resolved(&self) -> bool {
        self.statement.is_some() && self.method.is_some() && self.classname.is_some()
    }

    /// Pattern match: every non-wildcard level of `self` equals the one in `other`.
    pub fn covers(&self, other: &Reference) -> bool {
        fn level(p: &Option<String>, v: &Option<String>) -> bool {
            p.is_none() || p == v
        }
        level(&self.statement, &other.statement)
            && level(&self.method, &other.method)
            && level(&self.classname, &other.classname)
            && self.app.covers(&other.app)
    }

    fn sort_key(&self) -> (&AppIdentifier, &Option<String>, &Option<String>, &Option<String>) {
        (&self.app, &self.classname, &self.method, &self.statement)
    }
}

impl Ord for Reference {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for Reference {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QueryMode {
    In(Reference),
    FromTo { from: Reference, to: Reference },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PostOp {
    Filter(Reference),
    Unify(Box<QueryAst>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QueryAst {
    pub subject: Subject,
    pub mode: QueryMode,
    pub post_ops: Vec<PostOp>,
}

impl QueryAst {
    pub fn flows_in(app: AppIdentifier) -> Self {
        QueryAst { subject: Subject::Flows, mode: QueryMode::In(Reference::app(app)), post_ops: Vec::new() }
    }

    pub fn flows_from_to(from: Reference, to: Reference) -> Self {
        QueryAst { subject: Subject::Flows, mode: QueryMode::FromTo { from, to }, post_ops: Vec::new() }
    }

    /// References named by the query's main clause.
    pub fn references(&self) -> Vec<&Reference> {
        match &self.mode {
            QueryMode::In(r) => vec![r],
            QueryMode::FromTo { from, to } => vec![from, to],
        }
    }

    /// Distinct app files named by the main clause.
    pub fn app_files(&self) -> BTreeSet<&str> {
        self.references().into_iter().map(|r| r.app.file.as_str()).collect()
    }
}

impl fmt::Display for QueryAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_query(self))
    }
}
