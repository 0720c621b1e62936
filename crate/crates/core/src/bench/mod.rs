//! Benchmark refinement and evaluation.
//!
//! Cases are identified from apps, given ground truth from a source/sink
//! selection, executed through the dispatcher and classified by matching
//! expected against actual flows.

mod export;
mod graph;
mod report;
mod run;
mod selection;
mod suite;
mod triage;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::app_model::{AppModel, CandidateKind};
use crate::aql::{AppIdentifier, AqlError, Answer, Flow, QueryAst, Reference};
use crate::converters::callee_of;
use crate::dispatch::DispatchError;
use crate::Strictness;

pub use export::{export_report, import_report_json, ExportFormat};
pub use graph::{flow_graph, FlowGraph, GraphEdge, GraphNode, NodeRole};
pub use report::{evaluate, metrics, CaseVerdict, Classification, EvaluationReport, RunSummary};
pub use run::{run_benchmark, run_cases};
pub use selection::{Selected, SourceSinkSelection};
pub use suite::{read_suite, write_suite, BenchmarkSuite};
pub use triage::{triage, TriageRow};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown app id `{0}`")]
    UnknownAppId(String),
    #[error("no {0} selected")]
    EmptySelection(CandidateKind),
    #[error("statement {0} is not selected")]
    NotSelected(String),
    #[error("statement {0} does not exist")]
    UnknownStatement(String),
    #[error("a group cannot mix sources and sinks")]
    MixedGroupKinds,
    #[error("case `{0}` has no expected flow within its apps")]
    NoExpectedFlows(String),
    #[error("no answer for active case `{0}`")]
    MissingAnswer(String),
    #[error("duplicate case id `{0}`")]
    DuplicateCase(String),
    #[error("benchmark file: {0}")]
    Suite(String),
    #[error("report import: {0}")]
    Import(String),
    #[error(transparent)]
    Query(#[from] AqlError),
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
        })
    }
}

impl FromStr for Polarity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "positive" => Ok(Polarity::Positive),
            "negative" => Ok(Polarity::Negative),
            other => Err(format!("unknown polarity `{other}`")),
        }
    }
}

/// A case before ground truth is attached.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseSkeleton {
    pub id: String,
    pub apps: Vec<String>,
    pub polarity: Polarity,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkCase {
    pub id: String,
    /// App ids.
    pub apps: Vec<String>,
    /// For negative cases, the flows that must not be found.
    pub expected: Answer,
    pub polarity: Polarity,
    pub active: bool,
    pub generated_query: QueryAst,
}

/// One case per app plus one per combination. Combination ids join the app
/// ids with `+`.
pub fn identify_cases(apps: &[AppModel], combinations: &[Vec<String>]) -> Result<Vec<CaseSkeleton>, BenchError> {
    let skeleton = |id: String, apps: Vec<String>| CaseSkeleton { id, apps, polarity: Polarity::Positive, active: true };
    let mut cases: Vec<CaseSkeleton> = apps.iter().map(|a| skeleton(a.id.clone(), vec![a.id.clone()])).collect();
    for combo in combinations {
        for id in combo {
            if !apps.iter().any(|a| &a.id == id) {
                return Err(BenchError::UnknownAppId(id.clone()));
            }
        }
        cases.push(skeleton(combo.join("+"), combo.clone()));
    }
    Ok(cases)
}

/// Query whose execution answers a case: FROM/TO over the first expected
/// flow, preferring one that crosses apps so the query's scope matches the
/// case. The tool's full answer is then matched against every expected flow.
pub fn generate_query(expected: &Answer) -> Option<QueryAst> {
    let crossing = expected.flows().find(|f| f.from.app.file != f.to.app.file);
    let flow = crossing.or_else(|| expected.flows().next())?;
    // Queries name apps by file only.
    let bare = |r: &Reference| Reference { app: AppIdentifier::file(r.app.file.clone()), ..r.clone() };
    Some(QueryAst::flows_from_to(bare(&flow.from), bare(&flow.to)))
}

fn build_case(skeleton: &CaseSkeleton, expected: Answer) -> Result<BenchmarkCase, BenchError> {
    let query = generate_query(&expected).ok_or_else(|| BenchError::NoExpectedFlows(skeleton.id.clone()))?;
    Ok(BenchmarkCase {
        id: skeleton.id.clone(),
        apps: skeleton.apps.clone(),
        expected,
        polarity: skeleton.polarity,
        active: skeleton.active,
        generated_query: query,
    })
}

/// Expected flows of a case: every source group crossed with every sink group,
/// using group representatives that belong to the case's apps.
pub fn ground_truth(skeleton: &CaseSkeleton, selection: &SourceSinkSelection) -> Result<BenchmarkCase, BenchError> {
    let in_case = |kind| -> Vec<Reference> {
        selection
            .groups_of_kind(kind)
            .into_iter()
            .map(|g| selection.representative(g))
            .filter(|(stmt, _)| skeleton.apps.contains(&stmt.app))
            .map(|(_, m)| m.reference.clone())
            .collect()
    };
    let sources = in_case(CandidateKind::Source);
    let sinks = in_case(CandidateKind::Sink);
    let mut expected = Answer::new();
    for from in &sources {
        for to in &sinks {
            expected.insert(Flow::new(from.clone(), to.clone())?);
        }
    }
    build_case(skeleton, expected)
}

/// One positive case per (source group, sink group) pair, with ids
/// `pair-<i>-<j>` over the groups in canonical order.
pub fn generate_pairs(selection: &SourceSinkSelection) -> Result<Vec<BenchmarkCase>, BenchError> {
    let sources = selection.groups_of_kind(CandidateKind::Source);
    let sinks = selection.groups_of_kind(CandidateKind::Sink);
    for (kind, groups) in [(CandidateKind::Source, &sources), (CandidateKind::Sink, &sinks)] {
        if groups.is_empty() {
            return Err(BenchError::EmptySelection(kind));
        }
    }
    let mut cases = Vec::with_capacity(sources.len() * sinks.len());
    for (i, src) in sources.iter().enumerate() {
        let (src_stmt, src) = selection.representative(src);
        for (j, sink) in sinks.iter().enumerate() {
            let (sink_stmt, sink) = selection.representative(sink);
            let apps: BTreeSet<String> = [src_stmt.app.clone(), sink_stmt.app.clone()].into();
            let skeleton = CaseSkeleton {
                id: format!("pair-{i}-{j}"),
                apps: apps.into_iter().collect(),
                polarity: Polarity::Positive,
                active: true,
            };
            let expected = Answer::from_flows([Flow::new(src.reference.clone(), sink.reference.clone())?]);
            cases.push(build_case(&skeleton, expected)?);
        }
    }
    Ok(cases)
}

/// The parts of a reference that identify a statement; hashes are ignored so
/// that answers from different sources compare.
pub fn endpoint_key(r: &Reference) -> (&str, Option<&str>, Option<&str>, Option<&str>) {
    (r.app.file.as_str(), r.classname.as_deref(), r.method.as_deref(), r.statement.as_deref())
}

pub fn endpoints_match(
    expected: &Reference,
    actual: &Reference,
    selection: Option<&SourceSinkSelection>,
    strictness: Strictness,
) -> bool {
    if endpoint_key(expected) == endpoint_key(actual) {
        return true;
    }
    if let Some(sel) = selection {
        if let (Some(a), Some(b)) = (sel.group_index(expected), sel.group_index(actual)) {
            if a == b {
                return true;
            }
        }
    }
    match strictness {
        Strictness::Exact => false,
        Strictness::NameOnly => {
            let callee = |r: &Reference| r.statement.as_deref().and_then(callee_of);
            expected.app.file == actual.app.file && callee(expected).is_some() && callee(expected) == callee(actual)
        }
    }
}

pub fn flow_matches(expected: &Flow, actual: &Flow, selection: Option<&SourceSinkSelection>, strictness: Strictness) -> bool {
    endpoints_match(&expected.from, &actual.from, selection, strictness)
        && endpoints_match(&expected.to, &actual.to, selection, strictness)
}

/// First actual flow, in canonical order, that matches any expected flow.
pub fn match_flows(
    expected: &Answer,
    actual: &Answer,
    selection: Option<&SourceSinkSelection>,
    strictness: Strictness,
) -> Option<Flow> {
    actual
        .flows()
        .find(|a| expected.flows().any(|e| flow_matches(e, a, selection, strictness)))
        .cloned()
}

impl BenchmarkCase {
    /// Re-derives the query, e.g. after editing the expected flows.
    pub fn regenerate_query(&mut self) -> Result<(), BenchError> {
        self.generated_query = generate_query(&self.expected).ok_or_else(|| BenchError::NoExpectedFlows(self.id.clone()))?;
        Ok(())
    }

    /// True when every expected endpoint lies in one of the case's apps.
    pub fn endpoints_within(&self, apps: &[AppModel]) -> bool {
        let files: BTreeSet<&str> = apps
            .iter()
            .filter(|a| self.apps.contains(&a.id))
            .map(|a| a.file.as_str())
            .collect();
        self.expected
            .flows()
            .all(|f| files.contains(f.from.app.file.as_str()) && files.contains(f.to.app.file.as_str()))
    }
}
