use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{endpoint_key, CaseVerdict};
use crate::aql::{Answer, Flow, Reference};
use crate::converters::callee_of;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Source,
    Sink,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    pub role: NodeRole,
    pub label: String,
    pub reference: Reference,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: String,
    pub to: String,
    pub expected: bool,
    pub actual: bool,
    /// This actual edge is the one that satisfied the case.
    pub matched: bool,
}

/// Expected and actual flows of one case as nodes and edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowGraph {
    pub case_id: String,
    pub classification: Option<String>,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

pub fn flow_graph(case_id: &str, expected: &Answer, actual: &Answer, verdict: Option<&CaseVerdict>) -> FlowGraph {
    let mut nodes: Vec<GraphNode> = Vec::new();
    let mut index: BTreeMap<(NodeRole, String), String> = BTreeMap::new();
    let mut node = |r: &Reference, role: NodeRole| -> String {
        let key = (role, format!("{:?}", endpoint_key(r)));
        if let Some(id) = index.get(&key) {
            return id.clone();
        }
        let id = format!("n{}", nodes.len());
        let label = r
            .statement
            .as_deref()
            .map(|s| callee_of(s).unwrap_or_else(|| s.to_string()))
            .unwrap_or_else(|| r.app.file.clone());
        nodes.push(GraphNode { id: id.clone(), role, label, reference: r.clone() });
        index.insert(key, id.clone());
        id
    };
    let mut edges: BTreeMap<(String, String), GraphEdge> = BTreeMap::new();
    let matched: Option<&Flow> = verdict.and_then(|v| v.matched_flow.as_ref());
    for (answer, is_expected) in [(expected, true), (actual, false)] {
        for flow in answer.flows() {
            let from = node(&flow.from, NodeRole::Source);
            let to = node(&flow.to, NodeRole::Sink);
            let edge = edges.entry((from.clone(), to.clone())).or_insert(GraphEdge {
                from,
                to,
                expected: false,
                actual: false,
                matched: false,
            });
            if is_expected {
                edge.expected = true;
            } else {
                edge.actual = true;
                edge.matched |= matched == Some(flow);
            }
        }
    }
    FlowGraph {
        case_id: case_id.to_string(),
        classification: verdict.map(|v| v.classification.to_string()),
        nodes,
        edges: edges.into_values().collect(),
    }
}
