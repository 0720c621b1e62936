use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::aql::{Answer, Flow};

/// How many tools reported one flow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriageRow {
    pub flow: Flow,
    pub tools: BTreeSet<String>,
}

impl TriageRow {
    pub fn agreement(&self) -> usize {
        self.tools.len()
    }
}

/// Flows reported by at least `min_agreement` tools, most agreed first, ties
/// in canonical flow order. The result is a shortlist for manual inspection.
pub fn triage(answers: &BTreeMap<String, Answer>, min_agreement: usize) -> Vec<TriageRow> {
    let mut by_flow: BTreeMap<&Flow, BTreeSet<String>> = BTreeMap::new();
    for (tool, answer) in answers {
        for flow in answer.flows() {
            by_flow.entry(flow).or_default().insert(tool.clone());
        }
    }
    let mut rows: Vec<TriageRow> = by_flow
        .into_iter()
        .filter(|(_, tools)| tools.len() >= min_agreement)
        .map(|(flow, tools)| TriageRow { flow: flow.clone(), tools })
        .collect();
    rows.sort_by(|a, b| b.agreement().cmp(&a.agreement()).then_with(|| a.flow.cmp(&b.flow)));
    rows
}
