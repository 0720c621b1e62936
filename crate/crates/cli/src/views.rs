//! JSON shapes shared by `--format json` output and the HTTP API.

use serde::Serialize;

use aql_core::app_model::AppModel;
use aql_core::aql::{print_query, print_reference, Answer};
use aql_core::bench::{BenchmarkCase, Polarity};

#[derive(Debug, Serialize)]
pub struct AppView {
    pub id: String,
    pub file: String,
    pub hashes: Vec<String>,
    pub classes: usize,
    pub statements: usize,
}

impl From<&AppModel> for AppView {
    fn from(app: &AppModel) -> Self {
        AppView {
            id: app.id.clone(),
            file: app.file.clone(),
            hashes: app.hashes.iter().map(|h| format!("{}:{}", h.algorithm, h.value)).collect(),
            classes: app.classes.len(),
            statements: app.statements().count(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct FlowView {
    pub from: String,
    pub to: String,
}

pub fn flow_views(answer: &Answer) -> Vec<FlowView> {
    answer
        .flows()
        .map(|f| FlowView { from: print_reference(&f.from), to: print_reference(&f.to) })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct CaseView {
    pub id: String,
    pub apps: Vec<String>,
    pub polarity: Polarity,
    pub active: bool,
    pub query: String,
    pub expected: Vec<FlowView>,
}

impl From<&BenchmarkCase> for CaseView {
    fn from(c: &BenchmarkCase) -> Self {
        CaseView {
            id: c.id.clone(),
            apps: c.apps.clone(),
            polarity: c.polarity,
            active: c.active,
            query: print_query(&c.generated_query),
            expected: flow_views(&c.expected),
        }
    }
}
