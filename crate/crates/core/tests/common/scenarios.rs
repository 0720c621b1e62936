//! Fixture scenarios shared by the bench and acceptance tests.

use std::sync::Arc;

use aql_core::app_model::{scan_candidates, AppModel};
use aql_core::bench::{
    ground_truth, identify_cases, CaseVerdict, Classification, EvaluationReport, RunSummary, SourceSinkSelection,
};
use aql_core::converters::ConverterRegistry;
use aql_core::dispatch::{load_config, parse_config, Dispatcher, RunStatus};
use aql_core::Strictness;

use super::{app, fixtures, susi};

pub fn select_all(apps: &[AppModel]) -> SourceSinkSelection {
    let list = susi();
    let mut sel = SourceSinkSelection::new();
    for app in apps {
        for c in scan_candidates(app, &list, Strictness::Exact) {
            sel.select_candidate(app, &c).unwrap();
        }
    }
    sel
}

pub fn dispatcher(config_text: Option<&str>) -> (Dispatcher, tempfile::TempDir) {
    let registry = ConverterRegistry::with_defaults();
    let mut config = match config_text {
        Some(text) => parse_config(text, &fixtures(), &registry).unwrap(),
        None => load_config(&fixtures().join("config.xml"), &registry).unwrap(),
    };
    let tmp = tempfile::tempdir().unwrap();
    config.cache_dir = tmp.path().to_path_buf();
    let d = Dispatcher::new(config, Arc::new(registry));
    for name in ["DirectLeak1", "LocationLeak1", "Aliasing1"] {
        d.add_app(app(name));
    }
    (d, tmp)
}

/// A fixed report so exports are reproducible.
pub fn sample_report() -> EvaluationReport {
    let dl = app("DirectLeak1");
    let sel = select_all(&[dl.clone()]);
    let case = ground_truth(&identify_cases(&[dl], &[]).unwrap()[0], &sel).unwrap();
    let flow = case.expected.flows().next().unwrap().clone();
    let tp = CaseVerdict {
        case_id: "DirectLeak1".into(),
        classification: Classification::TP,
        matched_flow: Some(flow),
        degraded: false,
        query: aql_core::aql::print_query(&case.generated_query),
        run: RunSummary {
            tool: "MockDroid".into(),
            exit_status: RunStatus::Success,
            wall_time_ms: 42,
            cached: false,
            detail: None,
        },
    };
    let fn_ = CaseVerdict {
        case_id: "Timeout'd".into(),
        classification: Classification::FN,
        matched_flow: None,
        degraded: true,
        query: "Flows IN App('slow.apk') ?".into(),
        run: RunSummary {
            tool: "MockDroid".into(),
            exit_status: RunStatus::Timeout,
            wall_time_ms: 1500,
            cached: false,
            detail: Some("timed out after 1.5s".into()),
        },
    };
    EvaluationReport::from_verdicts(Strictness::Exact, vec![tp, fn_])
}
