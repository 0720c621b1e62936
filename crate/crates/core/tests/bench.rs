mod common;

use std::collections::HashMap;

use aql_core::app_model::{scan_candidates, CandidateKind};
use aql_core::aql::{deserialize_answer, Answer};
use aql_core::bench::{
    evaluate, export_report, generate_pairs, ground_truth, identify_cases, import_report_json, match_flows, read_suite,
    run_benchmark, write_suite, BenchError, BenchmarkCase, BenchmarkSuite, Classification, ExportFormat, Polarity, RunSummary, SourceSinkSelection,
};
use aql_core::dispatch::RunStatus;
use aql_core::Strictness;
use common::matching::Instance;
use common::scenarios::{dispatcher, sample_report, select_all};
use common::{app, assert_golden, fixtures, susi};
use num_rational::Ratio;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn one() -> Ratio<u64> {
    Ratio::from_integer(1)
}

fn zero() -> Ratio<u64> {
    Ratio::from_integer(0)
}

#[test]
fn case_identification() {
    let apps = [app("DirectLeak1"), app("Aliasing1")];
    let single = identify_cases(&apps[..1], &[]).unwrap();
    assert_eq!(single.len(), 1);
    assert!(single[0].active);
    assert_eq!(single[0].polarity, Polarity::Positive);
    let combo = vec!["DirectLeak1".to_string(), "Aliasing1".to_string()];
    let cases = identify_cases(&apps, &[combo]).unwrap();
    assert_eq!(cases.len(), 3);
    assert_eq!(cases[2].id, "DirectLeak1+Aliasing1");
    let bad = identify_cases(&apps, &[vec!["Nope".to_string()]]);
    assert!(matches!(bad, Err(BenchError::UnknownAppId(id)) if id == "Nope"));
}

#[test]
fn direct_leak_end_to_end() {
    let dl = app("DirectLeak1");
    let candidates = scan_candidates(&dl, &susi(), Strictness::Exact);
    let callees: Vec<_> = candidates
        .iter()
        .map(|c| (dl.statement(&c.stmt).unwrap().callee.clone().unwrap(), c.kind))
        .collect();
    assert_eq!(
        callees,
        [("getDeviceId".to_string(), CandidateKind::Source), ("sendTextMessage".to_string(), CandidateKind::Sink)]
    );
    let sel = select_all(&[dl.clone()]);
    let skeleton = &identify_cases(&[dl], &[]).unwrap()[0];
    let case = ground_truth(skeleton, &sel).unwrap();
    assert_eq!(case.expected.len(), 1);

    let (d, _tmp) = dispatcher(None);
    let report = run_benchmark(&[case], &d, Some(&sel), Strictness::Exact).unwrap();
    assert_eq!(report.verdicts[0].classification, Classification::TP);
    assert!(report.verdicts[0].matched_flow.is_some());
    assert_eq!((report.precision, report.recall, report.f_measure), (one(), one(), one()));
}

#[test]
fn silent_tool_yields_false_negative() {
    let config = r#"<config><tools><tool name="quiet" version="1"><execute>sh tools/emit.sh none %OUT% %APP%</execute>
        <capabilities><capability subject="Flows" scope="IntraApp"/></capabilities>
        <converter id="flow-tuple"/><timeout seconds="5"/></tool></tools></config>"#;
    let (d, _tmp) = dispatcher(Some(config));
    let dl = app("DirectLeak1");
    let sel = select_all(&[dl.clone()]);
    let case = ground_truth(&identify_cases(&[dl], &[]).unwrap()[0], &sel).unwrap();
    let report = run_benchmark(&[case], &d, None, Strictness::Exact).unwrap();
    assert_eq!(report.verdicts[0].classification, Classification::FN);
    assert!(!report.verdicts[0].degraded);
    assert_eq!(report.f_measure, zero());
}

#[test]
fn crashed_tool_is_flagged_degraded() {
    let config = r#"<config><tools><tool name="crash" version="1"><execute>sh tools/fail.sh %APP%</execute>
        <capabilities><capability subject="Flows" scope="IntraApp"/></capabilities>
        <converter id="sink-xml"/><timeout seconds="5"/></tool></tools></config>"#;
    let (d, _tmp) = dispatcher(Some(config));
    let dl = app("DirectLeak1");
    let sel = select_all(&[dl.clone()]);
    let case = ground_truth(&identify_cases(&[dl], &[]).unwrap()[0], &sel).unwrap();
    let report = run_benchmark(&[case], &d, None, Strictness::Exact).unwrap();
    let v = &report.verdicts[0];
    assert_eq!(v.classification, Classification::FN);
    assert!(v.degraded);
    assert_eq!(v.run.exit_status, RunStatus::NonZeroExit);
}

#[test]
fn grouped_location_sources() {
    let loc = app("LocationLeak1");
    let mut sel = select_all(&[loc.clone()]);
    let sources: Vec<_> = sel
        .members()
        .filter(|(_, m)| m.kind == CandidateKind::Source)
        .map(|(s, _)| s.clone())
        .collect();
    assert_eq!(sources.len(), 3);
    assert_eq!(generate_pairs(&sel).unwrap().len(), 3);
    sel.group(&sources).unwrap();
    let cases = generate_pairs(&sel).unwrap();
    assert_eq!(cases.len(), 1);
    let expected_src = cases[0].expected.flows().next().unwrap().from.statement.clone().unwrap();
    assert!(expected_src.contains("getLastKnownLocation"));

    // The tool reports getLongitude, a different member of the group.
    let (d, _tmp) = dispatcher(None);
    let grouped = run_benchmark(&cases, &d, Some(&sel), Strictness::Exact).unwrap();
    assert_eq!(grouped.verdicts[0].classification, Classification::TP);
    let matched = grouped.verdicts[0].matched_flow.as_ref().unwrap();
    assert!(matched.from.statement.as_deref().unwrap().contains("getLongitude"));
    let ungrouped = run_benchmark(&cases, &d, None, Strictness::Exact).unwrap();
    assert_eq!(ungrouped.verdicts[0].classification, Classification::FN);
}

#[test]
fn pairs_are_a_product_of_groups() {
    let apps = [app("Aliasing1"), app("LocationLeak1")];
    let sel = select_all(&apps);
    let n_src = sel.groups_of_kind(CandidateKind::Source).len();
    let n_sink = sel.groups_of_kind(CandidateKind::Sink).len();
    assert_eq!((n_src, n_sink), (5, 3));
    let cases = generate_pairs(&sel).unwrap();
    assert_eq!(cases.len(), 15);
    assert_eq!(cases[0].id, "pair-0-0");
    assert_eq!(cases[14].id, "pair-4-2");
    // Cross-app pairs name both apps.
    assert!(cases.iter().any(|c| c.apps.len() == 2));

    let mut sources_only = SourceSinkSelection::new();
    for (s, m) in sel.members().filter(|(_, m)| m.kind == CandidateKind::Source) {
        sources_only.select(s.clone(), m.kind, m.reference.clone()).unwrap();
    }
    assert!(matches!(generate_pairs(&sources_only), Err(BenchError::EmptySelection(CandidateKind::Sink))));
}

/// Three negative cases and one positive case over the Aliasing app.
fn aliasing_suite() -> BenchmarkSuite {
    let sel = select_all(&[app("Aliasing1")]);
    let mut cases = generate_pairs(&sel).unwrap();
    assert_eq!(cases.len(), 4);
    for case in &mut cases {
        if case.id != "pair-0-0" {
            case.polarity = Polarity::Negative;
        }
    }
    let sidecars = [("Aliasing1".to_string(), "../apps/Aliasing1.json".to_string())].into();
    BenchmarkSuite { cases, sidecars }
}

#[test]
fn aliasing_suite_scores_zero() {
    let suite = aliasing_suite();
    assert_golden("suites/aliasing.xml", &write_suite(&suite));
    let answers: HashMap<String, (Answer, RunSummary)> =
        suite.cases.iter().map(|c| (c.id.clone(), (Answer::new(), RunSummary::external()))).collect();
    let report = evaluate(&suite.cases, &answers, None, Strictness::Exact).unwrap();
    assert_eq!((report.tp, report.fp, report.tn, report.fn_), (0, 0, 3, 1));
    assert_eq!((report.precision, report.recall, report.f_measure), (zero(), zero(), zero()));

    // The same verdicts through the tool and through the stored answers.
    let (d, _tmp) = dispatcher(None);
    let run = run_benchmark(&suite.cases, &d, None, Strictness::Exact).unwrap();
    assert_eq!((run.tp, run.fp, run.tn, run.fn_), (0, 0, 3, 1));
    for case in &suite.cases {
        let path = fixtures().join(format!("suites/aliasing-answers/{}.xml", case.id));
        let stored = deserialize_answer(&std::fs::read(path).unwrap()).unwrap();
        assert!(stored.is_empty());
    }
}

#[test]
fn suite_file_round_trips() {
    let suite = aliasing_suite();
    let bytes = write_suite(&suite);
    let back = read_suite(&bytes).unwrap();
    assert_eq!(back, suite);
    assert_eq!(write_suite(&back), bytes);
    let dup = String::from_utf8(bytes).unwrap().replace("pair-0-1", "pair-0-0");
    assert!(matches!(read_suite(dup.as_bytes()), Err(BenchError::DuplicateCase(_))));
}

#[test]
fn missing_answer_is_an_error() {
    let suite = aliasing_suite();
    let err = evaluate(&suite.cases, &HashMap::new(), None, Strictness::Exact).unwrap_err();
    assert!(matches!(err, BenchError::MissingAnswer(id) if id == "pair-0-0"));
    let mut inactive = suite.cases.clone();
    for c in &mut inactive {
        c.active = false;
    }
    let report = evaluate(&inactive, &HashMap::new(), None, Strictness::Exact).unwrap();
    assert!(report.verdicts.is_empty());
}

#[test]
fn rerun_launches_only_new_cases() {
    let (d, _tmp) = dispatcher(None);
    let mut cases: Vec<BenchmarkCase> = Vec::new();
    for name in ["DirectLeak1", "LocationLeak1"] {
        let a = app(name);
        let sel = select_all(&[a.clone()]);
        cases.push(ground_truth(&identify_cases(&[a], &[]).unwrap()[0], &sel).unwrap());
    }
    run_benchmark(&cases[..1], &d, None, Strictness::Exact).unwrap();
    assert_eq!(d.launches(), 1);
    let report = run_benchmark(&cases, &d, None, Strictness::Exact).unwrap();
    assert_eq!(d.launches(), 2);
    assert_eq!(report.verdicts.len(), 2);
    assert!(report.verdict("DirectLeak1").unwrap().run.cached);
}

#[test]
fn exports_match_golden_files() {
    let report = sample_report();
    assert_eq!((report.tp, report.fn_), (1, 1));
    assert_eq!(report.f_measure, Ratio::new(2, 3));
    let json = export_report(&report, ExportFormat::Json);
    assert_golden("golden/report.json", &json);
    assert_golden("golden/report.csv", &export_report(&report, ExportFormat::Csv));
    let sql = export_report(&report, ExportFormat::Sql);
    assert_golden("golden/report.sql", &sql);
    assert_eq!(String::from_utf8(sql).unwrap().matches("INSERT INTO verdicts").count(), 2);
    let back = import_report_json(&json).unwrap();
    assert_eq!(back, report);
    assert_eq!((back.tp, back.fp, back.tn, back.fn_), (1, 0, 0, 1));
}

#[test]
fn tampered_import_is_rejected() {
    let json = String::from_utf8(export_report(&sample_report(), ExportFormat::Json)).unwrap();
    let tampered = json.replacen("\"tp\": 1", "\"tp\": 2", 1);
    assert!(import_report_json(tampered.as_bytes()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matching_equals_brute_force(seed in any::<u64>()) {
        let inst = Instance::random(&mut StdRng::seed_from_u64(seed));
        let sel = inst.selection();
        let expected = Instance::answer(&inst.expected);
        let actual = Instance::answer(&inst.actual);
        for strictness in [Strictness::Exact, Strictness::NameOnly] {
            prop_assert_eq!(match_flows(&expected, &actual, Some(&sel), strictness), inst.oracle(strictness));
        }
    }

    #[test]
    fn coarser_groups_never_lose_matches(seed in any::<u64>(), keep in 0usize..4, merge in 0usize..4) {
        let inst = Instance::random(&mut StdRng::seed_from_u64(seed));
        let coarse = inst.coarsened(keep, merge);
        let expected = Instance::answer(&inst.expected);
        let actual = Instance::answer(&inst.actual);
        for strictness in [Strictness::Exact, Strictness::NameOnly] {
            let fine = match_flows(&expected, &actual, Some(&inst.selection()), strictness);
            let coarse = match_flows(&expected, &actual, Some(&coarse.selection()), strictness);
            prop_assert!(fine.is_none() || coarse.is_some());
        }
    }

    #[test]
    fn name_only_dominates_exact(seed in any::<u64>()) {
        let inst = Instance::random(&mut StdRng::seed_from_u64(seed));
        let sel = inst.selection();
        let expected = Instance::answer(&inst.expected);
        let actual = Instance::answer(&inst.actual);
        let exact = match_flows(&expected, &actual, Some(&sel), Strictness::Exact);
        let loose = match_flows(&expected, &actual, Some(&sel), Strictness::NameOnly);
        prop_assert!(exact.is_none() || loose.is_some());
    }
}
