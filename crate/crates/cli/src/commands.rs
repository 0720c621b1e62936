use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use aql_core::app_model::{
    combine_apps, ingest_app, ingest_app_bytes, scan_candidates, AppModel, IngestOptions, SidecarFormat,
    SourceSinkList,
};
use aql_core::aql::{deserialize_answer, parse_query, print_query, print_reference, serialize_answer};
use aql_core::bench::{
    evaluate, export_report, generate_pairs, ground_truth, identify_cases, import_report_json, read_suite,
    run_benchmark, triage, write_suite, BenchError, BenchmarkCase, BenchmarkSuite, EvaluationReport, ExportFormat,
    RunSummary, SourceSinkSelection,
};
use aql_core::converters::ConverterRegistry;
use aql_core::dispatch::{default_config_path, load_config, Dispatcher};
use aql_core::session::{candidate_id, Mutation, Session};

use crate::views::{AppView, CaseView};
use crate::{AppCmd, BenchCmd, Cli, Command, Global, OutputFormat, QueryCmd, SessionCmd, SuiteInput};

pub(crate) fn dispatch(cli: Cli) -> Result<()> {
    let g = cli.global;
    match cli.command {
        Command::Query(cmd) => query(&g, cmd),
        Command::App(cmd) => app(&g, cmd),
        Command::Bench(cmd) => bench(&g, cmd),
        Command::Session { dir, op } => session(&g, &dir, op),
        Command::Serve { port, session } => crate::server::serve_blocking(port, &session, &g),
    }
}

fn json_out<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// Writes bytes to a file, or to stdout without a path.
fn write_out(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

pub(crate) fn dispatcher(g: &Global) -> Result<Dispatcher> {
    let registry = ConverterRegistry::with_defaults();
    let path = g.config.clone().unwrap_or_else(default_config_path);
    let mut config = load_config(&path, &registry).with_context(|| format!("loading {}", path.display()))?;
    if let Some(slack) = g.timeout_slack {
        config.timeout_slack = Duration::try_from_secs_f64(slack).map_err(|e| anyhow!("--timeout-slack: {e}"))?;
    }
    Ok(Dispatcher::new(config, Arc::new(registry)))
}

fn load_app(path: &Path) -> Result<AppModel> {
    ingest_app(path, &IngestOptions::default()).with_context(|| format!("ingesting {}", path.display()))
}

fn load_list(path: &Path) -> Result<SourceSinkList> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    SourceSinkList::parse(&text).map_err(|e| anyhow!("{}:{}: {}", path.display(), e.line, e.message))
}

fn decimal(n: u64, d: u64) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

fn print_report(g: &Global, report: &EvaluationReport) -> Result<()> {
    if g.format == OutputFormat::Json {
        return json_out(report);
    }
    for v in &report.verdicts {
        let flag = if v.degraded { format!(" ({})", v.run.exit_status) } else { String::new() };
        println!("{:<4}{}{}", v.classification.to_string(), v.case_id, flag);
    }
    println!(
        "tp={} fp={} tn={} fn={}  P={:.3} R={:.3} F={:.3}",
        report.tp,
        report.fp,
        report.tn,
        report.fn_,
        decimal(*report.precision.numer(), *report.precision.denom()),
        decimal(*report.recall.numer(), *report.recall.denom()),
        decimal(*report.f_measure.numer(), *report.f_measure.denom()),
    );
    Ok(())
}

fn query(g: &Global, cmd: QueryCmd) -> Result<()> {
    match cmd {
        QueryCmd::Parse { query } => {
            let ast = parse_query(&query)?;
            if g.format == OutputFormat::Json {
                #[derive(Serialize)]
                struct Parsed<'a> {
                    query: String,
                    ast: &'a aql_core::aql::QueryAst,
                }
                return json_out(&Parsed { query: print_query(&ast), ast: &ast });
            }
            println!("{}", print_query(&ast));
            println!("{ast:#?}");
            Ok(())
        }
        QueryCmd::Run { query, apps } => {
            let ast = parse_query(&query)?;
            let d = dispatcher(g)?;
            for path in &apps {
                d.add_app(load_app(path)?);
            }
            let (answer, run) = d.execute(&ast)?;
            if g.format == OutputFormat::Json {
                #[derive(Serialize)]
                struct Ran {
                    run: RunSummary,
                    answer: String,
                }
                let answer = String::from_utf8(serialize_answer(&answer))?;
                json_out(&Ran { run: RunSummary::from(&run), answer })?;
            } else {
                std::io::stdout().write_all(&serialize_answer(&answer))?;
            }
            if !run.exit_status.is_success() {
                bail!("{} ended with {}: {}", run.tool, run.exit_status, run.detail.unwrap_or_default());
            }
            Ok(())
        }
    }
}

fn app(g: &Global, cmd: AppCmd) -> Result<()> {
    match cmd {
        AppCmd::Ingest { sidecar, strict, out } => {
            let opts = IngestOptions { strict, ..IngestOptions::default() };
            let model = ingest_app(&sidecar, &opts).with_context(|| format!("ingesting {}", sidecar.display()))?;
            if let Some(out) = out {
                let doc = aql_core::app_model::SidecarDoc::from_model(&model);
                fs::write(&out, doc.to_json()).with_context(|| format!("writing {}", out.display()))?;
            }
            let view = AppView::from(&model);
            if g.format == OutputFormat::Json {
                return json_out(&view);
            }
            println!("{} ({})", view.id, view.file);
            for h in &view.hashes {
                println!("  {h}");
            }
            println!("  {} classes, {} statements", view.classes, view.statements);
            Ok(())
        }
        AppCmd::Scan { sidecars, list } => {
            let list = load_list(&list)?;
            #[derive(Serialize)]
            struct Row {
                id: String,
                kind: String,
                stmt: String,
                statement: String,
            }
            let mut rows = Vec::new();
            for path in &sidecars {
                let model = load_app(path)?;
                for c in scan_candidates(&model, &list, g.strictness) {
                    let text = model.statement(&c.stmt).map(|s| s.text.clone()).unwrap_or_default();
                    rows.push(Row { id: candidate_id(&c), kind: c.kind.to_string(), stmt: c.stmt.to_string(), statement: text });
                }
            }
            if g.format == OutputFormat::Json {
                return json_out(&rows);
            }
            for r in rows {
                println!("{}  {:<6} {}  {}", r.id, r.kind, r.stmt, r.statement);
            }
            Ok(())
        }
        AppCmd::Combine { sidecars, id, file, out } => {
            let apps = sidecars.iter().map(|p| load_app(p)).collect::<Result<Vec<_>>>()?;
            let doc = combine_apps(&apps, &id, &file)?;
            fs::write(&out, doc.to_json()).with_context(|| format!("writing {}", out.display()))?;
            Ok(())
        }
    }
}

/// Path of `path` as seen from `base`, when `path` lies below it.
fn relative_to(path: &Path, base: &Path) -> String {
    let abs = fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
    let base = fs::canonicalize(base).unwrap_or_else(|_| base.to_path_buf());
    abs.strip_prefix(&base).unwrap_or(&abs).to_string_lossy().into_owned()
}

fn split_combination(spec: &str) -> Vec<String> {
    spec.split('+').map(str::to_string).collect()
}

fn build_suite(g: &Global, input: &SuiteInput, make: impl FnOnce(&[AppModel], &SourceSinkSelection) -> Result<Vec<BenchmarkCase>>) -> Result<()> {
    let list = load_list(&input.list)?;
    let apps = input.sidecars.iter().map(|p| load_app(p)).collect::<Result<Vec<_>>>()?;
    let mut selection = SourceSinkSelection::new();
    for app in &apps {
        for c in scan_candidates(app, &list, g.strictness) {
            match selection.select_candidate(app, &c) {
                Ok(_) | Err(BenchError::MixedGroupKinds) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
    let mut cases = make(&apps, &selection)?;
    for id in &input.negative {
        let case = cases.iter_mut().find(|c| &c.id == id).ok_or_else(|| anyhow!("unknown case `{id}`"))?;
        case.polarity = aql_core::bench::Polarity::Negative;
    }
    let base = input.out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let sidecars = apps
        .iter()
        .zip(&input.sidecars)
        .map(|(app, path)| (app.id.clone(), relative_to(path, base)))
        .collect();
    let suite = BenchmarkSuite { cases, sidecars };
    fs::write(&input.out, write_suite(&suite)).with_context(|| format!("writing {}", input.out.display()))?;
    if g.format == OutputFormat::Json {
        return json_out(&suite.cases.iter().map(CaseView::from).collect::<Vec<_>>());
    }
    println!("{} cases written to {}", suite.cases.len(), input.out.display());
    Ok(())
}

/// Reads a suite and the apps its sidecars describe.
fn load_suite(path: &Path) -> Result<(BenchmarkSuite, Vec<AppModel>)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let suite = read_suite(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let apps = suite.sidecars.values().map(|rel| load_app(&base.join(rel))).collect::<Result<Vec<_>>>()?;
    Ok((suite, apps))
}

fn bench(g: &Global, cmd: BenchCmd) -> Result<()> {
    match cmd {
        BenchCmd::Init { input, combine } => {
            let combos: Vec<Vec<String>> = combine.iter().map(|c| split_combination(c)).collect();
            build_suite(g, &input, |apps, sel| {
                let mut cases = Vec::new();
                for skeleton in identify_cases(apps, &combos)? {
                    match ground_truth(&skeleton, sel) {
                        Ok(case) => cases.push(case),
                        Err(BenchError::NoExpectedFlows(id)) => eprintln!("warning: no expected flows for `{id}`, skipped"),
                        Err(e) => return Err(e.into()),
                    }
                }
                Ok(cases)
            })
        }
        BenchCmd::Pairs { input } => build_suite(g, &input, |_, sel| Ok(generate_pairs(sel)?)),
        BenchCmd::Run { suite, report } => {
            let (suite, apps) = load_suite(&suite)?;
            let d = dispatcher(g)?;
            for app in apps {
                d.add_app(app);
            }
            let result = run_benchmark(&suite.cases, &d, None, g.strictness)?;
            if let Some(out) = report {
                fs::write(&out, export_report(&result, ExportFormat::Json))?;
            }
            print_report(g, &result)
        }
        BenchCmd::Eval { suite, answers, report } => {
            let (suite, _) = load_suite(&suite)?;
            let mut stored = HashMap::new();
            for case in suite.cases.iter().filter(|c| c.active) {
                let path = answers.join(format!("{}.xml", case.id));
                let Ok(bytes) = fs::read(&path) else { continue };
                let answer = deserialize_answer(&bytes).with_context(|| format!("parsing {}", path.display()))?;
                stored.insert(case.id.clone(), (answer, RunSummary::external()));
            }
            let result = evaluate(&suite.cases, &stored, None, g.strictness)?;
            if let Some(out) = report {
                fs::write(&out, export_report(&result, ExportFormat::Json))?;
            }
            print_report(g, &result)
        }
        BenchCmd::Export { report, to, out } => {
            let bytes = fs::read(&report).with_context(|| format!("reading {}", report.display()))?;
            let parsed = import_report_json(&bytes)?;
            write_out(out.as_deref(), &export_report(&parsed, to))
        }
        BenchCmd::Triage { answers, min } => {
            let mut by_tool = BTreeMap::new();
            for spec in &answers {
                let (tool, file) = spec.split_once('=').ok_or_else(|| anyhow!("expected TOOL=FILE, got `{spec}`"))?;
                let bytes = fs::read(file).with_context(|| format!("reading {file}"))?;
                by_tool.insert(tool.to_string(), deserialize_answer(&bytes)?);
            }
            let rows = triage(&by_tool, min);
            if g.format == OutputFormat::Json {
                return json_out(&rows);
            }
            for row in rows {
                let tools: Vec<_> = row.tools.iter().map(String::as_str).collect();
                println!("{}  {} -> {}  [{}]", row.agreement(), print_reference(&row.flow.from), print_reference(&row.flow.to), tools.join(","));
            }
            Ok(())
        }
    }
}

/// Ingests a sidecar for a session. Apk files are looked up relative to the
/// session directory, as the HTTP upload does, so both paths hash alike.
pub(crate) fn session_app(dir: &Path, bytes: &[u8], name: Option<&Path>) -> Result<AppModel> {
    let format = SidecarFormat::detect(name, bytes);
    Ok(ingest_app_bytes(bytes, format, Some(dir), &IngestOptions::default())?)
}

fn session(g: &Global, dir: &PathBuf, op: SessionCmd) -> Result<()> {
    let mut s = Session::open(dir)?;
    let mutation = match op {
        SessionCmd::Show => return show(g, &s),
        SessionCmd::Graph { case } => return json_out(&s.state().graph(&case)?),
        SessionCmd::Export { to, out } => {
            let report = s.state().report.as_ref().ok_or_else(|| anyhow!("the session has no report yet"))?;
            return write_out(out.as_deref(), &export_report(report, to));
        }
        SessionCmd::ExportBench { out } => return write_out(out.as_deref(), &write_suite(&s.state().suite())),
        SessionCmd::Run => {
            let d = dispatcher(g)?;
            let m = s.state().run(&d, g.strictness)?;
            s.apply(m)?;
            return print_report(g, s.state().report.as_ref().expect("just recorded"));
        }
        SessionCmd::AddApp { sidecar } => {
            let bytes = fs::read(&sidecar).with_context(|| format!("reading {}", sidecar.display()))?;
            Mutation::AddApp { app: Box::new(session_app(dir, &bytes, Some(&sidecar))?) }
        }
        SessionCmd::LoadList { list } => {
            let text = fs::read_to_string(&list).with_context(|| format!("reading {}", list.display()))?;
            Mutation::LoadList { list: text, strictness: g.strictness }
        }
        SessionCmd::Select { candidate, off } => Mutation::Select { candidate, selected: !off },
        SessionCmd::Group { candidates } => Mutation::Group { candidates },
        SessionCmd::Split { candidate } => Mutation::Split { candidate },
        SessionCmd::Generate { pairs, combine } => Mutation::GenerateCases {
            pairs,
            combinations: combine.iter().map(|c| split_combination(c)).collect(),
        },
        SessionCmd::Polarity { case, polarity } => Mutation::SetPolarity { case, polarity },
        SessionCmd::Active { case, active } => Mutation::SetActive { case, active },
    };
    s.apply(mutation)?;
    Ok(())
}

fn show(g: &Global, s: &Session) -> Result<()> {
    let state = s.state();
    let apps: Vec<AppView> = state.apps.iter().map(AppView::from).collect();
    let candidates = state.candidate_views();
    let cases: Vec<CaseView> = state.cases.iter().map(CaseView::from).collect();
    if g.format == OutputFormat::Json {
        #[derive(Serialize)]
        struct Show<'a> {
            revision: u64,
            apps: Vec<AppView>,
            candidates: Vec<aql_core::session::CandidateView>,
            cases: Vec<CaseView>,
            report: Option<&'a EvaluationReport>,
        }
        return json_out(&Show { revision: state.revision, apps, candidates, cases, report: state.report.as_ref() });
    }
    println!("revision {}", state.revision);
    for a in &apps {
        println!("app {} ({})", a.id, a.file);
    }
    for c in &candidates {
        let mark = if c.selected { "x" } else { " " };
        let group = c.group.map(|g| format!(" group {g}")).unwrap_or_default();
        println!("[{mark}] {}  {:<6} {}  {}{group}", c.id, c.kind.to_string(), c.stmt, c.statement);
    }
    for c in &cases {
        let active = if c.active { "" } else { " (inactive)" };
        println!("case {} {}{}  {}", c.id, c.polarity, active, c.query);
        for f in &c.expected {
            println!("    {} -> {}", f.from, f.to);
        }
    }
    if let Some(report) = &state.report {
        print_report(g, report)?;
    }
    Ok(())
}
