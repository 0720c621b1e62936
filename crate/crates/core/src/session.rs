//! Persistent state behind the refinement wizard.
//!
//! Every change is a [`Mutation`] appended to `journal.jsonl` in the session
//! directory; opening a session replays the journal. Tool results enter the
//! journal as recorded data, so replay never runs a tool.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::app_model::{scan_candidates, AppModel, Candidate, CandidateKind, SidecarDoc, SourceSinkList, StatementRef};
use crate::aql::Answer;
use crate::bench::{
    evaluate, flow_graph, generate_pairs, ground_truth, identify_cases, run_cases, BenchError, BenchmarkCase,
    BenchmarkSuite, EvaluationReport, FlowGraph, Polarity, RunSummary,
};
use crate::dispatch::Dispatcher;
use crate::Strictness;

pub const JOURNAL_FILE: &str = "journal.jsonl";

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("app `{0}` is already loaded")]
    DuplicateApp(String),
    #[error("unknown app `{0}`")]
    UnknownApp(String),
    #[error("unknown candidate `{0}`")]
    UnknownCandidate(String),
    #[error("unknown case `{0}`")]
    UnknownCase(String),
    #[error("no source/sink list loaded")]
    NoList,
    #[error("source/sink list line {line}: {message}")]
    List { line: usize, message: String },
    #[error("journal line {line}: {message}")]
    CorruptJournal { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Bench(#[from] BenchError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Mutation {
    AddApp { app: Box<AppModel> },
    LoadList { list: String, strictness: Strictness },
    Select { candidate: String, selected: bool },
    Group { candidates: Vec<String> },
    Split { candidate: String },
    GenerateCases {
        pairs: bool,
        #[serde(default)]
        combinations: Vec<Vec<String>>,
    },
    SetPolarity { case: String, polarity: Polarity },
    SetActive { case: String, active: bool },
    RecordRun { report: EvaluationReport, answers: BTreeMap<String, Answer> },
}

/// Stable short id of a candidate: a SHA-256 prefix over statement and kind.
pub fn candidate_id(c: &Candidate) -> String {
    let digest = Sha256::digest(format!("{}|{}", c.stmt, c.kind).as_bytes());
    hex::encode(&digest[..6])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CandidateView {
    pub id: String,
    pub stmt: StatementRef,
    pub kind: CandidateKind,
    pub statement: String,
    pub callee: Option<String>,
    pub selected: bool,
    /// Index into the selection's groups when selected.
    pub group: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionState {
    pub apps: Vec<AppModel>,
    pub list: Option<SourceSinkList>,
    pub scan_strictness: Strictness,
    /// In scan order, keyed by candidate id.
    pub candidates: Vec<(String, Candidate)>,
    pub selection: crate::bench::SourceSinkSelection,
    pub cases: Vec<BenchmarkCase>,
    pub report: Option<EvaluationReport>,
    pub answers: BTreeMap<String, Answer>,
    /// Number of mutations applied.
    pub revision: u64,
}

impl SessionState {
    pub fn app(&self, id: &str) -> Option<&AppModel> {
        self.apps.iter().find(|a| a.id == id)
    }

    pub fn candidate(&self, id: &str) -> Option<&Candidate> {
        self.candidates.iter().find(|(cid, _)| cid == id).map(|(_, c)| c)
    }

    pub fn case(&self, id: &str) -> Option<&BenchmarkCase> {
        self.cases.iter().find(|c| c.id == id)
    }

    fn case_mut(&mut self, id: &str) -> Result<&mut BenchmarkCase, SessionError> {
        self.cases.iter_mut().find(|c| c.id == id).ok_or_else(|| SessionError::UnknownCase(id.to_string()))
    }

    pub fn candidate_views(&self) -> Vec<CandidateView> {
        self.candidates
            .iter()
            .map(|(id, c)| {
                let stmt = self.app(&c.stmt.app).and_then(|a| a.statement(&c.stmt));
                let selected = self.selection.get(&c.stmt).is_some_and(|m| m.kind == c.kind);
                let group = if selected {
                    self.selection.groups().iter().position(|g| g.contains(&c.stmt))
                } else {
                    None
                };
                CandidateView {
                    id: id.clone(),
                    stmt: c.stmt.clone(),
                    kind: c.kind,
                    statement: stmt.map(|s| s.text.clone()).unwrap_or_default(),
                    callee: stmt.and_then(|s| s.callee.clone()),
                    selected,
                    group,
                }
            })
            .collect()
    }

    /// Rescans all apps; candidates not seen before are preselected.
    fn rescan(&mut self) -> Result<(), SessionError> {
        let Some(list) = &self.list else { return Ok(()) };
        let known: BTreeSet<String> = self.candidates.iter().map(|(id, _)| id.clone()).collect();
        let mut fresh = Vec::new();
        let mut all = Vec::new();
        for app in &self.apps {
            for c in scan_candidates(app, list, self.scan_strictness) {
                let id = candidate_id(&c);
                if !known.contains(&id) {
                    fresh.push((app.id.clone(), c.clone()));
                }
                all.push((id, c));
            }
        }
        self.candidates = all;
        for (app_id, c) in fresh {
            let app = self.app(&app_id).expect("scanned app is loaded").clone();
            // A statement listed as both kinds is preselected once, as the
            // kind scanned first.
            match self.selection.select_candidate(&app, &c) {
                Ok(_) | Err(BenchError::MixedGroupKinds) => {}
                Err(e) => return Err(e.into()),
            }
        }
        Ok(())
    }

    fn resolve_candidate(&self, id: &str) -> Result<Candidate, SessionError> {
        self.candidate(id).cloned().ok_or_else(|| SessionError::UnknownCandidate(id.to_string()))
    }

    pub fn apply(&mut self, m: &Mutation) -> Result<(), SessionError> {
        match m {
            Mutation::AddApp { app } => {
                if self.app(&app.id).is_some() {
                    return Err(SessionError::DuplicateApp(app.id.clone()));
                }
                self.apps.push(app.as_ref().clone());
                self.rescan()?;
            }
            Mutation::LoadList { list, strictness } => {
                let parsed = SourceSinkList::parse(list)
                    .map_err(|e| SessionError::List { line: e.line, message: e.message.clone() })?;
                self.list = Some(parsed);
                self.scan_strictness = *strictness;
                self.rescan()?;
            }
            Mutation::Select { candidate, selected } => {
                let c = self.resolve_candidate(candidate)?;
                if *selected {
                    let app = self.app(&c.stmt.app).ok_or_else(|| SessionError::UnknownApp(c.stmt.app.clone()))?.clone();
                    self.selection.select_candidate(&app, &c)?;
                } else if self.selection.get(&c.stmt).is_some_and(|s| s.kind == c.kind) {
                    self.selection.deselect(&c.stmt);
                }
            }
            Mutation::Group { candidates } => {
                let stmts = candidates
                    .iter()
                    .map(|id| self.resolve_candidate(id).map(|c| c.stmt))
                    .collect::<Result<Vec<_>, _>>()?;
                self.selection.group(&stmts)?;
            }
            Mutation::Split { candidate } => {
                let c = self.resolve_candidate(candidate)?;
                self.selection.split(&c.stmt)?;
            }
            Mutation::GenerateCases { pairs, combinations } => {
                self.cases = if *pairs {
                    generate_pairs(&self.selection)?
                } else {
                    let mut cases = Vec::new();
                    for skeleton in identify_cases(&self.apps, combinations)? {
                        match ground_truth(&skeleton, &self.selection) {
                            Ok(case) => cases.push(case),
                            // Apps without a selected source and sink yield no case.
                            Err(BenchError::NoExpectedFlows(_)) => {}
                            Err(e) => return Err(e.into()),
                        }
                    }
                    cases
                };
                self.report = None;
                self.answers.clear();
            }
            Mutation::SetPolarity { case, polarity } => self.case_mut(case)?.polarity = *polarity,
            Mutation::SetActive { case, active } => self.case_mut(case)?.active = *active,
            Mutation::RecordRun { report, answers } => {
                self.report = Some(report.clone());
                self.answers = answers.clone();
            }
        }
        self.revision += 1;
        Ok(())
    }

    /// The cases as a benchmark suite whose sidecars live under `apps/`.
    pub fn suite(&self) -> BenchmarkSuite {
        let sidecars = self
            .cases
            .iter()
            .flat_map(|c| c.apps.iter())
            .map(|id| (id.clone(), format!("apps/{id}.json")))
            .collect();
        BenchmarkSuite { cases: self.cases.clone(), sidecars }
    }

    pub fn graph(&self, case_id: &str) -> Result<FlowGraph, SessionError> {
        let case = self.case(case_id).ok_or_else(|| SessionError::UnknownCase(case_id.to_string()))?;
        let empty = Answer::new();
        let actual = self.answers.get(case_id).unwrap_or(&empty);
        let verdict = self.report.as_ref().and_then(|r| r.verdict(case_id));
        Ok(flow_graph(case_id, &case.expected, actual, verdict))
    }

    /// Executes the active cases and evaluates them against the current
    /// selection. The result is returned as a mutation for recording.
    pub fn run(&self, dispatcher: &Dispatcher, strictness: Strictness) -> Result<Mutation, SessionError> {
        for app in &self.apps {
            dispatcher.add_app(app.clone());
        }
        let results = run_cases(&self.cases, dispatcher)?;
        let report = evaluate(&self.cases, &results, Some(&self.selection), strictness)?;
        let answers = results.into_iter().map(|(id, (answer, _)): (String, (Answer, RunSummary))| (id, answer)).collect();
        Ok(Mutation::RecordRun { report, answers })
    }
}

/// Rebuilds a state from journal text. A final line without a newline is a
/// torn write and is ignored.
pub fn replay(journal: &str) -> Result<SessionState, SessionError> {
    let mut state = SessionState::default();
    let complete = journal.ends_with('\n');
    let lines: Vec<&str> = journal.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let m: Mutation = match serde_json::from_str(line) {
            Ok(m) => m,
            Err(_) if i + 1 == lines.len() && !complete => break,
            Err(e) => return Err(SessionError::CorruptJournal { line: i + 1, message: e.to_string() }),
        };
        state.apply(&m).map_err(|e| SessionError::CorruptJournal { line: i + 1, message: e.to_string() })?;
    }
    Ok(state)
}

/// A session directory: the journal plus a sidecar copy of every app.
#[derive(Debug)]
pub struct Session {
    dir: PathBuf,
    state: SessionState,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SessionError + '_ {
    move |source| SessionError::Io { path: path.to_path_buf(), source }
}

impl Session {
    pub fn open(dir: &Path) -> Result<Session, SessionError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let journal = dir.join(JOURNAL_FILE);
        let state = match fs::read_to_string(&journal) {
            Ok(text) => replay(&text)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => SessionState::default(),
            Err(e) => return Err(io_err(&journal)(e)),
        };
        Ok(Session { dir: dir.to_path_buf(), state })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    /// Applies a mutation and appends it to the journal. On any failure the
    /// state is left unchanged.
    pub fn apply(&mut self, m: Mutation) -> Result<(), SessionError> {
        let mut next = self.state.clone();
        next.apply(&m)?;
        if let Mutation::AddApp { app } = &m {
            let apps = self.dir.join("apps");
            fs::create_dir_all(&apps).map_err(io_err(&apps))?;
            let path = apps.join(format!("{}.json", app.id));
            fs::write(&path, SidecarDoc::from_model(app).to_json()).map_err(io_err(&path))?;
        }
        let path = self.dir.join(JOURNAL_FILE);
        let mut line = serde_json::to_string(&m).expect("mutations always serialize");
        line.push('\n');
        let mut file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        file.write_all(line.as_bytes()).map_err(io_err(&path))?;
        file.sync_data().map_err(io_err(&path))?;
        self.state = next;
        Ok(())
    }
}
