//! Local HTTP API over a session directory.
//!
//! Reads take a shared lock on the session; mutations take the exclusive
//! lock, so the journal has a single writer. Tool runs happen outside the
//! lock and are recorded only if the session did not change meanwhile.

use std::net::{Ipv4Addr, SocketAddr};
use std::path::Path;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use aql_core::bench::{export_report, write_suite, BenchError, ExportFormat, Polarity};
use aql_core::dispatch::Dispatcher;
use aql_core::session::{Mutation, Session, SessionError};
use aql_core::Strictness;

use crate::views::{AppView, CaseView};
use crate::Global;

pub struct ServiceState {
    session: RwLock<Session>,
    dispatcher: Result<Arc<Dispatcher>, String>,
    strictness: Strictness,
}

impl ServiceState {
    /// `dispatcher` is an error message when no tool configuration could be
    /// loaded; everything except `/run` works without one.
    pub fn new(session: Session, dispatcher: Result<Dispatcher, String>, strictness: Strictness) -> Arc<Self> {
        Arc::new(ServiceState { session: RwLock::new(session), dispatcher: dispatcher.map(Arc::new), strictness })
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, kind, message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.kind, message: self.message })).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        let (status, kind) = match &e {
            SessionError::DuplicateApp(_) => (StatusCode::CONFLICT, "DuplicateApp"),
            SessionError::UnknownApp(_) => (StatusCode::NOT_FOUND, "UnknownApp"),
            SessionError::UnknownCandidate(_) => (StatusCode::NOT_FOUND, "UnknownCandidate"),
            SessionError::UnknownCase(_) => (StatusCode::NOT_FOUND, "UnknownCase"),
            SessionError::NoList => (StatusCode::CONFLICT, "NoList"),
            SessionError::List { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "ListParse"),
            SessionError::CorruptJournal { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "CorruptJournal"),
            SessionError::Io { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "Io"),
            SessionError::Bench(b) => match b {
                BenchError::UnknownAppId(_) => (StatusCode::NOT_FOUND, "UnknownApp"),
                BenchError::Dispatch(_) => (StatusCode::UNPROCESSABLE_ENTITY, "Dispatch"),
                _ => (StatusCode::UNPROCESSABLE_ENTITY, "InvalidSelection"),
            },
        };
        ApiError::new(status, kind, message)
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned + Default>(body: &Bytes) -> ApiResult<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", e.to_string()))
}

fn mutate(state: &ServiceState, m: Mutation) -> ApiResult<()> {
    state.session.write().expect("session lock poisoned").apply(m)?;
    Ok(())
}

fn json_bytes(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/apps", get(list_apps).post(add_app))
        .route("/list", post(load_list))
        .route("/candidates", get(candidates))
        .route("/candidates/{id}/select", post(select))
        .route("/candidates/{id}/split", post(split))
        .route("/groups", post(group))
        .route("/cases", get(list_cases).post(generate_cases))
        .route("/cases/{id}", get(get_case))
        .route("/cases/{id}/polarity", post(set_polarity))
        .route("/cases/{id}/active", post(set_active))
        .route("/run", post(run))
        .route("/report", get(report))
        .route("/report/graph/{case}", get(graph))
        .route("/export", get(export))
        .route("/benchmark", get(benchmark))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such endpoint") })
        .with_state(state)
}

async fn list_apps(State(st): State<Arc<ServiceState>>) -> Json<Vec<AppView>> {
    let s = st.session.read().expect("session lock poisoned");
    Json(s.state().apps.iter().map(AppView::from).collect())
}

/// The body is the raw sidecar, JSON or XML.
async fn add_app(State(st): State<Arc<ServiceState>>, body: Bytes) -> ApiResult<(StatusCode, Json<AppView>)> {
    let mut s = st.session.write().expect("session lock poisoned");
    let app = crate::commands::session_app(s.dir(), &body, None)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "MalformedSidecar", format!("{e:#}")))?;
    let view = AppView::from(&app);
    s.apply(Mutation::AddApp { app: Box::new(app) })?;
    Ok((StatusCode::CREATED, Json(view)))
}

#[derive(Debug, Default, Deserialize)]
struct ListParams {
    strictness: Option<Strictness>,
}

/// The body is the source/sink list text.
async fn load_list(State(st): State<Arc<ServiceState>>, Query(q): Query<ListParams>, body: String) -> ApiResult<StatusCode> {
    mutate(&st, Mutation::LoadList { list: body, strictness: q.strictness.unwrap_or(st.strictness) })?;
    Ok(StatusCode::NO_CONTENT)
}

async fn candidates(State(st): State<Arc<ServiceState>>) -> Json<Vec<aql_core::session::CandidateView>> {
    Json(st.session.read().expect("session lock poisoned").state().candidate_views())
}

#[derive(Debug, Deserialize)]
struct SelectBody {
    #[serde(default = "yes")]
    selected: bool,
}

fn yes() -> bool {
    true
}

impl Default for SelectBody {
    fn default() -> Self {
        SelectBody { selected: true }
    }
}

async fn select(State(st): State<Arc<ServiceState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<StatusCode> {
    let b: SelectBody = parse_body(&body)?;
    mutate(&st, Mutation::Select { candidate: id, selected: b.selected })?;
    Ok(StatusCode::NO_CONTENT)
}

async fn split(State(st): State<Arc<ServiceState>>, UrlPath(id): UrlPath<String>) -> ApiResult<StatusCode> {
    mutate(&st, Mutation::Split { candidate: id })?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Default, Deserialize)]
struct GroupBody {
    candidates: Vec<String>,
}

async fn group(State(st): State<Arc<ServiceState>>, body: Bytes) -> ApiResult<StatusCode> {
    let b: GroupBody = parse_body(&body)?;
    mutate(&st, Mutation::Group { candidates: b.candidates })?;
    Ok(StatusCode::NO_CONTENT)
}

async fn list_cases(State(st): State<Arc<ServiceState>>) -> Json<Vec<CaseView>> {
    let s = st.session.read().expect("session lock poisoned");
    Json(s.state().cases.iter().map(CaseView::from).collect())
}

#[derive(Debug, Default, Deserialize)]
struct GenerateBody {
    #[serde(default)]
    pairs: bool,
    #[serde(default)]
    combinations: Vec<Vec<String>>,
}

async fn generate_cases(State(st): State<Arc<ServiceState>>, body: Bytes) -> ApiResult<Json<Vec<CaseView>>> {
    let b: GenerateBody = parse_body(&body)?;
    let mut s = st.session.write().expect("session lock poisoned");
    s.apply(Mutation::GenerateCases { pairs: b.pairs, combinations: b.combinations })?;
    Ok(Json(s.state().cases.iter().map(CaseView::from).collect()))
}

fn case_view(st: &ServiceState, id: &str) -> ApiResult<CaseView> {
    let s = st.session.read().expect("session lock poisoned");
    let case = s.state().case(id).ok_or_else(|| SessionError::UnknownCase(id.to_string()))?;
    Ok(CaseView::from(case))
}

async fn get_case(State(st): State<Arc<ServiceState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<CaseView>> {
    Ok(Json(case_view(&st, &id)?))
}

#[derive(Debug, Deserialize)]
struct PolarityBody {
    polarity: Polarity,
}

impl Default for PolarityBody {
    fn default() -> Self {
        PolarityBody { polarity: Polarity::Positive }
    }
}

async fn set_polarity(
    State(st): State<Arc<ServiceState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<CaseView>> {
    let b: PolarityBody = parse_body(&body)?;
    mutate(&st, Mutation::SetPolarity { case: id.clone(), polarity: b.polarity })?;
    Ok(Json(case_view(&st, &id)?))
}

#[derive(Debug, Deserialize)]
struct ActiveBody {
    active: bool,
}

impl Default for ActiveBody {
    fn default() -> Self {
        ActiveBody { active: true }
    }
}

async fn set_active(
    State(st): State<Arc<ServiceState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<CaseView>> {
    let b: ActiveBody = parse_body(&body)?;
    mutate(&st, Mutation::SetActive { case: id.clone(), active: b.active })?;
    Ok(Json(case_view(&st, &id)?))
}

async fn run(State(st): State<Arc<ServiceState>>) -> ApiResult<Response> {
    let dispatcher = st
        .dispatcher
        .clone()
        .map_err(|msg| ApiError::new(StatusCode::CONFLICT, "NoToolConfig", msg))?;
    let snapshot = st.session.read().expect("session lock poisoned").state().clone();
    let revision = snapshot.revision;
    let strictness = st.strictness;
    let recorded = tokio::task::spawn_blocking(move || snapshot.run(&dispatcher, strictness))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))??;
    let mut s = st.session.write().expect("session lock poisoned");
    if s.state().revision != revision {
        return Err(ApiError::new(StatusCode::CONFLICT, "SessionChanged", "the session changed while the run was in progress"));
    }
    s.apply(recorded)?;
    let report = s.state().report.as_ref().expect("just recorded");
    Ok(json_bytes(export_report(report, ExportFormat::Json)))
}

fn no_report() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NoReport", "no run has been recorded yet")
}

async fn report(State(st): State<Arc<ServiceState>>) -> ApiResult<Response> {
    let s = st.session.read().expect("session lock poisoned");
    let report = s.state().report.as_ref().ok_or_else(no_report)?;
    Ok(json_bytes(export_report(report, ExportFormat::Json)))
}

async fn graph(State(st): State<Arc<ServiceState>>, UrlPath(case): UrlPath<String>) -> ApiResult<Response> {
    let s = st.session.read().expect("session lock poisoned");
    Ok(Json(s.state().graph(&case)?).into_response())
}

#[derive(Debug, Deserialize)]
struct ExportParams {
    format: Option<String>,
}

async fn export(State(st): State<Arc<ServiceState>>, Query(q): Query<ExportParams>) -> ApiResult<Response> {
    let format: ExportFormat = q
        .format
        .as_deref()
        .unwrap_or("json")
        .parse()
        .map_err(|e: String| ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", e))?;
    let s = st.session.read().expect("session lock poisoned");
    let report = s.state().report.as_ref().ok_or_else(no_report)?;
    Ok(([(header::CONTENT_TYPE, format.media_type())], export_report(report, format)).into_response())
}

async fn benchmark(State(st): State<Arc<ServiceState>>) -> Response {
    let s = st.session.read().expect("session lock poisoned");
    ([(header::CONTENT_TYPE, "application/xml")], write_suite(&s.state().suite())).into_response()
}

/// Binds the loopback port, failing with a clear message when it is taken.
pub fn bind(port: u16) -> anyhow::Result<std::net::TcpListener> {
    let addr = SocketAddr::from((Ipv4Addr::LOCALHOST, port));
    match std::net::TcpListener::bind(addr) {
        Ok(l) => {
            l.set_nonblocking(true)?;
            Ok(l)
        }
        Err(e) if e.kind() == std::io::ErrorKind::AddrInUse => anyhow::bail!("PortInUse: port {port} is already in use"),
        Err(e) => Err(e.into()),
    }
}

pub async fn serve(listener: std::net::TcpListener, state: Arc<ServiceState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::from_std(listener)?;
    axum::serve(listener, router(state)).await
}

pub(crate) fn serve_blocking(port: u16, session_dir: &Path, g: &Global) -> anyhow::Result<()> {
    let listener = bind(port)?;
    let session = Session::open(session_dir)?;
    let dispatcher = crate::commands::dispatcher(g).map_err(|e| format!("{e:#}"));
    if let Err(msg) = &dispatcher {
        eprintln!("warning: {msg}; POST /run is unavailable");
    }
    let state = ServiceState::new(session, dispatcher, g.strictness);
    eprintln!("serving {} on http://{}", session_dir.display(), listener.local_addr()?);
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(serve(listener, state))?;
    Ok(())
}
