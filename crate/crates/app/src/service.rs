//! JSON-over-HTTP access to the run store for the review console.
//!
//! Reads go straight to the files of a run. Writes to one run are serialized
//! by a per-run lock; files are replaced atomically, so a concurrent read
//! sees either the state before or after a write.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gazelens::anomaly_lstm::AnomalyReport;
use gazelens::co_eval::{Rater, ReviewVerdict, SubmitOutcome, Verdict};
use gazelens::grid::ExperimentGrid;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::config::AppConfig;
use crate::error::AppError;
use crate::pipeline::{self, KappaSummary, ReviewItem};
use crate::store::{self, Run, RunManifest, StageName, StageStatus, Store, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    NotFound,
    Validation,
    Conflict,
    Internal,
}

impl ErrorCode {
    fn status(self) -> StatusCode {
        match self {
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::Validation => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::Conflict => StatusCode::CONFLICT,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

/// Error body of every failed request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default)]
    pub detail: BTreeMap<String, serde_json::Value>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> ApiError {
        ApiError { code, message: message.into(), detail: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: impl Into<serde_json::Value>) -> ApiError {
        self.detail.insert(key.to_string(), value.into());
        self
    }

    fn not_found(what: &str, id: &str) -> ApiError {
        ApiError::new(ErrorCode::NotFound, format!("{what} {id} not found")).with(what, id)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match &e {
            StoreError::RunNotFound(id) => ApiError::not_found("run", id),
            StoreError::Corrupt { path, line, offset, .. } => ApiError::new(ErrorCode::Internal, e.to_string())
                .with("file", path.display().to_string())
                .with("line", *line)
                .with("offset", *offset),
            _ => ApiError::new(ErrorCode::Internal, e.to_string()),
        }
    }
}

impl From<AppError> for ApiError {
    fn from(e: AppError) -> Self {
        match e {
            AppError::Store(s) => s.into(),
            AppError::Validation(m) => ApiError::new(ErrorCode::Validation, m),
            other => ApiError::new(ErrorCode::Internal, other.to_string()),
        }
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

pub struct AppState {
    pub store: Store,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

impl AppState {
    pub fn new(store: Store) -> Arc<AppState> {
        Arc::new(AppState { store, locks: Mutex::new(HashMap::new()) })
    }

    fn write_lock(&self, run_id: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.locks.lock().expect("lock table");
        locks.entry(run_id.to_string()).or_default().clone()
    }
}

pub fn router(state: Arc<AppState>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/runs", get(list_runs))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/patterns", get(list_patterns))
        .route("/runs/{id}/reports/kappa", get(kappa_report))
        .route("/runs/{id}/reports/anomalies", get(anomaly_report))
        .route("/runs/{id}/reports/difficulty", get(difficulty_report))
        .route("/patterns/{pid}", get(get_pattern))
        .route("/patterns/{pid}/verdict", post(post_verdict))
        .fallback(|| async { ApiError::new(ErrorCode::NotFound, "no such endpoint") })
        .with_state(state);
    match ui_dir {
        Some(dir) => api.nest_service("/ui", ServeDir::new(dir).append_index_html_on_directories(true)),
        None => api.route("/ui", get(|| async { ApiError::new(ErrorCode::NotFound, "no review UI bundle configured") })),
    }
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn serve(store: Store, addr: &str, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("serving {} on http://{}", store.root.display(), listener.local_addr()?);
    axum::serve(listener, router(AppState::new(store), ui_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn run_config(run: &Run) -> Result<AppConfig, ApiError> {
    let manifest = run.manifest()?;
    serde_json::from_value(manifest.config).map_err(|e| {
        ApiError::new(ErrorCode::Internal, format!("run {} has an unreadable config snapshot: {e}", run.id))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub run_id: String,
    pub seed: u64,
    pub created_at: String,
    pub stages: BTreeMap<StageName, StageStatus>,
}

impl From<&RunManifest> for RunInfo {
    fn from(m: &RunManifest) -> Self {
        RunInfo { run_id: m.run_id.clone(), seed: m.seed, created_at: m.created_at.clone(), stages: m.statuses() }
    }
}

async fn list_runs(State(state): State<Arc<AppState>>) -> ApiResult<Vec<RunInfo>> {
    Ok(Json(state.store.list()?.iter().map(RunInfo::from).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewProgress {
    pub patterns: usize,
    pub reviewed: usize,
    pub pending: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDetail {
    #[serde(flatten)]
    pub info: RunInfo,
    pub manifest: RunManifest,
    pub review: ReviewProgress,
}

async fn get_run(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<RunDetail> {
    let run = state.store.open(&id)?;
    let manifest = run.manifest()?;
    let items = pipeline::review_items(&run)?;
    let reviewed = items.iter().filter(|i| i.reviewed()).count();
    Ok(Json(RunDetail {
        info: RunInfo::from(&manifest),
        manifest,
        review: ReviewProgress { patterns: items.len(), reviewed, pending: items.len() - reviewed },
    }))
}

#[derive(Debug, Deserialize)]
struct PatternQuery {
    status: Option<String>,
}

async fn list_patterns(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<PatternQuery>,
) -> ApiResult<Vec<ReviewItem>> {
    let run = state.store.open(&id)?;
    let want: Option<bool> = match q.status.as_deref() {
        None => None,
        Some("pending") => Some(false),
        Some("reviewed") => Some(true),
        Some(other) => {
            return Err(ApiError::new(ErrorCode::Validation, format!("status must be pending or reviewed, got {other:?}"))
                .with("field", "status"))
        }
    };
    let items = pipeline::review_items(&run)?;
    Ok(Json(items.into_iter().filter(|i| want.is_none_or(|w| i.reviewed() == w)).collect()))
}

#[derive(Debug, Deserialize)]
struct RunQuery {
    run: Option<String>,
}

/// The run holding a pattern: the named one, or the newest run whose
/// composite sample contains it.
fn find_pattern(store: &Store, pid: &str, run_id: Option<&str>) -> Result<(Run, ReviewItem), ApiError> {
    let candidates: Vec<String> = match run_id {
        Some(id) => vec![id.to_string()],
        None => store.list()?.into_iter().rev().map(|m| m.run_id).collect(),
    };
    for id in candidates {
        let run = store.open(&id)?;
        if let Some(item) = pipeline::review_item(&run, pid)? {
            return Ok((run, item));
        }
    }
    Err(ApiError::not_found("pattern", pid))
}

async fn get_pattern(
    State(state): State<Arc<AppState>>,
    Path(pid): Path<String>,
    Query(q): Query<RunQuery>,
) -> ApiResult<ReviewItem> {
    Ok(Json(find_pattern(&state.store, &pid, q.run.as_deref())?.1))
}

/// Body of `POST /patterns/{pid}/verdict`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictRequest {
    /// `valid` or `invalid`.
    pub verdict: String,
    #[serde(default)]
    pub note: Option<String>,
    /// Run to record in; the newest run holding the pattern when absent.
    #[serde(default)]
    pub run_id: Option<String>,
    /// Milliseconds since the Unix epoch; the server clock when absent. A
    /// differing verdict older than the stored one is rejected as a conflict.
    #[serde(default)]
    pub timestamp: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictResponse {
    pub run_id: String,
    pub outcome: SubmitOutcome,
    pub item: ReviewItem,
}

async fn post_verdict(
    State(state): State<Arc<AppState>>,
    Path(pid): Path<String>,
    body: Bytes,
) -> ApiResult<VerdictResponse> {
    let req: VerdictRequest = serde_json::from_slice(&body).map_err(|e| {
        ApiError::new(ErrorCode::Validation, format!("malformed verdict body: {e}"))
            .with("line", e.line())
            .with("column", e.column())
    })?;
    let verdict: Verdict = req.verdict.parse().map_err(|_| {
        ApiError::new(ErrorCode::Validation, format!("verdict must be valid or invalid, got {:?}", req.verdict))
            .with("field", "verdict")
    })?;
    let (run, _) = find_pattern(&state.store, &pid, req.run_id.as_deref())?;

    let lock = state.write_lock(&run.id);
    let _guard = lock.lock().await;
    let log = run.verdict_log()?;
    if let (Some(ts), Some(current)) = (req.timestamp, log.current_for(&pid, Rater::Expert)) {
        if current.timestamp > ts && (current.verdict != verdict || current.note != req.note) {
            return Err(ApiError::new(ErrorCode::Conflict, format!("pattern {pid} has a newer verdict; the stored one stands"))
                .with("current", serde_json::to_value(current).expect("verdict serializes")));
        }
    }
    let entry = ReviewVerdict {
        pattern_id: pid.clone(),
        rater: Rater::Expert,
        verdict,
        timestamp: req.timestamp.unwrap_or_else(store::now_millis),
        note: req.note,
    };
    let outcome = run.submit_verdicts(vec![entry])?.pop().expect("one outcome per verdict");
    if let SubmitOutcome::Replaced { previous } = &outcome {
        log::info!("pattern {pid} in run {}: {} replaced by {verdict}", run.id, previous.verdict);
    }
    let item = pipeline::review_item(&run, &pid)?.ok_or_else(|| ApiError::not_found("pattern", &pid))?;
    Ok(Json(VerdictResponse { run_id: run.id.clone(), outcome, item }))
}

async fn kappa_report(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<KappaSummary> {
    let run = state.store.open(&id)?;
    let config = run_config(&run)?;
    Ok(Json(pipeline::compute_kappa(&run, &config)?))
}

fn stored_report<T: serde::de::DeserializeOwned>(run: &Run, rel: &str, stage: StageName) -> Result<T, ApiError> {
    if !run.exists(rel) {
        return Err(ApiError::new(ErrorCode::NotFound, format!("run {} has no {rel}; run `gazelens {stage}`", run.id))
            .with("run", run.id.as_str())
            .with("report", rel));
    }
    Ok(run.read_json(rel)?)
}

async fn anomaly_report(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<AnomalyReport> {
    let run = state.store.open(&id)?;
    Ok(Json(stored_report(&run, store::ANOMALIES, StageName::Detect)?))
}

async fn difficulty_report(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<ExperimentGrid> {
    let run = state.store.open(&id)?;
    Ok(Json(stored_report(&run, store::DIFFICULTY, StageName::PredictDifficulty)?))
}
