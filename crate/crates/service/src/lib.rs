//! HTTP control plane for live runs: start runs, follow their event logs over
//! SSE, submit priors for gating and override rejections.

mod openapi;
mod runs;

use std::collections::HashMap;
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dynabo_core::engine::{Event, EventKind, RunConfig};
use dynabo_core::prior::Prior;
use futures::stream::{self, Stream, StreamExt};
use serde::Deserialize;
use serde_json::json;
use uuid::Uuid;

pub use runs::{kind_name, ApiError, Run, RunSummary, Slice, SlicePoint};

const UI: &str = include_str!("ui.html");

/// Shared registry of runs.
pub struct AppState {
    runs: RwLock<HashMap<Uuid, Arc<Run>>>,
    data_dir: PathBuf,
}

impl AppState {
    /// `data_dir` holds corpus caches for scheduled runs.
    pub fn new(data_dir: PathBuf) -> Arc<Self> {
        Arc::new(Self {
            runs: RwLock::new(HashMap::new()),
            data_dir,
        })
    }

    pub fn run(&self, id: &str) -> Result<Arc<Run>, ApiError> {
        Uuid::parse_str(id)
            .ok()
            .and_then(|id| self.runs.read().unwrap().get(&id).cloned())
            .ok_or_else(|| ApiError::NotFound(format!("unknown run `{id}`")))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, m),
            ApiError::Unavailable(m) => (StatusCode::SERVICE_UNAVAILABLE, m),
        };
        (status, Json(json!({ "error": message }))).into_response()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/", get(|| async { axum::response::Redirect::temporary("/ui") }))
        .route("/ui", get(|| async { Html(UI) }))
        .route("/spec", get(|| async { Json(openapi::document()) }))
        .route("/runs", post(create_run).get(list_runs))
        .route("/runs/{id}", get(run_summary))
        .route("/runs/{id}/state", get(run_state))
        .route("/runs/{id}/events", get(run_events))
        .route("/runs/{id}/slice", get(run_slice))
        .route("/runs/{id}/priors", post(submit_prior))
        .route("/runs/{id}/priors/{pid}/override", post(override_prior))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, data_dir: PathBuf) -> std::io::Result<()> {
    axum::serve(listener, router(AppState::new(data_dir))).await
}

async fn create_run(State(app): State<Arc<AppState>>, body: String) -> Result<Response, ApiError> {
    let config = RunConfig::from_json(&body).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let data_dir = app.data_dir.clone();
    let run = Run::start(config, data_dir)?;
    let id = run.id;
    app.runs.write().unwrap().insert(id, run);
    Ok((
        StatusCode::CREATED,
        [(header::LOCATION, format!("/runs/{id}"))],
        Json(json!({ "run_id": id })),
    )
        .into_response())
}

async fn list_runs(State(app): State<Arc<AppState>>) -> Json<Vec<RunSummary>> {
    let mut all: Vec<RunSummary> = app.runs.read().unwrap().values().map(|r| r.summary()).collect();
    all.sort_by_key(|s| s.run_id);
    Json(all)
}

async fn run_summary(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let run = app.run(&id)?;
    let mut body = serde_json::to_value(run.summary()).unwrap_or_default();
    body["config"] = serde_json::to_value(&run.config).unwrap_or_default();
    body["space"] = serde_json::to_value(run.space()).unwrap_or_default();
    Ok(Json(body).into_response())
}

async fn run_state(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let run = app.run(&id)?;
    let mut state = run.snapshot().to_json();
    state["status"] = serde_json::to_value(run.status()).unwrap_or_default();
    Ok(Json(state).into_response())
}

fn sse_event(e: &Event) -> SseEvent {
    SseEvent::default()
        .id(e.seq.to_string())
        .event(kind_name(e.kind))
        .data(serde_json::to_string(e).unwrap_or_default())
}

/// Replays the log from the start (or after `Last-Event-ID`) and follows it
/// until the `finished` event. A failed run ends with an `error` event.
fn follow(run: Arc<Run>, start: usize) -> impl Stream<Item = Result<SseEvent, Infallible>> {
    let rx = run.subscribe();
    stream::unfold(Some((run, start, rx)), |st| async move {
        let (run, mut cursor, mut rx) = st?;
        loop {
            rx.borrow_and_update();
            let batch = run.events_from(cursor);
            if let Some(last) = batch.last() {
                cursor += batch.len();
                let done = last.kind == EventKind::Finished;
                let items: Vec<SseEvent> = batch.iter().map(sse_event).collect();
                return Some((items, (!done).then_some((run, cursor, rx))));
            }
            if run.is_closed() {
                if !run.events_from(cursor).is_empty() {
                    continue;
                }
                let tail = run
                    .error()
                    .map(|e| SseEvent::default().event("error").data(json!({ "message": e }).to_string()));
                return tail.map(|t| (vec![t], None));
            }
            if rx.changed().await.is_err() {
                return None;
            }
        }
    })
    .flat_map(|items| stream::iter(items.into_iter().map(Ok)))
}

async fn run_events(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let run = app.run(&id)?;
    let start = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<usize>().ok())
        .map_or(0, |seq| seq + 1);
    Ok(Sse::new(follow(run, start)).keep_alive(KeepAlive::default()).into_response())
}

#[derive(Deserialize)]
struct SliceQuery {
    dim: String,
    #[serde(default = "default_points")]
    points: usize,
}

fn default_points() -> usize {
    50
}

async fn run_slice(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    query: Result<Query<SliceQuery>, axum::extract::rejection::QueryRejection>,
) -> Result<Response, ApiError> {
    let run = app.run(&id)?;
    let Query(q) = query.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let slice = tokio::task::spawn_blocking(move || run.slice(&q.dim, q.points))
        .await
        .map_err(|e| ApiError::Unavailable(e.to_string()))??;
    Ok(Json(slice).into_response())
}

async fn submit_prior(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: String,
) -> Result<Response, ApiError> {
    let run = app.run(&id)?;
    let prior = Prior::from_json(&body).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let (prior_id, verdict) = tokio::task::spawn_blocking(move || run.submit_prior(prior))
        .await
        .map_err(|e| ApiError::Unavailable(e.to_string()))??;
    Ok(Json(json!({ "prior_id": prior_id, "verdict": verdict })).into_response())
}

async fn override_prior(
    State(app): State<Arc<AppState>>,
    Path((id, pid)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let run = app.run(&id)?;
    let verdict = run.override_prior(&pid)?;
    Ok(Json(json!({ "prior_id": pid, "verdict": verdict })).into_response())
}
