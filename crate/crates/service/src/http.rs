//! HTTP/1.1 JSON API over [`SessionManager`].
//!
//! | method | path                               | body                         |
//! |--------|------------------------------------|------------------------------|
//! | GET    | `/health`                          |                              |
//! | POST   | `/sessions`                        | [`CreateSession`]            |
//! | GET    | `/sessions`                        |                              |
//! | DELETE | `/sessions/{id}`                   |                              |
//! | GET    | `/sessions/{id}/snapshot`          |                              |
//! | POST   | `/sessions/{id}/start`             |                              |
//! | POST   | `/sessions/{id}/pause`             |                              |
//! | POST   | `/sessions/{id}/reset`             |                              |
//! | POST   | `/sessions/{id}/speed`             | `{"speed": 10}`              |
//! | POST   | `/sessions/{id}/actions`           | `{"kind": "SHORT_TAP"}`      |
//! | GET    | `/sessions/{id}/actions`           |                              |
//! | GET    | `/sessions/{id}/announcements`     |                              |
//! | GET    | `/sessions/{id}/log`               | (NDJSON response)            |
//!
//! Errors come back as `{"error": "..."}` with 400 (bad request or
//! scenario), 404 (unknown session) or 409 (action not valid now).

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::CorsLayer;
use vgd_core::sim::{GpsMode, Scenario};

use crate::session::{ActionKind, Session, SessionError, SessionManager, SessionMode, Status};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    /// Scenario document (TOML). Corpus and plan must be `builtin:` refs or
    /// absolute paths.
    pub scenario_toml: Option<String>,
    /// Name of a bundled scenario, used when `scenario_toml` is absent.
    pub builtin: Option<String>,
    #[serde(default = "interactive")]
    pub mode: SessionMode,
    #[serde(default = "unit_speed")]
    pub speed: f64,
    pub seed: Option<u64>,
    pub gps_mode: Option<GpsMode>,
}

fn interactive() -> SessionMode {
    SessionMode::Interactive
}

fn unit_speed() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionBody {
    kind: ActionKind,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpeedBody {
    speed: f64,
}

#[derive(Debug, Serialize)]
struct SessionSummary {
    id: String,
    mode: SessionMode,
    status: Status,
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let code = match e {
            SessionError::Rejected(_) => StatusCode::CONFLICT,
            SessionError::BadSpeed(_) => StatusCode::BAD_REQUEST,
            SessionError::Setup(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(code, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(StatusCode::BAD_REQUEST, e.body_text())
    }
}

type AppState = Arc<SessionManager>;
type ApiResult<T> = Result<T, ApiError>;

fn find(state: &AppState, id: &str) -> ApiResult<Arc<Session>> {
    state.get(id).ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no session '{id}'")))
}

pub fn scenario_from_request(req: &CreateSession) -> Result<Scenario, String> {
    let mut s = match (&req.scenario_toml, &req.builtin) {
        (Some(text), _) => Scenario::from_toml(text, None),
        (None, Some(name)) => Scenario::builtin(name),
        (None, None) => Scenario::builtin("demo_crossing"),
    }
    .map_err(|e| e.to_string())?;
    if let Some(seed) = req.seed {
        s.seed = seed;
    }
    if let Some(mode) = req.gps_mode {
        s.set_mode(mode);
    }
    Ok(s)
}

async fn create(State(state): State<AppState>, body: Result<Json<CreateSession>, JsonRejection>) -> ApiResult<Response> {
    let Json(req) = body?;
    let scenario = scenario_from_request(&req).map_err(|e| ApiError(StatusCode::BAD_REQUEST, e))?;
    let session = tokio::task::spawn_blocking(move || state.create(scenario, req.mode, req.speed))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok((StatusCode::CREATED, Json(session.snapshot().as_ref().clone())).into_response())
}

async fn list(State(state): State<AppState>) -> Json<Vec<SessionSummary>> {
    let out = state
        .ids()
        .into_iter()
        .filter_map(|id| state.get(&id))
        .map(|s| SessionSummary { id: s.id.clone(), mode: s.mode, status: s.status() })
        .collect();
    Json(out)
}

async fn delete(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    if state.remove(&id) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError(StatusCode::NOT_FOUND, format!("no session '{id}'")))
    }
}

async fn snapshot(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let s = find(&state, &id)?;
    Ok(Json(s.snapshot().as_ref().clone()).into_response())
}

fn status_body(s: &Session, status: Status) -> Response {
    Json(json!({ "id": s.id, "status": status })).into_response()
}

async fn start(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let s = find(&state, &id)?;
    let st = s.start()?;
    Ok(status_body(&s, st))
}

async fn pause(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let s = find(&state, &id)?;
    let st = s.pause()?;
    Ok(status_body(&s, st))
}

async fn reset(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let s = find(&state, &id)?;
    let st = tokio::task::spawn_blocking({
        let s = Arc::clone(&s);
        move || s.reset()
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(status_body(&s, st))
}

async fn speed(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<SpeedBody>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(b) = body?;
    let s = find(&state, &id)?;
    let v = s.set_speed(b.speed)?;
    Ok(Json(json!({ "id": s.id, "speed": v })).into_response())
}

async fn action(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<ActionBody>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(b) = body?;
    let s = find(&state, &id)?;
    let ack = tokio::task::spawn_blocking(move || s.submit(b.kind))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok((StatusCode::ACCEPTED, Json(ack)).into_response())
}

async fn actions(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(find(&state, &id)?.actions()).into_response())
}

async fn announcements(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(find(&state, &id)?.announcements()).into_response())
}

async fn log(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let text = find(&state, &id)?.log_ndjson();
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(json!({ "ok": true })) }))
        .route("/sessions", post(create).get(list))
        .route("/sessions/{id}", axum::routing::delete(delete))
        .route("/sessions/{id}/snapshot", get(snapshot))
        .route("/sessions/{id}/start", post(start))
        .route("/sessions/{id}/pause", post(pause))
        .route("/sessions/{id}/reset", post(reset))
        .route("/sessions/{id}/speed", post(speed))
        .route("/sessions/{id}/actions", post(action).get(actions))
        .route("/sessions/{id}/announcements", get(announcements))
        .route("/sessions/{id}/log", get(log))
        .layer(CorsLayer::permissive())
        .with_state(state)
}
