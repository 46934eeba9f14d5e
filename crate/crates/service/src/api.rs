//! HTTP routes.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gamebot_core::{Action, GameRecord};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::service::{CreateSession, Service, ServiceError};
use crate::session::SessionError;

pub const DEFAULT_LEADERBOARD_LIMIT: usize = 10;

/// Error body: `{"error": {"code": ..., "message": ...}}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"error": {"code": self.code, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let message = e.to_string();
        let (status, code) = match &e {
            ServiceError::InvalidConfig(_) => (StatusCode::BAD_REQUEST, "INVALID_CONFIG"),
            ServiceError::UnknownAgent(_) => (StatusCode::BAD_REQUEST, "UNKNOWN_AGENT"),
            ServiceError::AgentUnavailable(_) => (StatusCode::BAD_REQUEST, "AGENT_UNAVAILABLE"),
            ServiceError::Session(SessionError::NotFound(_)) => {
                (StatusCode::NOT_FOUND, "NOT_FOUND")
            }
            ServiceError::Session(SessionError::IllegalMove { .. }) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "ILLEGAL_MOVE")
            }
            ServiceError::Session(SessionError::NotYourTurn) => {
                (StatusCode::CONFLICT, "NOT_YOUR_TURN")
            }
            ServiceError::Session(SessionError::Closed(_)) => {
                (StatusCode::CONFLICT, "SESSION_CLOSED")
            }
            ServiceError::InvalidRecord(_) => (StatusCode::UNPROCESSABLE_ENTITY, "INVALID_RECORD"),
            ServiceError::Store(_) => (StatusCode::SERVICE_UNAVAILABLE, "STORE_UNAVAILABLE"),
        };
        ApiError::new(status, code, message)
    }
}

fn bad_body(e: JsonRejection) -> ApiError {
    ApiError::new(StatusCode::BAD_REQUEST, "BAD_REQUEST", e.body_text())
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string()))?
        .map_err(ApiError::from)
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/moves", post(submit_move))
        .route("/api/leaderboard", get(leaderboard))
        .route("/api/records", post(post_record))
        .route("/api/health", get(health))
        .with_state(service)
}

async fn create_session(
    State(svc): State<Arc<Service>>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<Json<Value>, ApiError> {
    let Json(req) = body.map_err(bad_body)?;
    let (view, report) = blocking(move || svc.create_session(&req)).await?;
    Ok(Json(json!({
        "session_id": view.session_id,
        "view": view,
        "agent_moves": report.agent_moves,
        "reasoning": report.reasoning,
    })))
}

#[derive(Deserialize)]
struct MoveRequest {
    action: Action,
}

async fn submit_move(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    body: Result<Json<MoveRequest>, JsonRejection>,
) -> Result<Json<Value>, ApiError> {
    let Json(req) = body.map_err(bad_body)?;
    let (view, report, rated) = blocking(move || svc.submit_move(&id, req.action)).await?;
    let mut out = json!({
        "view": view,
        "agent_moves": report.agent_moves,
    });
    if let Some(r) = report.reasoning {
        out["reasoning"] = json!(r);
    }
    if let Some(o) = view.outcome {
        out["outcome"] = json!(o);
    }
    if let Some(r) = rated {
        out["record_id"] = json!(r.record_id);
        out["rating_delta"] = json!(r.rating_delta);
    }
    Ok(Json(out))
}

async fn get_session(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
) -> Result<Json<Value>, ApiError> {
    let view = svc.view(&id)?;
    Ok(Json(json!({ "view": view })))
}

#[derive(Deserialize)]
struct LeaderboardQuery {
    limit: Option<usize>,
}

async fn leaderboard(
    State(svc): State<Arc<Service>>,
    Query(q): Query<LeaderboardQuery>,
) -> Json<Value> {
    let entries = svc.leaderboard(q.limit.unwrap_or(DEFAULT_LEADERBOARD_LIMIT));
    Json(json!({ "entries": entries }))
}

#[derive(Deserialize)]
struct RecordRequest {
    record: GameRecord,
}

async fn post_record(
    State(svc): State<Arc<Service>>,
    body: Result<Json<RecordRequest>, JsonRejection>,
) -> Result<Json<Value>, ApiError> {
    let Json(req) = body.map_err(bad_body)?;
    let outcome = blocking(move || svc.record_result(req.record)).await?;
    Ok(Json(json!({
        "record_id": outcome.record_id,
        "rating_delta": outcome.rating_delta,
        "duplicate": outcome.duplicate,
    })))
}

async fn health(State(svc): State<Arc<Service>>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "sessions": svc.sessions().len(),
        "pending_records": svc.queue().len(),
    }))
}
