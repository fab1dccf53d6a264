//! JSON-over-HTTP front for [`DraftService`].

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use draftlab_core::service::{CreateDraft, DraftService, ErrorKind, ServiceError, SubmitPick};
use serde::Deserialize;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self.0.kind() {
            ErrorKind::NotFound => StatusCode::NOT_FOUND,
            ErrorKind::BadRequest => StatusCode::BAD_REQUEST,
            ErrorKind::Conflict => StatusCode::CONFLICT,
            ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(self.0)).into_response()
    }
}

fn bad_body(message: String) -> ApiError {
    ApiError(ServiceError {
        kind: Some(ErrorKind::BadRequest),
        code: "bad_request".into(),
        message,
        legal_picks: None,
    })
}

type ApiResult<T> = Result<T, ApiError>;
type Shared = Arc<DraftService>;

async fn list_sets(State(svc): State<Shared>) -> impl IntoResponse {
    Json(svc.list_sets())
}

async fn create_draft(
    State(svc): State<Shared>,
    body: Result<Json<CreateDraft>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(req) = body.map_err(|e| bad_body(e.body_text()))?;
    let view = svc.create_draft(req)?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_state(State(svc): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.get_state(&id)?))
}

async fn submit_pick(
    State(svc): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<SubmitPick>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(pick) = body.map_err(|e| bad_body(e.body_text()))?;
    let view = tokio::task::spawn_blocking(move || svc.submit_pick(&id, pick))
        .await
        .map_err(|e| bad_body(e.to_string()))??;
    Ok(Json(view))
}

#[derive(Deserialize)]
struct AgentQuery {
    agent: String,
}

async fn get_suggestions(
    State(svc): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<AgentQuery>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.get_suggestions(&id, &q.agent)?))
}

async fn get_log(State(svc): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let body = svc.get_log_jsonl(&id)?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body))
}

/// All routes. `origins` restricts CORS; empty allows any origin.
pub fn router(service: Shared, origins: &[String]) -> Router {
    let cors = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    let cors = if origins.is_empty() {
        cors.allow_origin(Any)
    } else {
        let list: Vec<HeaderValue> = origins.iter().filter_map(|o| o.parse().ok()).collect();
        cors.allow_origin(AllowOrigin::list(list))
    };
    Router::new()
        .route("/sets", get(list_sets))
        .route("/drafts", post(create_draft))
        .route("/drafts/{id}/state", get(get_state))
        .route("/drafts/{id}/pick", post(submit_pick))
        .route("/drafts/{id}/suggestions", get(get_suggestions))
        .route("/drafts/{id}/log", get(get_log))
        .layer(cors)
        .with_state(service)
}
