//! HTTP service.
//!
//! | method | path         | body                     | reply               |
//! |--------|--------------|--------------------------|---------------------|
//! | GET    | `/health`    |                          | `ok`                |
//! | GET    | `/model`     |                          | [`ModelInfo`]       |
//! | POST   | `/harmonize` | [`HarmonizeRequest`]     | [`HarmonizeResponse`] |
//! | POST   | `/evaluate`  | harmonization or list    | `MetricReport`      |
//!
//! Malformed bodies get 400 with `{"error", "path"}`; chords outside the
//! vocabulary get 422. The model is loaded once and shared read-only;
//! sampling runs on the blocking pool with per-request state only.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mharm::nn::Checkpoint;
use serde_json::json;

use crate::wire::{
    handle_evaluate, handle_harmonize, model_info, parse_body, parse_evaluate, ApiError, HarmonizeRequest,
};

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match &self {
            ApiError::BadRequest { path, message } => {
                (StatusCode::BAD_REQUEST, json!({ "error": message, "path": path }))
            }
            ApiError::Unprocessable(m) => (StatusCode::UNPROCESSABLE_ENTITY, json!({ "error": m })),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": m })),
        };
        (status, Json(body)).into_response()
    }
}

pub fn router(model: Arc<Checkpoint>) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/model", get(model_route))
        .route("/harmonize", post(harmonize_route))
        .route("/evaluate", post(evaluate_route))
        .with_state(model)
}

async fn model_route(State(model): State<Arc<Checkpoint>>) -> Response {
    Json(model_info(&model)).into_response()
}

async fn harmonize_route(State(model): State<Arc<Checkpoint>>, body: Bytes) -> Result<Response, ApiError> {
    let req: HarmonizeRequest = parse_body(&body)?;
    let reply = tokio::task::spawn_blocking(move || handle_harmonize(&model, &req))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(Json(reply).into_response())
}

async fn evaluate_route(body: Bytes) -> Result<Response, ApiError> {
    let pieces = parse_evaluate(&body)?;
    let report = tokio::task::spawn_blocking(move || handle_evaluate(pieces))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(Json(report).into_response())
}

/// Binds `addr` and serves until interrupted.
pub async fn serve(model: Checkpoint, addr: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(model)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
