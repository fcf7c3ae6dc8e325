//! HTTP/JSON front of the publication engine.
//!
//! | method | path           | body                 | reply                    |
//! |--------|----------------|----------------------|--------------------------|
//! | GET    | `/health`      |                      | `{"status":"ok"}`        |
//! | GET    | `/options`     |                      | engine options           |
//! | POST   | `/users`       | `{"user"}`           | `{"created"}`            |
//! | POST   | `/friends`     | `{"a","b"}`          | `{"created"}`            |
//! | POST   | `/preferences` | preference           | `{"pid"}`                |
//! | POST   | `/publish`     | resource             | publication decision     |
//! | POST   | `/graph`       | resource             | co-location adjacency    |
//! | POST   | `/verify`      | `{"semantic"}`       | `{"clean","violations"}` |
//! | GET    | `/store`       |                      | full state dump          |
//!
//! Errors come back as `{"error": "..."}` with a 4xx status.

use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use tokio::net::TcpListener;

use coloc_core::api::{Created, ErrorBody, NewFriendship, NewUser, PrefAdded, VerifyReport};
use coloc_core::engine::EngineError;
use coloc_core::model::StateDump;
use coloc_core::trace::{verify_dump, ReplaySettings, VerifyRequest};
use coloc_core::{Engine, EngineOptions, PrivacyPreference, PublicationDecision, Resource};

pub struct AppState {
    pub engine: Engine,
    pub settings: ReplaySettings,
}

pub type Shared = Arc<AppState>;

pub struct ApiError(StatusCode, String);

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorBody { error: self.1 })).into_response()
    }
}

fn internal(e: tokio::task::JoinError) -> ApiError {
    ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/options", get(options))
        .route("/users", post(add_user))
        .route("/friends", post(add_friend))
        .route("/preferences", post(add_preference))
        .route("/publish", post(publish))
        .route("/graph", post(graph))
        .route("/verify", post(verify))
        .route("/store", get(store))
        .with_state(state)
}

pub fn app(settings: ReplaySettings) -> Router {
    router(Arc::new(AppState {
        engine: Engine::new(settings.options),
        settings,
    }))
}

pub async fn serve(listener: TcpListener, settings: ReplaySettings) -> std::io::Result<()> {
    axum::serve(listener, app(settings)).await
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn options(State(s): State<Shared>) -> Json<EngineOptions> {
    Json(*s.engine.options())
}

async fn add_user(State(s): State<Shared>, Json(body): Json<NewUser>) -> Result<Json<Created>, ApiError> {
    let created = s.engine.add_user(body.user)?;
    Ok(Json(Created { created }))
}

async fn add_friend(State(s): State<Shared>, Json(body): Json<NewFriendship>) -> Result<Json<Created>, ApiError> {
    let created = s.engine.add_friend(body.a, body.b)?;
    Ok(Json(Created { created }))
}

async fn add_preference(
    State(s): State<Shared>,
    Json(p): Json<PrivacyPreference>,
) -> Result<Json<PrefAdded>, ApiError> {
    let pid = p.pid.clone();
    s.engine.add_preference(p)?;
    Ok(Json(PrefAdded { pid }))
}

async fn publish(State(s): State<Shared>, Json(r): Json<Resource>) -> Result<Json<PublicationDecision>, ApiError> {
    let decision = tokio::task::spawn_blocking(move || s.engine.publish(&r))
        .await
        .map_err(internal)?;
    tracing::debug!(rid = %decision.rid, outcome = ?decision.outcome, retries = decision.retries, "publish");
    Ok(Json(decision))
}

async fn graph(State(s): State<Shared>, Json(r): Json<Resource>) -> Json<serde_json::Value> {
    Json(s.engine.graph_for(&r).adjacency_json())
}

async fn verify(State(s): State<Shared>, Json(req): Json<VerifyRequest>) -> Result<Json<VerifyReport>, ApiError> {
    let violations = tokio::task::spawn_blocking(move || verify_dump(&s.engine.dump(), &s.settings, req.semantic))
        .await
        .map_err(internal)?;
    Ok(Json(VerifyReport {
        clean: violations.is_empty(),
        violations,
    }))
}

async fn store(State(s): State<Shared>) -> Json<StateDump> {
    Json(s.engine.dump())
}
