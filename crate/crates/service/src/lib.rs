//! HTTP front end for the model commands and interactive chain sessions.

mod sessions;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ponzilab_core::api::{
    ChainStartRequest, ChainStepRequest, ChainStepResponse, ChainView, ErrorBody, ErrorResponse,
    Health,
};
use ponzilab_core::commands::{self, CriticalReport, SimulateOutput};
use ponzilab_core::continuum::ContinuumRun;
use ponzilab_core::criticality::{NpgSurface, ScanRequest};
use ponzilab_core::scenario::{ScenarioConfig, SCHEMA_VERSION};
use ponzilab_core::ModelError;

pub use sessions::Sessions;

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<Sessions>,
}

impl AppState {
    pub fn new(sessions: Sessions) -> Self {
        AppState {
            sessions: Arc::new(sessions),
        }
    }

    /// State backed by an append-only chain log at `path`.
    pub fn with_chain_log(path: impl AsRef<std::path::Path>) -> std::io::Result<Self> {
        Ok(Self::new(Sessions::with_log(path)?))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorResponse,
}

impl ApiError {
    fn new(status: StatusCode, error: ErrorBody) -> Self {
        ApiError {
            status,
            body: ErrorResponse { error, state: None },
        }
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        let status = match e {
            ModelError::NumericFailure { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, ErrorBody::from(&e))
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            ErrorBody::new("parse_error", r.body_text()),
        )
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        tracing::error!(error = %e, "chain log write failed");
        ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            ErrorBody::new("io_error", e.to_string()),
        )
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Runs a CPU-bound command off the async workers.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> ponzilab_core::Result<T> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => Ok(Json(r?)),
        Err(e) => Err(ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            ErrorBody::new("internal", e.to_string()),
        )),
    }
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        schema_version: SCHEMA_VERSION,
    })
}

async fn simulate(body: Result<Json<ScenarioConfig>, JsonRejection>) -> ApiResult<SimulateOutput> {
    let Json(cfg) = body?;
    blocking(move || commands::simulate(&cfg)).await
}

async fn scan(body: Result<Json<ScanRequest>, JsonRejection>) -> ApiResult<NpgSurface> {
    let Json(req) = body?;
    blocking(move || commands::scan(&req)).await
}

async fn continuum(body: Result<Json<ScenarioConfig>, JsonRejection>) -> ApiResult<ContinuumRun> {
    let Json(cfg) = body?;
    blocking(move || commands::continuum(&cfg)).await
}

async fn critical(body: Result<Json<ScenarioConfig>, JsonRejection>) -> ApiResult<CriticalReport> {
    let Json(cfg) = body?;
    blocking(move || commands::critical(&cfg)).await
}

async fn chain_start(
    State(app): State<AppState>,
    body: Option<Json<ChainStartRequest>>,
) -> Result<(StatusCode, Json<ChainView>), ApiError> {
    let inherit = body.map(|Json(b)| b.inherit).unwrap_or(true);
    let (id, session) = app.sessions.start(inherit)?;
    let chain = session.lock().await;
    tracing::info!(%id, inherit, "chain started");
    Ok((StatusCode::CREATED, Json(sessions::view(&id, &chain))))
}

fn unknown(id: &str) -> ApiError {
    ApiError::new(
        StatusCode::NOT_FOUND,
        ErrorBody::new("not_found", format!("no chain session {id}")),
    )
}

async fn chain_step(
    State(app): State<AppState>,
    body: Result<Json<ChainStepRequest>, JsonRejection>,
) -> ApiResult<ChainStepResponse> {
    let Json(ChainStepRequest { id, run }) = body?;
    let session = app.sessions.get(&id).ok_or_else(|| unknown(&id))?;
    let mut chain = session.lock_owned().await;
    if chain.is_halted() {
        let mut err = ApiError::new(
            StatusCode::CONFLICT,
            ErrorBody::new(
                "chain_halted",
                "the chain collapsed; no further runs are possible",
            ),
        );
        err.body.state = Some(sessions::view(&id, &chain));
        return Err(err);
    }
    let inherited_endowment = chain.next_endowment();
    let (chain, outcome) = tokio::task::spawn_blocking(move || {
        let outcome = chain.step(&run).cloned();
        (chain, outcome)
    })
    .await
    .map_err(|e| {
        ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            ErrorBody::new("internal", e.to_string()),
        )
    })?;
    let record = outcome?;
    app.sessions.record(&id, &record)?;
    tracing::info!(%id, index = chain.runs.len() - 1, label = record.light.label.as_str(), "chain stepped");
    Ok(Json(ChainStepResponse {
        id,
        index: chain.runs.len() - 1,
        run: record,
        inherited_endowment,
        next_endowment: chain.next_endowment(),
        halted: chain.is_halted(),
    }))
}

async fn chain_get(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<ChainView> {
    let session = app.sessions.get(&id).ok_or_else(|| unknown(&id))?;
    let chain = session.lock().await;
    Ok(Json(sessions::view(&id, &chain)))
}

async fn fallback() -> ApiError {
    ApiError::new(
        StatusCode::NOT_FOUND,
        ErrorBody::new("not_found", "no such route"),
    )
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/simulate", post(simulate))
        .route("/scan", post(scan))
        .route("/continuum", post(continuum))
        .route("/critical", post(critical))
        .route("/chain/start", post(chain_start))
        .route("/chain/step", post(chain_step))
        .route("/chain/{id}", get(chain_get))
        .fallback(fallback)
        .with_state(state)
}

/// Serves on an already bound listener until `shutdown` resolves.
pub async fn serve_on<F>(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: F,
) -> std::io::Result<()>
where
    F: std::future::Future<Output = ()> + Send + 'static,
{
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_on(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
