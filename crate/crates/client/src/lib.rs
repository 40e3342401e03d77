//! Thin async client for the ponzilab HTTP service.

use ponzilab_core::api::{
    ChainStartRequest, ChainStepRequest, ChainStepResponse, ChainView, ErrorResponse, Health,
};
use ponzilab_core::commands::{CriticalReport, SimulateOutput};
use ponzilab_core::continuum::ContinuumRun;
use ponzilab_core::criticality::{NpgSurface, ScanRequest};
use ponzilab_core::recurrent::RunDraft;
use ponzilab_core::scenario::ScenarioConfig;
use reqwest::{Method, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    /// The service answered with an error record.
    #[error("service returned {status}: {}", .body.error.message)]
    Api {
        status: StatusCode,
        body: Box<ErrorResponse>,
    },
    #[error("unexpected {status} response: {text}")]
    Unexpected { status: StatusCode, text: String },
    #[error("transport error: {0}")]
    Transport(#[from] reqwest::Error),
}

impl ClientError {
    pub fn status(&self) -> Option<StatusCode> {
        match self {
            ClientError::Api { status, .. } | ClientError::Unexpected { status, .. } => {
                Some(*status)
            }
            ClientError::Transport(e) => e.status(),
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self::with_http(base, reqwest::Client::new())
    }

    pub fn with_http(base: impl Into<String>, http: reqwest::Client) -> Self {
        let base = base.into().trim_end_matches('/').to_owned();
        Client { base, http }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn send<B: Serialize, T: DeserializeOwned>(
        &self,
        method: Method,
        path: &str,
        body: Option<&B>,
    ) -> Result<T> {
        let mut req = self.http.request(method, format!("{}{path}", self.base));
        if let Some(b) = body {
            req = req.json(b);
        }
        let resp = req.send().await?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let text = resp.text().await?;
        match serde_json::from_str::<ErrorResponse>(&text) {
            Ok(body) => Err(ClientError::Api {
                status,
                body: Box::new(body),
            }),
            Err(_) => Err(ClientError::Unexpected { status, text }),
        }
    }

    pub async fn health(&self) -> Result<Health> {
        self.send::<(), _>(Method::GET, "/health", None).await
    }

    pub async fn simulate(&self, cfg: &ScenarioConfig) -> Result<SimulateOutput> {
        self.send(Method::POST, "/simulate", Some(cfg)).await
    }

    pub async fn scan(&self, req: &ScanRequest) -> Result<NpgSurface> {
        self.send(Method::POST, "/scan", Some(req)).await
    }

    pub async fn continuum(&self, cfg: &ScenarioConfig) -> Result<ContinuumRun> {
        self.send(Method::POST, "/continuum", Some(cfg)).await
    }

    pub async fn critical(&self, cfg: &ScenarioConfig) -> Result<CriticalReport> {
        self.send(Method::POST, "/critical", Some(cfg)).await
    }

    pub async fn chain_start(&self, inherit: bool) -> Result<ChainView> {
        self.send(
            Method::POST,
            "/chain/start",
            Some(&ChainStartRequest { inherit }),
        )
        .await
    }

    pub async fn chain_step(&self, id: &str, run: &RunDraft) -> Result<ChainStepResponse> {
        let body = ChainStepRequest {
            id: id.to_owned(),
            run: run.clone(),
        };
        self.send(Method::POST, "/chain/step", Some(&body)).await
    }

    pub async fn chain(&self, id: &str) -> Result<ChainView> {
        self.send::<(), _>(Method::GET, &format!("/chain/{id}"), None)
            .await
    }
}
