use ponzilab_client::{Client, ClientError};
use ponzilab_core::api::{ErrorBody, ErrorResponse};
use ponzilab_core::commands::{self, CriticalReport, SimulateOutput};
use ponzilab_core::continuum::ContinuumRun;
use ponzilab_core::criticality::{NpgSurface, ScanRequest};
use ponzilab_core::recurrent::{ChainResult, RunDraft};
use ponzilab_core::scenario::ScenarioConfig;
use ponzilab_core::ModelError;

/// Where a verb is evaluated.
pub enum Backend {
    Local,
    Remote(Client),
}

#[derive(Debug)]
pub enum Failure {
    Model(ModelError),
    Remote(ClientError),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Model(ModelError::NumericFailure { .. }) => 3,
            Failure::Model(_) => 2,
            Failure::Remote(ClientError::Api { body, .. })
                if body.error.kind == "numeric_failure" =>
            {
                3
            }
            Failure::Remote(ClientError::Api { .. }) => 2,
            Failure::Remote(_) => 4,
            Failure::Io(_) => 1,
        }
    }

    pub fn record(&self) -> ErrorResponse {
        match self {
            Failure::Model(e) => ErrorResponse {
                error: ErrorBody::from(e),
                state: None,
            },
            Failure::Remote(ClientError::Api { body, .. }) => (**body).clone(),
            Failure::Remote(e) => ErrorResponse {
                error: ErrorBody::new("transport_error", e.to_string()),
                state: None,
            },
            Failure::Io(m) => ErrorResponse {
                error: ErrorBody::new("io_error", m.clone()),
                state: None,
            },
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::Model(e)
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        Failure::Remote(e)
    }
}

pub type Outcome<T> = Result<T, Failure>;

impl Backend {
    pub async fn simulate(&self, cfg: &ScenarioConfig) -> Outcome<SimulateOutput> {
        match self {
            Backend::Local => Ok(commands::simulate(cfg)?),
            Backend::Remote(c) => Ok(c.simulate(cfg).await?),
        }
    }

    pub async fn scan(&self, req: &ScanRequest) -> Outcome<NpgSurface> {
        match self {
            Backend::Local => Ok(commands::scan(req)?),
            Backend::Remote(c) => Ok(c.scan(req).await?),
        }
    }

    pub async fn continuum(&self, cfg: &ScenarioConfig) -> Outcome<ContinuumRun> {
        match self {
            Backend::Local => Ok(commands::continuum(cfg)?),
            Backend::Remote(c) => Ok(c.continuum(cfg).await?),
        }
    }

    pub async fn critical(&self, cfg: &ScenarioConfig) -> Outcome<CriticalReport> {
        match self {
            Backend::Local => Ok(commands::critical(cfg)?),
            Backend::Remote(c) => Ok(c.critical(cfg).await?),
        }
    }

    /// Remote chains are stepped run by run through a session.
    pub async fn chain(&self, cfg: &ScenarioConfig) -> Outcome<ChainResult> {
        match self {
            Backend::Local => Ok(commands::chain(cfg)?),
            Backend::Remote(c) => {
                cfg.validate()?;
                let (specs, inherit) = cfg.chain_specs()?;
                let session = c.chain_start(inherit).await?;
                for spec in &specs {
                    if c.chain_step(&session.id, &RunDraft::from(spec))
                        .await?
                        .halted
                    {
                        break;
                    }
                }
                Ok(c.chain(&session.id).await?.result)
            }
        }
    }
}
