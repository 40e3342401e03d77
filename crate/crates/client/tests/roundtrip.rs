use ponzilab_client::{Client, ClientError};
use ponzilab_core::commands;
use ponzilab_core::criticality::Light;
use ponzilab_core::recurrent::{chain_runs, RunDraft};
use ponzilab_core::scenario::{parse_scenario, ScenarioConfig};
use ponzilab_service::AppState;
use reqwest::StatusCode;
use tokio::sync::oneshot;

const CONFIG: &str = r#"
schema_version = 1
model = "quasi_logistic"

[demography]
n0 = 10.0
pool = 1000.0
growth = 0.1
lock_up = 6

[capital]
promoter_endowment = 100.0
deposit = 3.0
coupon_rate = 0.052
market_rate = 0.03

[continuum]
lock_up = 6.0

[[chain.runs]]

[[chain.runs]]
lock_up = 5
"#;

struct Server {
    client: Client,
    stop: Option<oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl Server {
    async fn start() -> Self {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let (stop, rx) = oneshot::channel::<()>();
        let task = tokio::spawn(ponzilab_service::serve_on(
            listener,
            AppState::default(),
            async {
                let _ = rx.await;
            },
        ));
        Server {
            client: Client::new(format!("http://{addr}/")),
            stop: Some(stop),
            task,
        }
    }

    async fn shutdown(mut self) {
        let _ = self.stop.take().unwrap().send(());
        self.task.await.unwrap().unwrap();
    }
}

fn config() -> ScenarioConfig {
    parse_scenario(CONFIG).unwrap()
}

#[tokio::test]
async fn verbs_match_in_process_results() {
    let server = Server::start().await;
    let c = &server.client;
    assert_eq!(c.health().await.unwrap().status, "ok");

    let cfg = config();
    let remote = c.simulate(&cfg).await.unwrap();
    assert_eq!(remote.csv, commands::simulate(&cfg).unwrap().csv);
    assert_eq!(remote.export.light.label, Light::Yellow);

    let mut cont = cfg.clone();
    cont.model = ponzilab_core::scenario::ModelKind::Continuum;
    assert_eq!(
        c.continuum(&cont).await.unwrap(),
        commands::continuum(&cont).unwrap()
    );
    assert_eq!(
        c.critical(&cfg).await.unwrap(),
        commands::critical(&cfg).unwrap()
    );
    server.shutdown().await;
}

#[tokio::test]
async fn stepping_a_session_reproduces_the_batch_chain() {
    let server = Server::start().await;
    let c = &server.client;
    let (specs, inherit) = config().chain_specs().unwrap();
    let view = c.chain_start(inherit).await.unwrap();
    for spec in &specs {
        c.chain_step(&view.id, &RunDraft::from(spec)).await.unwrap();
    }
    let remote = c.chain(&view.id).await.unwrap();
    assert_eq!(remote.result, chain_runs(&specs, inherit).unwrap());
    server.shutdown().await;
}

#[tokio::test]
async fn errors_carry_the_service_record() {
    let server = Server::start().await;
    let c = &server.client;
    let err = c.chain("nope").await.unwrap_err();
    assert_eq!(err.status(), Some(StatusCode::NOT_FOUND));

    let mut cfg = config();
    cfg.capital.deposit = 0.0;
    match c.simulate(&cfg).await.unwrap_err() {
        ClientError::Api { status, body } => {
            assert_eq!(status, StatusCode::BAD_REQUEST);
            assert_eq!(body.error.violations[0].field, "capital.deposit");
        }
        other => panic!("unexpected {other}"),
    }
    server.shutdown().await;

    let offline = Client::new("http://127.0.0.1:9");
    assert!(matches!(
        offline.health().await,
        Err(ClientError::Transport(_))
    ));
}
