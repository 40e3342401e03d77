use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use ponzilab_core::api::{ChainStepResponse, ChainView, ErrorResponse, Health};
use ponzilab_core::commands::{self, SimulateOutput};
use ponzilab_core::criticality::{npg_scan, Light, NpgSurface, ScanRequest};
use ponzilab_core::recurrent::RunDraft;
use ponzilab_core::scenario::{parse_scenario, ScenarioConfig};
use ponzilab_service::{router, AppState};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use tower::ServiceExt;

fn base_config(lock: u32) -> ScenarioConfig {
    parse_scenario(&format!(
        r#"
schema_version = 1
model = "quasi_logistic"

[demography]
n0 = 10.0
pool = 1000.0
growth = 0.1
lock_up = {lock}

[capital]
promoter_endowment = 100.0
deposit = 3.0
coupon_rate = 0.052
market_rate = 0.03
"#
    ))
    .unwrap()
}

fn draft(lock: u32) -> RunDraft {
    let cfg = base_config(lock);
    RunDraft {
        n0: Some(10.0),
        pool: Some(1000.0),
        growth: Some(0.1),
        lock_up: Some(lock),
        promoter_endowment: Some(cfg.capital.promoter_endowment),
        deposit: Some(cfg.capital.deposit),
        coupon_rate: Some(cfg.capital.coupon_rate),
        market_rate: Some(cfg.capital.market_rate),
        ..RunDraft::default()
    }
}

async fn call(
    app: &AppState,
    method: &str,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Vec<u8>) {
    let builder = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => builder
            .header("content-type", "application/json")
            .body(Body::from(v.to_string()))
            .unwrap(),
        None => builder.body(Body::empty()).unwrap(),
    };
    let resp = router(app.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    (
        status,
        to_bytes(resp.into_body(), usize::MAX)
            .await
            .unwrap()
            .to_vec(),
    )
}

async fn call_json<T: DeserializeOwned>(
    app: &AppState,
    method: &str,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, T) {
    let (status, bytes) = call(app, method, uri, body).await;
    let parsed = serde_json::from_slice(&bytes)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&bytes)));
    (status, parsed)
}

#[tokio::test]
async fn health_reports_schema() {
    let (status, h): (_, Health) = call_json(&AppState::default(), "GET", "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(h.status, "ok");
    assert_eq!(h.schema_version, 1);
}

#[tokio::test]
async fn simulate_matches_in_process_command() {
    let cfg = base_config(7);
    let body = serde_json::to_value(&cfg).unwrap();
    let (status, out): (_, SimulateOutput) =
        call_json(&AppState::default(), "POST", "/simulate", Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    let local = commands::simulate(&cfg).unwrap();
    assert_eq!(out.csv, local.csv);
    assert_eq!(out, local);
    assert_eq!(out.export.light.label, Light::Red);
}

#[tokio::test]
async fn scan_matches_direct_scan() {
    let req = ScanRequest {
        n0: 10.0,
        pool: 1000.0,
        growth: 0.1,
        promoter_endowment: 100.0,
        deposit: 3.0,
        coupon_rate: 0.052,
        market_rates: vec![0.02, 0.03],
        lock_ups: (1..=12).collect(),
        n_star: 0.99,
    };
    let body = serde_json::to_value(&req).unwrap();
    let (status, surface): (_, NpgSurface) =
        call_json(&AppState::default(), "POST", "/scan", Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(surface, npg_scan(&req).unwrap());
    let viable: Vec<u32> = surface
        .axis_t
        .iter()
        .zip(&surface.viable[1])
        .filter(|(_, v)| **v)
        .map(|(t, _)| *t)
        .collect();
    assert_eq!(viable, (1..=6).collect::<Vec<_>>());
}

#[tokio::test]
async fn invalid_config_lists_fields() {
    let mut body = serde_json::to_value(base_config(5)).unwrap();
    body["demography"]["pool"] = json!(5.0);
    body["capital"]["deposit"] = json!(-1.0);
    let (status, err): (_, ErrorResponse) =
        call_json(&AppState::default(), "POST", "/simulate", Some(body)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err.error.kind, "invalid_parameter");
    let fields: Vec<_> = err
        .error
        .violations
        .iter()
        .map(|v| v.field.as_str())
        .collect();
    assert!(fields.contains(&"demography.pool"), "{fields:?}");
    assert!(fields.contains(&"capital.deposit"), "{fields:?}");
}

#[tokio::test]
async fn malformed_body_is_a_parse_error() {
    let (status, err): (_, ErrorResponse) = call_json(
        &AppState::default(),
        "POST",
        "/simulate",
        Some(json!({"model": "nope"})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err.error.kind, "parse_error");
}

#[tokio::test]
async fn unknown_session_is_404() {
    let app = AppState::default();
    let (status, err): (_, ErrorResponse) = call_json(&app, "GET", "/chain/missing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err.error.kind, "not_found");
    let body = json!({"id": "missing", "run": {}});
    let (status, _): (_, ErrorResponse) = call_json(&app, "POST", "/chain/step", Some(body)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn chain_session_inherits_and_locks_on_collapse() {
    let app = AppState::default();
    let (status, view): (_, ChainView) =
        call_json(&app, "POST", "/chain/start", Some(json!({"inherit": true}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = view.id;

    let step = |run: RunDraft| json!({"id": id, "run": run});
    let (status, first): (_, ChainStepResponse) =
        call_json(&app, "POST", "/chain/step", Some(step(draft(5)))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(first.run.light.label, Light::Green);
    assert_eq!(first.inherited_endowment, None);
    let k = first.next_endowment.unwrap();

    let (_, second): (_, ChainStepResponse) =
        call_json(&app, "POST", "/chain/step", Some(step(RunDraft::default()))).await;
    assert_eq!(second.inherited_endowment, Some(k));
    assert_eq!(second.run.spec.capital.promoter_endowment, k);

    let collapse = RunDraft {
        lock_up: Some(20),
        coupon_rate: Some(0.3),
        market_rate: Some(0.0),
        ..RunDraft::default()
    };
    let (_, third): (_, ChainStepResponse) =
        call_json(&app, "POST", "/chain/step", Some(step(collapse))).await;
    assert_eq!(third.run.light.label, Light::Red);
    assert!(third.halted);

    let (status, err): (_, ErrorResponse) =
        call_json(&app, "POST", "/chain/step", Some(step(RunDraft::default()))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err.error.kind, "chain_halted");
    let state = err.state.unwrap();
    assert!(state.halted);
    assert_eq!(state.result.runs.len(), 3);

    let (status, view): (_, ChainView) =
        call_json(&app, "GET", &format!("/chain/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view, state);
}

#[tokio::test]
async fn step_validation_errors_are_400() {
    let app = AppState::default();
    let (_, view): (_, ChainView) = call_json(&app, "POST", "/chain/start", None).await;
    let body = json!({"id": view.id, "run": {"n0": 10.0}});
    let (status, err): (_, ErrorResponse) =
        call_json(&app, "POST", "/chain/step", Some(body)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(!err.error.violations.is_empty());
    let (_, view): (_, ChainView) =
        call_json(&app, "GET", &format!("/chain/{}", view.id), None).await;
    assert!(view.result.runs.is_empty());
}

#[tokio::test]
async fn sessions_survive_restart_through_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("chains.jsonl");
    let before = {
        let app = AppState::with_chain_log(&log).unwrap();
        let (_, view): (_, ChainView) = call_json(&app, "POST", "/chain/start", None).await;
        for run in [
            draft(5),
            RunDraft::default(),
            RunDraft {
                lock_up: Some(6),
                ..RunDraft::default()
            },
        ] {
            let (status, _) = call(
                &app,
                "POST",
                "/chain/step",
                Some(json!({"id": view.id, "run": run})),
            )
            .await;
            assert_eq!(status, StatusCode::OK);
        }
        let (_, view): (_, ChainView) =
            call_json(&app, "GET", &format!("/chain/{}", view.id), None).await;
        view
    };
    let lines = std::fs::read_to_string(&log).unwrap();
    assert_eq!(lines.lines().count(), 4);

    let app = AppState::with_chain_log(&log).unwrap();
    let (status, after): (_, ChainView) =
        call_json(&app, "GET", &format!("/chain/{}", before.id), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(after, before);
}
