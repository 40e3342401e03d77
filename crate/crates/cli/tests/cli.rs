use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::process::{Child, Command, Output, Stdio};

use ponzilab_client::Client;
use ponzilab_core::commands;
use ponzilab_core::scenario::load_scenario;
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ponzilab"));
    c.env("RUST_LOG", "warn");
    c
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

struct Served(Child, String);

impl Served {
    fn start(extra: &[&str]) -> Self {
        let mut child = bin()
            .args(["serve", "--bind", "127.0.0.1:0"])
            .args(extra)
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .unwrap();
        let url = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap()
            .to_owned();
        Served(child, url)
    }
}

impl Drop for Served {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn simulate_writes_the_series_csv() {
    let path = scenario("bounded_pool.toml");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("series.csv");
    stdout(&run(&[
        "simulate",
        path.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]));
    let written = std::fs::read_to_string(&out).unwrap();
    let want = commands::simulate(&load_scenario(&path).unwrap())
        .unwrap()
        .csv;
    assert_eq!(written, want);
    assert!(written.trim_end().ends_with("Yellow"));
}

#[test]
fn scan_reports_viable_lock_ups() {
    let dir = tempfile::tempdir().unwrap();
    let plot = dir.path().join("plot.json");
    let csv = stdout(&run(&[
        "scan",
        scenario("bounded_pool.toml").to_str().unwrap(),
        "--plot-data",
        plot.to_str().unwrap(),
    ]));
    let viable: Vec<u32> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|f| f[0] == "0.03" && f[2] == "true")
        .map(|f| f[1].parse().unwrap())
        .collect();
    assert_eq!(viable, vec![1, 2, 3, 4, 5, 6]);
    let heat: Value = serde_json::from_str(&std::fs::read_to_string(plot).unwrap()).unwrap();
    assert_eq!(heat["lock_ups"].as_array().unwrap().len(), 12);
    assert_eq!(heat["labels"][3][6], "Red");
}

#[test]
fn critical_prints_json() {
    let report: Value = serde_json::from_str(&stdout(&run(&[
        "critical",
        scenario("geometric.toml").to_str().unwrap(),
    ])))
    .unwrap();
    let t = report["formula"]["t_peak"]["at"].as_f64().unwrap();
    assert!((t - 66.7).abs() < 0.1);
}

#[test]
fn invalid_config_fails_with_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(scenario("bounded_pool.toml"))
        .unwrap()
        .replace("pool = 1000.0", "pool = 5.0");
    std::fs::write(&bad, text).unwrap();
    let o = run(&["simulate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    let record: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(record["error"]["kind"], "invalid_parameter");
    assert_eq!(record["error"]["violations"][0]["field"], "demography.pool");

    let o = run(&[
        "simulate",
        dir.path().join("missing.toml").to_str().unwrap(),
    ]);
    assert_ne!(o.status.code(), Some(0));
    let record: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(record["error"]["kind"], "invalid_argument");
}

#[test]
fn unreachable_server_is_reported() {
    let o = run(&[
        "--server",
        "http://127.0.0.1:9",
        "simulate",
        scenario("hump.toml").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
    let record: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(record["error"]["kind"], "transport_error");
}

#[test]
fn server_mode_output_is_byte_identical() {
    let server = Served::start(&[]);
    let cases = [
        ("simulate", "bounded_pool.toml", "csv"),
        ("simulate", "nssir.toml", "json"),
        ("scan", "bounded_pool.toml", "csv"),
        ("chain", "chain.toml", "csv"),
        ("chain", "chain.toml", "json"),
        ("continuum", "continuum.toml", "csv"),
        ("critical", "hump.toml", "csv"),
    ];
    for (verb, file, format) in cases {
        let path = scenario(file);
        let args = [verb, path.to_str().unwrap(), "--format", format];
        let local = stdout(&run(&args));
        let mut remote_args = vec!["--server", server.1.as_str()];
        remote_args.extend(args);
        let remote = stdout(&run(&remote_args));
        assert_eq!(local, remote, "{verb} {file} {format}");
    }
}

#[test]
fn chain_log_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("chains.jsonl");
    let log = log.to_str().unwrap();
    let path = scenario("chain.toml");
    let first = {
        let server = Served::start(&["--chain-log", log]);
        stdout(&run(&[
            "--server",
            &server.1,
            "chain",
            path.to_str().unwrap(),
        ]))
    };
    let lines = std::fs::read_to_string(log).unwrap();
    let id = serde_json::from_str::<Value>(lines.lines().next().unwrap()).unwrap()["id"]
        .as_str()
        .unwrap()
        .to_owned();
    assert_eq!(lines.lines().count(), 5);

    let server = Served::start(&["--chain-log", log]);
    let rt = tokio::runtime::Runtime::new().unwrap();
    let view = rt
        .block_on(Client::new(server.1.clone()).chain(&id))
        .unwrap();
    assert_eq!(view.result.runs.len(), 4);
    let local = stdout(&run(&["chain", path.to_str().unwrap()]));
    assert_eq!(first, local);
}
