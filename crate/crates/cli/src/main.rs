mod backend;

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use backend::{Backend, Failure, Outcome};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ponzilab_client::Client;
use ponzilab_core::commands::to_json;
use ponzilab_core::criticality::{Light, NpgSurface};
use ponzilab_core::export::{chain_csv, continuum_csv, surface_csv};
use ponzilab_core::scenario::{load_scenario, ScenarioConfig};
use ponzilab_service::AppState;
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "ponzilab",
    version,
    about = "Simulate pooled-income investment schemes"
)]
struct Cli {
    /// Send the verb to a running service instead of computing in-process.
    #[arg(long, global = true, value_name = "URL")]
    server: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Population and capital series up to termination or collapse.
    Simulate(Output),
    /// Viability grid over market rates and lock-ups from the [scan] block.
    Scan {
        #[command(flatten)]
        output: Output,
        /// Also write a heatmap-ready JSON matrix here.
        #[arg(long, value_name = "FILE")]
        plot_data: Option<PathBuf>,
    },
    /// Sequence of runs, each seeded with the previous terminal capital.
    Chain(Output),
    /// Sampled continuous-time model.
    Continuum(Output),
    /// Peak, collapse and termination times.
    Critical(Output),
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Append-only log of chain sessions, replayed on start.
        #[arg(long, value_name = "FILE")]
        chain_log: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Output {
    /// Scenario file (TOML).
    config: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(short, long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Serialize)]
struct Heatmap<'a> {
    market_rates: &'a [f64],
    lock_ups: &'a [u32],
    viable: &'a [Vec<bool>],
    labels: Vec<Vec<Option<Light>>>,
}

fn heatmap(s: &NpgSurface) -> Heatmap<'_> {
    Heatmap {
        market_rates: &s.axis_i,
        lock_ups: &s.axis_t,
        viable: &s.viable,
        labels: s
            .cells
            .iter()
            .map(|row| row.iter().map(|c| c.label).collect())
            .collect(),
    }
}

fn write_to(path: Option<&Path>, text: &str) -> Outcome<()> {
    let res = match path {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| format!("cannot write {}: {e}", p.display()))
        }
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| e.to_string()),
    };
    res.map_err(Failure::Io)
}

fn load(out: &Output) -> Outcome<ScenarioConfig> {
    Ok(load_scenario(&out.config)?)
}

fn render<T: Serialize>(format: Format, value: &T, csv: impl FnOnce(&T) -> String) -> String {
    match format {
        Format::Csv => csv(value),
        Format::Json => to_json(value),
    }
}

async fn run(cli: Cli) -> Outcome<()> {
    let backend = match &cli.server {
        Some(url) => Backend::Remote(Client::new(url.clone())),
        None => Backend::Local,
    };
    match cli.command {
        Command::Simulate(out) => {
            let result = backend.simulate(&load(&out)?).await?;
            let text = render(out.format, &result, |r| r.csv.clone());
            write_to(out.out.as_deref(), &text)
        }
        Command::Scan {
            output: out,
            plot_data,
        } => {
            let req = load(&out)?.scan_request()?;
            let surface = backend.scan(&req).await?;
            if let Some(p) = plot_data {
                write_to(Some(&p), &to_json(&heatmap(&surface)))?;
            }
            write_to(
                out.out.as_deref(),
                &render(out.format, &surface, surface_csv),
            )
        }
        Command::Chain(out) => {
            let result = backend.chain(&load(&out)?).await?;
            write_to(out.out.as_deref(), &render(out.format, &result, chain_csv))
        }
        Command::Continuum(out) => {
            let result = backend.continuum(&load(&out)?).await?;
            write_to(
                out.out.as_deref(),
                &render(out.format, &result, continuum_csv),
            )
        }
        Command::Critical(out) => {
            let report = backend.critical(&load(&out)?).await?;
            write_to(out.out.as_deref(), &to_json(&report))
        }
        Command::Serve { bind, chain_log } => {
            let state = match &chain_log {
                Some(p) => AppState::with_chain_log(p)
                    .map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?,
                None => AppState::default(),
            };
            let listener = tokio::net::TcpListener::bind(bind)
                .await
                .map_err(|e| Failure::Io(format!("cannot bind {bind}: {e}")))?;
            let addr = listener
                .local_addr()
                .map_err(|e| Failure::Io(e.to_string()))?;
            println!("listening on http://{addr}");
            let _ = std::io::stdout().flush();
            ponzilab_service::serve_on(listener, state, async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Failure::Io(e.to_string()))
        }
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprint!("{}", to_json(&f.record()));
            ExitCode::from(f.exit_code())
        }
    }
}
