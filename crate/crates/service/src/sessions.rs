//! Chain sessions and their append-only log.
//!
//! Each log line is one JSON event. Replaying the file re-simulates every
//! recorded run, which is deterministic, so a restarted service ends up with
//! the same sessions it had before.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use ponzilab_core::api::ChainView;
use ponzilab_core::criticality::Light;
use ponzilab_core::recurrent::{Chain, RunDraft, RunRecord, RunSpec};
use serde::{Deserialize, Serialize};

pub type Session = Arc<tokio::sync::Mutex<Chain>>;

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Start {
        id: String,
        inherit: bool,
    },
    Step {
        id: String,
        spec: RunSpec,
        label: Light,
        k_end: f64,
        t_star: f64,
        offset: f64,
    },
}

struct ChainLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl ChainLog {
    fn append(&self, event: &Event) -> io::Result<()> {
        let mut line = serde_json::to_string(event).map_err(io::Error::other)?;
        line.push('\n');
        let mut f = self.file.lock();
        f.write_all(line.as_bytes())?;
        f.flush()
    }
}

#[derive(Default)]
pub struct Sessions {
    chains: RwLock<HashMap<String, Session>>,
    log: Option<ChainLog>,
}

impl Sessions {
    /// Opens (or creates) the log at `path` and replays it.
    pub fn with_log(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut chains = HashMap::new();
        if path.exists() {
            replay(&path, &mut chains)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        tracing::info!(path = %path.display(), sessions = chains.len(), "chain log opened");
        Ok(Sessions {
            chains: RwLock::new(chains),
            log: Some(ChainLog {
                path,
                file: Mutex::new(file),
            }),
        })
    }

    pub fn log_path(&self) -> Option<&Path> {
        self.log.as_ref().map(|l| l.path.as_path())
    }

    pub fn start(&self, inherit: bool) -> io::Result<(String, Session)> {
        let id = uuid::Uuid::new_v4().to_string();
        if let Some(log) = &self.log {
            log.append(&Event::Start {
                id: id.clone(),
                inherit,
            })?;
        }
        let session = Arc::new(tokio::sync::Mutex::new(Chain::new(inherit)));
        self.chains.write().insert(id.clone(), session.clone());
        Ok((id, session))
    }

    pub fn get(&self, id: &str) -> Option<Session> {
        self.chains.read().get(id).cloned()
    }

    /// Records a completed step; call while holding the session lock.
    pub fn record(&self, id: &str, run: &RunRecord) -> io::Result<()> {
        match &self.log {
            Some(log) => log.append(&Event::Step {
                id: id.to_owned(),
                spec: run.spec.clone(),
                label: run.light.label,
                k_end: run.light.k_end,
                t_star: run.t_star,
                offset: run.offset,
            }),
            None => Ok(()),
        }
    }
}

pub fn view(id: &str, chain: &Chain) -> ChainView {
    ChainView {
        id: id.to_owned(),
        inherit: chain.inherit,
        halted: chain.is_halted(),
        next_endowment: chain.next_endowment(),
        result: chain.result(),
    }
}

fn replay(path: &Path, chains: &mut HashMap<String, Session>) -> io::Result<()> {
    let mut restored: HashMap<String, Chain> = HashMap::new();
    for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: Event = match serde_json::from_str(&line) {
            Ok(e) => e,
            Err(e) => {
                tracing::warn!(line = n + 1, error = %e, "skipping unreadable chain log entry");
                continue;
            }
        };
        match event {
            Event::Start { id, inherit } => {
                restored.insert(id, Chain::new(inherit));
            }
            Event::Step {
                id, spec, k_end, ..
            } => {
                let Some(chain) = restored.get_mut(&id) else {
                    tracing::warn!(line = n + 1, %id, "step for unknown chain");
                    continue;
                };
                match chain.step(&RunDraft::from(&spec)) {
                    Ok(run) if run.light.k_end.to_bits() != k_end.to_bits() => {
                        tracing::warn!(%id, logged = k_end, replayed = run.light.k_end, "replay diverged");
                    }
                    Ok(_) => {}
                    Err(e) => tracing::warn!(%id, error = %e, "replay step failed"),
                }
            }
        }
    }
    chains.extend(
        restored
            .into_iter()
            .map(|(id, c)| (id, Arc::new(tokio::sync::Mutex::new(c)))),
    );
    Ok(())
}
