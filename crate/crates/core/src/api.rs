//! JSON bodies exchanged between the HTTP service and its clients.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Violation};
use crate::recurrent::{ChainResult, RunDraft, RunRecord};

/// Machine-readable error record, also printed by the CLI on failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}

impl ErrorBody {
    pub fn new(kind: impl Into<String>, message: impl Into<String>) -> Self {
        ErrorBody {
            kind: kind.into(),
            message: message.into(),
            violations: Vec::new(),
        }
    }
}

impl From<&ModelError> for ErrorBody {
    fn from(e: &ModelError) -> Self {
        ErrorBody {
            kind: e.kind().to_owned(),
            message: e.to_string(),
            violations: e.violations().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: ErrorBody,
    /// Terminal chain state, sent when stepping a halted chain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<ChainView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
    pub schema_version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStartRequest {
    #[serde(default = "yes")]
    pub inherit: bool,
}

impl Default for ChainStartRequest {
    fn default() -> Self {
        ChainStartRequest { inherit: true }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStepRequest {
    pub id: String,
    pub run: RunDraft,
}

/// A chain session as seen from outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainView {
    pub id: String,
    pub inherit: bool,
    pub halted: bool,
    /// Endowment the next run will start with, when inherited.
    pub next_endowment: Option<f64>,
    pub result: ChainResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStepResponse {
    pub id: String,
    pub index: usize,
    pub run: RunRecord,
    /// Endowment this run inherited from its predecessor.
    pub inherited_endowment: Option<f64>,
    pub next_endowment: Option<f64>,
    pub halted: bool,
}
