use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid parameters: {}", join(.0))]
    InvalidParameter(Vec<Violation>),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("threshold {threshold} is not reachable (largest attainable value {maximum})")]
    UnreachableThreshold { threshold: f64, maximum: f64 },
    #[error("numeric failure in {routine}: {detail}")]
    NumericFailure {
        routine: &'static str,
        detail: String,
    },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl ModelError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::InvalidParameter(vec![Violation::new(field, message)])
    }

    /// Stable machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::InvalidParameter(_) => "invalid_parameter",
            Self::InvalidArgument(_) => "invalid_argument",
            Self::UnreachableThreshold { .. } => "unreachable_threshold",
            Self::NumericFailure { .. } => "numeric_failure",
            Self::Unsupported(_) => "unsupported",
            Self::Parse(_) => "parse_error",
        }
    }

    pub fn violations(&self) -> &[Violation] {
        match self {
            Self::InvalidParameter(v) => v,
            _ => &[],
        }
    }
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Collects violations and turns them into a single error.
#[derive(Debug, Default)]
pub(crate) struct Checks(Vec<Violation>);

impl Checks {
    pub fn require(&mut self, ok: bool, field: &str, message: &str) -> &mut Self {
        if !ok {
            self.0.push(Violation::new(field, message));
        }
        self
    }

    pub fn finite(&mut self, x: f64, field: &str) -> &mut Self {
        self.require(x.is_finite(), field, "must be finite")
    }

    pub fn prefixed(self, prefix: &str) -> Vec<Violation> {
        self.0
            .into_iter()
            .map(|v| Violation::new(format!("{prefix}.{}", v.field), v.message))
            .collect()
    }

    pub fn finish(self) -> Result<()> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(ModelError::InvalidParameter(self.0))
        }
    }
}
