use serde::{Deserialize, Serialize};

/// A critical time, or the reason it does not exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Timing {
    At(f64),
    NoPeak,
    NoCollapse,
    Undefined,
}

impl Timing {
    pub fn at(self) -> Option<f64> {
        match self {
            Timing::At(t) => Some(t),
            _ => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, Timing::At(_))
    }
}
