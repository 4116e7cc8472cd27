//! Command-line harness: single runs, sweeps, scoring and the self-test.

pub mod config;
pub mod score;
pub mod selftest;
pub mod single;
pub mod sweep;

use serde::Serialize;

use crate::error::EmestError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_MISSING_TRUTH: i32 = 5;

/// Error with a process exit code, printed as a JSON object by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnessError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl HarnessError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            kind: "config",
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_IO,
            kind: "io",
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl std::fmt::Display for HarnessError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} error (exit {}): {}", self.kind, self.code, self.message)
    }
}

impl std::error::Error for HarnessError {}

impl From<EmestError> for HarnessError {
    fn from(e: EmestError) -> Self {
        let (code, kind) = match &e {
            EmestError::InvalidParam { .. } | EmestError::DimensionMismatch { .. } | EmestError::Parse { .. } => {
                (EXIT_CONFIG, "config")
            }
            EmestError::InfeasibleN { .. } | EmestError::TooFewSamples { .. } => (EXIT_INFEASIBLE, "infeasible"),
            EmestError::MissingTruth => (EXIT_MISSING_TRUTH, "missing_truth"),
            EmestError::Io(_) => (EXIT_IO, "io"),
            EmestError::NotPsd(_)
            | EmestError::Singular(_)
            | EmestError::Empty(_)
            | EmestError::SupplierExhausted { .. }
            | EmestError::EmptyAcceptance { .. }
            | EmestError::Numerical(_) => (EXIT_NUMERICAL, "numerical"),
        };
        Self {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

/// Worker count from `EMEST_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("EMEST_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Format with `sig` significant digits.
pub fn format_significant(x: f64, sig: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return format!("{:.*}", sig - 1, 0.0);
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..(sig as i32)).contains(&exp) {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{:.*e}", sig - 1, x)
    }
}
