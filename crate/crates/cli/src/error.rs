//! Process-level failures: each maps to one exit code and a machine-readable
//! JSON object printed to stderr.

use std::path::Path;

use rendezvous_core::control::ControlError;
use rendezvous_core::matops::MatOpsError;
use rendezvous_core::sim::{SimError, ValidationIssue};
use rendezvous_core::switching::SwitchingError;
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Scenario or input data rejected before any numerics ran. Exit 2.
    #[error("{message}")]
    Validation {
        message: String,
        issues: Vec<ValidationIssue>,
    },
    /// Numerics failed on valid input (Riccati non-convergence, state
    /// blow-up, singular systems). Exit 3.
    #[error("{message}")]
    Numeric { message: String },
    /// Filesystem trouble. Exit 4.
    #[error("{message}")]
    Io { message: String },
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self::Validation {
            message: message.into(),
            issues: Vec::new(),
        }
    }

    pub fn issues(issues: Vec<ValidationIssue>) -> Self {
        Self::Validation {
            message: format!("scenario validation failed with {} issue(s)", issues.len()),
            issues,
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self::Numeric {
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::Io {
            message: format!("{}: {err}", path.display()),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Validation { .. } => 2,
            Self::Numeric { .. } => 3,
            Self::Io { .. } => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Validation { .. } => "validation",
            Self::Numeric { .. } => "numeric",
            Self::Io { .. } => "io",
        }
    }

    pub fn to_json(&self) -> Value {
        let issues = match self {
            Self::Validation { issues, .. } => json!(issues),
            _ => json!([]),
        };
        json!({
            "error": {
                "kind": self.kind(),
                "message": self.to_string(),
                "issues": issues,
            }
        })
    }
}

impl From<SimError> for CliError {
    fn from(err: SimError) -> Self {
        match err {
            SimError::InvalidScenario(issues) => Self::issues(issues),
            other => Self::numeric(other.to_string()),
        }
    }
}

impl From<ControlError> for CliError {
    fn from(err: ControlError) -> Self {
        Self::numeric(err.to_string())
    }
}

impl From<MatOpsError> for CliError {
    fn from(err: MatOpsError) -> Self {
        Self::numeric(err.to_string())
    }
}

impl From<SwitchingError> for CliError {
    fn from(err: SwitchingError) -> Self {
        Self::numeric(err.to_string())
    }
}
