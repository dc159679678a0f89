use blox_core::catalog::CatalogError;
use blox_core::designer::{DesignError, LmError};
use blox_core::evalharness::EvalError;
use blox_core::render::RenderError;
use blox_core::statics::DropError;
use serde_json::{json, Value};
use thiserror::Error;

/// A command failure, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{message}")]
    Validation { message: String, details: Option<Value> },
    #[error("{message}")]
    Client { message: String, details: Option<Value> },
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError::Validation { message: message.into(), details: None }
    }

    pub fn client(message: impl Into<String>) -> Self {
        CliError::Client { message: message.into(), details: None }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation { .. } => 2,
            CliError::Client { .. } => 3,
            CliError::Internal(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Validation { .. } => "validation",
            CliError::Client { .. } => "client",
            CliError::Internal(_) => "internal",
        }
    }

    /// The structured form written to stderr.
    pub fn to_json(&self) -> Value {
        let mut v = json!({"error": {"kind": self.kind(), "code": self.exit_code(), "message": self.to_string()}});
        if let CliError::Validation { details: Some(d), .. } | CliError::Client { details: Some(d), .. } = self {
            v["error"]["details"] = d.clone();
        }
        v
    }
}

impl From<CatalogError> for CliError {
    fn from(e: CatalogError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<DropError> for CliError {
    fn from(e: DropError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<LmError> for CliError {
    fn from(e: LmError) -> Self {
        CliError::client(e.to_string())
    }
}

impl From<RenderError> for CliError {
    fn from(e: RenderError) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<DesignError> for CliError {
    fn from(e: DesignError) -> Self {
        match e {
            DesignError::Precondition(m) => CliError::Usage(m),
            DesignError::Lm(e) => e.into(),
            DesignError::Parse(_) => CliError::validation(e.to_string()),
            DesignError::Validation(ref vs) => {
                CliError::Validation { message: e.to_string(), details: serde_json::to_value(vs).ok() }
            }
            DesignError::Drop(e) => e.into(),
            DesignError::Render(e) => e.into(),
            DesignError::NoCandidates(ref fs) => {
                CliError::Client { message: e.to_string(), details: serde_json::to_value(fs).ok() }
            }
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Precondition(_) | EvalError::Drop(_) => CliError::validation(e.to_string()),
            EvalError::Lm(e) => e.into(),
            EvalError::Protocol { .. } => CliError::client(e.to_string()),
        }
    }
}

pub fn io_err(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Internal(format!("{}: {e}", path.display()))
}
