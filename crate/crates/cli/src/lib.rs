//! Scenario runner behind the `circuitlab` binary.
//!
//! A scenario is a JSON file naming a model, a parameter block and run
//! settings. [`config::load`] fills defaults from the reference figure of
//! each model, [`models::execute`] runs it and returns in-memory artifacts,
//! and [`output::write_run`] stores them next to a checksummed manifest.
//! [`verify`] holds the named check suites.

pub mod config;
pub mod models;
pub mod output;
pub mod plot;
pub mod verify;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// The config does not match the schema (unknown key, wrong type, bad value).
    #[error("{message}")]
    Schema { key: Option<String>, message: String },
    /// The model failed while running.
    #[error("{0}")]
    Runtime(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    pub fn schema(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Schema { key: Some(key.into()), message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Schema { .. } => 2,
            Self::Runtime(_) | Self::Io { .. } => 3,
        }
    }

    /// One-line JSON report written to stderr by the binary.
    pub fn report(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            error: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            key: Option<&'a str>,
            message: String,
            exit_code: i32,
        }
        let (kind, key) = match self {
            Self::Schema { key, .. } => ("schema", key.as_deref()),
            Self::Runtime(_) => ("runtime", None),
            Self::Io { .. } => ("io", None),
        };
        serde_json::to_string(&Report { error: kind, key, message: self.to_string(), exit_code: self.exit_code() })
            .expect("report serializes")
    }
}

impl From<circuitlab_core::CircuitError> for CliError {
    fn from(e: circuitlab_core::CircuitError) -> Self {
        match e {
            circuitlab_core::CircuitError::InvalidParameter { name, .. } => {
                Self::Schema { key: Some(name.to_string()), message: e.to_string() }
            }
            other => Self::Runtime(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
