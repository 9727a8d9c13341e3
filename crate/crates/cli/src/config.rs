//! Scenario files: schema, defaults and overrides.
//!
//! The parameter block of every model starts from a preset (chosen by its
//! `figure` key) and user keys are merged over it recursively before the
//! result is deserialized with unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::models::{self, Parameters};
use crate::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Goodwin,
    Keen,
    Mmc,
    Ledger,
    Network,
    Wedge,
    Balance,
    Dividend,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Goodwin => "goodwin",
            Model::Keen => "keen",
            Model::Mmc => "mmc",
            Model::Ledger => "ledger",
            Model::Network => "network",
            Model::Wedge => "wedge",
            Model::Balance => "balance",
            Model::Dividend => "dividend",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Emit {
    pub csv: bool,
    pub summary: bool,
    pub svg: bool,
}

impl Default for Emit {
    fn default() -> Self {
        Self { csv: true, summary: true, svg: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    pub seed: u64,
    pub paths: usize,
    pub dt: f64,
    pub horizon: f64,
    /// Keep every k-th time step in trajectory output.
    pub record_every: usize,
    /// Output directory. Not part of the effective config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub emit: Emit,
}

impl RunSettings {
    pub fn new(paths: usize, dt: f64, horizon: f64, record_every: usize) -> Self {
        Self { seed: 1, paths, dt, horizon, record_every, out: None, emit: Emit::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(CliError::schema("run.paths", "must be at least 1"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(CliError::schema("run.dt", "must be positive"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(CliError::schema("run.horizon", "must be positive"));
        }
        if self.record_every == 0 {
            return Err(CliError::schema("run.record_every", "must be at least 1"));
        }
        Ok(())
    }
}

/// A resolved scenario: every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub version: u32,
    pub model: Model,
    pub parameters: Parameters,
    pub run: RunSettings,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    version: Option<u32>,
    model: Model,
    #[serde(default)]
    parameters: Option<Value>,
    #[serde(default)]
    run: Option<Value>,
}

/// Command-line overrides applied after defaults.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub out: Option<PathBuf>,
    pub svg: bool,
}

/// Recursive merge; objects are merged key by key, anything else replaces.
pub fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Deserializes with the offending key path in the error.
pub fn from_value<T: DeserializeOwned>(v: Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let mut key = prefix.to_string();
        let path = e.path().to_string();
        if path != "." {
            key = format!("{prefix}.{path}");
        }
        let inner = e.into_inner().to_string();
        // unknown fields are reported against their parent; name the field itself
        if let Some(name) = inner.strip_prefix("unknown field `").and_then(|s| s.split('`').next()) {
            if !key.ends_with(&format!(".{name}")) {
                key = format!("{key}.{name}");
            }
        }
        CliError::Schema { message: format!("`{key}`: {inner}"), key: Some(key) }
    })
}

pub fn parse(text: &str, overrides: &Overrides) -> Result<Scenario> {
    let raw: Value = serde_json::from_str(text)
        .map_err(|e| CliError::Schema { key: None, message: format!("config is not valid JSON: {e}") })?;
    let raw: RawConfig = from_value(raw, "config")?;
    let version = raw.version.unwrap_or(SCHEMA_VERSION);
    if version != SCHEMA_VERSION {
        return Err(CliError::schema("version", format!("unsupported schema version {version}")));
    }
    let user = match raw.parameters {
        None | Some(Value::Null) => Value::Object(Default::default()),
        Some(v @ Value::Object(_)) => v,
        Some(_) => return Err(CliError::schema("parameters", "must be an object")),
    };
    let (parameters, run_defaults) = models::resolve(raw.model, user)?;
    let mut run = serde_json::to_value(&run_defaults).expect("run settings serialize");
    if let Some(r) = raw.run {
        if !r.is_object() {
            return Err(CliError::schema("run", "must be an object"));
        }
        merge(&mut run, r);
    }
    let mut run: RunSettings = from_value(run, "run")?;
    if let Some(s) = overrides.seed {
        run.seed = s;
    }
    if let Some(p) = overrides.paths {
        run.paths = p;
    }
    if let Some(o) = &overrides.out {
        run.out = Some(o.clone());
    }
    run.emit.svg |= overrides.svg;
    run.validate()?;
    Ok(Scenario { version, model: raw.model, parameters, run })
}

pub fn load(path: &Path, overrides: &Overrides) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Schema { key: None, message: format!("cannot read {}: {e}", path.display()) })?;
    parse(&text, overrides)
}

impl Scenario {
    /// The config with defaults filled in and the output directory dropped.
    pub fn effective(&self) -> Value {
        let mut s = self.clone();
        s.run.out = None;
        serde_json::to_value(&s).expect("scenario serializes")
    }

    pub fn effective_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.effective()).expect("scenario serializes");
        s.push('\n');
        s
    }

    pub fn config_hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(&self.effective()).expect("scenario serializes")))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.run.out.clone().unwrap_or_else(|| PathBuf::from(format!("circuitlab-out/{}", self.model.name())))
    }
}
