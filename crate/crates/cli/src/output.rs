//! Artifacts, CSV encoding and the run manifest.

use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::Scenario;
use crate::{CliError, Result};

/// One output file held in memory until written.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(&self.bytes))
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    pub summary: Value,
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        // avoid "-0"
        "0".to_string()
    } else {
        format!("{x}")
    }
}

/// RFC 4180 table: comma separated, CRLF line ends, quoting where needed.
pub fn csv_bytes<S: AsRef<str>>(header: &[S], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(header.iter().map(|h| h.as_ref())).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

pub fn csv_artifact<S: AsRef<str>>(name: &str, header: &[S], rows: impl IntoIterator<Item = Vec<String>>) -> Artifact {
    Artifact { name: name.to_string(), bytes: csv_bytes(header, rows) }
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub model: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputEntry>,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io { path: path.display().to_string(), message: e.to_string() }
}

/// Adds the summary and effective config to the model artifacts, writes
/// them all and finishes with `manifest.json`.
pub fn write_run(scenario: &Scenario, out: RunOutput, started: (SystemTime, Instant), dir: &Path) -> Result<RunManifest> {
    let mut artifacts = out.artifacts;
    if scenario.run.emit.summary {
        let mut s = serde_json::to_string_pretty(&out.summary).expect("summary serializes");
        s.push('\n');
        artifacts.push(Artifact { name: "summary.json".into(), bytes: s.into_bytes() });
    }
    artifacts.push(Artifact { name: "effective_config.json".into(), bytes: scenario.effective_json().into_bytes() });

    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut outputs = Vec::new();
    for a in &artifacts {
        let p = dir.join(&a.name);
        std::fs::write(&p, &a.bytes).map_err(|e| io_err(&p, e))?;
        outputs.push(OutputEntry { file: a.name.clone(), bytes: a.bytes.len(), sha256: a.sha256() });
    }
    let manifest = RunManifest {
        model: scenario.model.name().to_string(),
        config_hash: scenario.config_hash(),
        seed: scenario.run.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix: started.0.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        wall_clock_seconds: started.1.elapsed().as_secs_f64(),
        outputs,
    };
    let p = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&p, text).map_err(|e| io_err(&p, e))?;
    Ok(manifest)
}
