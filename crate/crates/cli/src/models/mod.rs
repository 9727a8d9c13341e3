//! Per-model parameter blocks, their presets and runners.

mod bank;
mod dynamics;
mod ledger;
mod network;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::config::{from_value, merge, Model, RunSettings, Scenario};
use crate::output::RunOutput;
use crate::{CliError, Result};

pub use bank::{BalanceScenario, DividendScenario};
pub use dynamics::{GoodwinScenario, KeenScenario, MmcScenario};
pub use ledger::{LedgerMode, LedgerScenario};
pub use network::{wedge_rows, NetworkScenario, WedgeRow, WedgeScenario};

/// Parameter block of a resolved scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Parameters {
    Goodwin(GoodwinScenario),
    Keen(KeenScenario),
    Mmc(MmcScenario),
    Ledger(LedgerScenario),
    Network(NetworkScenario),
    Wedge(WedgeScenario),
    Balance(BalanceScenario),
    Dividend(DividendScenario),
}

/// A parameter block with figure presets.
pub(crate) trait Preset: Serialize + DeserializeOwned + Sized {
    /// Figures with a preset; empty when the block has no `figure` key.
    const FIGURES: &'static [u32];
    const DEFAULT_FIGURE: u32;
    fn preset(figure: u32) -> (Self, RunSettings);
}

fn resolve_with<P: Preset>(user: Value) -> Result<(P, RunSettings)> {
    let figure = match (P::FIGURES, user.get("figure")) {
        ([], _) => 0,
        (_, None) => P::DEFAULT_FIGURE,
        (figs, Some(v)) => {
            let f = v
                .as_u64()
                .ok_or_else(|| CliError::schema("parameters.figure", "must be a non-negative integer"))?;
            if !figs.contains(&(f as u32)) {
                return Err(CliError::schema("parameters.figure", format!("no preset for figure {f}; available: {figs:?}")));
            }
            f as u32
        }
    };
    let (base, run) = P::preset(figure);
    let mut v = serde_json::to_value(&base).expect("preset serializes");
    merge(&mut v, user);
    Ok((from_value(v, "parameters")?, run))
}

pub fn resolve(model: Model, user: Value) -> Result<(Parameters, RunSettings)> {
    fn wrap<P: Preset>(user: Value, f: fn(P) -> Parameters) -> Result<(Parameters, RunSettings)> {
        let (p, r) = resolve_with::<P>(user)?;
        Ok((f(p), r))
    }
    match model {
        Model::Goodwin => wrap(user, Parameters::Goodwin),
        Model::Keen => wrap(user, Parameters::Keen),
        Model::Mmc => wrap(user, Parameters::Mmc),
        Model::Ledger => wrap(user, Parameters::Ledger),
        Model::Network => wrap(user, Parameters::Network),
        Model::Wedge => wrap(user, Parameters::Wedge),
        Model::Balance => wrap(user, Parameters::Balance),
        Model::Dividend => wrap(user, Parameters::Dividend),
    }
}

/// Runs the scenario and returns its data files, plots and summary.
pub fn execute(s: &Scenario) -> Result<RunOutput> {
    let r = &s.run;
    let out = match &s.parameters {
        Parameters::Goodwin(p) => dynamics::run_goodwin(p, r)?,
        Parameters::Keen(p) => dynamics::run_keen(p, r)?,
        Parameters::Mmc(p) => dynamics::run_mmc(p, r)?,
        Parameters::Ledger(p) => ledger::run(p, r)?,
        Parameters::Network(p) => network::run_network(p, r)?,
        Parameters::Wedge(p) => network::run_wedge(p, r)?,
        Parameters::Balance(p) => bank::run_balance(p, r)?,
        Parameters::Dividend(p) => bank::run_dividend(p, r)?,
    };
    let mut out = out;
    out.artifacts.retain(|a| {
        let svg = a.name.ends_with(".svg");
        (svg && r.emit.svg) || (!svg && r.emit.csv)
    });
    Ok(out)
}

/// Helper for SVG artifacts.
pub(crate) fn svg(name: &str, text: String) -> crate::output::Artifact {
    crate::output::Artifact { name: name.to_string(), bytes: text.into_bytes() }
}
