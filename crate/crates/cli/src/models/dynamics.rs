//! Goodwin, Keen and monetary-circuit trajectories.

use circuitlab_core::goodwin::{self, GoodwinParams, GoodwinRun, GoodwinState, Regime};
use circuitlab_core::keen::{self, KeenParams, KeenRun, KeenState};
use circuitlab_core::mmc::{self, MmcParams, MmcRun, MmcState, UpsilonMode, MMC_COLUMNS};
use circuitlab_core::stochastic_engine::{clamp_rate, PathRecord, SimConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{svg, Preset};
use crate::config::RunSettings;
use crate::output::{csv_artifact, num, RunOutput};
use crate::plot::Chart;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoodwinScenario {
    pub figure: u32,
    pub params: GoodwinParams<f64>,
    pub regime: Regime,
    /// One run per starting point.
    pub initial: Vec<GoodwinState<f64>>,
    pub clamp_eps: f64,
}

const STARTS: [(f64, f64); 3] = [(0.75, 0.8), (0.75, 0.9), (0.75, 0.95)];

impl Preset for GoodwinScenario {
    const FIGURES: &'static [u32] = &[1, 2, 3];
    const DEFAULT_FIGURE: u32 = 2;

    fn preset(figure: u32) -> (Self, RunSettings) {
        let mut params = GoodwinParams::classical(0.225, 0.20, 0.4, 0.6);
        if figure >= 2 {
            params = params.with_omega(0.005);
        }
        if figure == 3 {
            params = params.with_sigmas(0.015, 0.005);
        }
        let s = Self {
            figure,
            params,
            regime: if figure == 1 { Regime::Classical } else { Regime::Regularized },
            initial: STARTS.iter().map(|&(s, l)| GoodwinState::new(s, l)).collect(),
            clamp_eps: GoodwinRun::<f64>::new(Regime::Classical).clamp_eps,
        };
        let paths = if figure == 3 { 20 } else { 1 };
        (s, RunSettings::new(paths, 1e-3, 100.0, 100))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeenScenario {
    pub figure: u32,
    pub params: KeenParams<f64>,
    pub regime: Regime,
    pub initial: Vec<KeenState<f64>>,
    pub clamp_eps: f64,
    /// Multiply the leverage drift by `nu_f`.
    pub with_nu_factor: bool,
    /// Leverage at which a path is stopped.
    pub minsky_threshold: f64,
}

impl Preset for KeenScenario {
    const FIGURES: &'static [u32] = &[4, 5, 6];
    const DEFAULT_FIGURE: u32 = 5;

    fn preset(figure: u32) -> (Self, RunSettings) {
        let mut params = KeenParams::new(0.225, 0.20, 0.075, 0.03, 0.03, 0.1, -0.0065, 20.0, -5.0);
        if figure >= 5 {
            params = params.with_omega(0.005);
        }
        if figure == 6 {
            params = params.with_sigmas(0.005, 0.005);
        }
        let regime = if figure == 4 { Regime::Classical } else { Regime::Regularized };
        let run = KeenRun::<f64>::new(regime);
        let s = Self {
            figure,
            params,
            regime,
            initial: vec![KeenState::new(0.75, 0.8, 0.1), KeenState::new(0.75, 0.9, 0.2), KeenState::new(0.75, 0.95, 0.3)],
            clamp_eps: run.clamp_eps,
            with_nu_factor: run.with_nu_factor,
            minsky_threshold: run.minsky_threshold,
        };
        let paths = if figure == 6 { 20 } else { 1 };
        (s, RunSettings::new(paths, 1e-3, 100.0, 100))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmcScenario {
    pub figure: u32,
    pub params: MmcParams<f64>,
    pub initial: MmcState<f64>,
    pub solver: MmcRun<f64>,
}

impl Preset for MmcScenario {
    const FIGURES: &'static [u32] = &[8];
    const DEFAULT_FIGURE: u32 = 8;

    fn preset(figure: u32) -> (Self, RunSettings) {
        let s = Self {
            figure,
            params: MmcParams::fig8(),
            initial: MmcState::fig8(),
            // the exact lower-branch solve folds late in the reference run
            solver: MmcRun { upsilon_mode: UpsilonMode::OneStep, ..MmcRun::default() },
        };
        (s, RunSettings::new(1, 0.01, 100.0, 10))
    }
}

fn config(r: &RunSettings) -> SimConfig<f64> {
    SimConfig::new(r.horizon, r.dt, r.paths, r.seed).with_record_every(r.record_every)
}

fn trajectory_rows(paths: &[PathRecord<f64>]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for rec in paths {
        for (t, st) in rec.times.iter().zip(&rec.states) {
            let mut row = vec![num(*t), rec.path.to_string()];
            row.extend(st.iter().map(|&v| num(v)));
            rows.push(row);
        }
    }
    rows
}

fn outside_unit_square(paths: &[PathRecord<f64>]) -> bool {
    paths.iter().flat_map(|p| &p.states).any(|s| !(s[0] > 0.0 && s[0] < 1.0 && s[1] > 0.0 && s[1] < 1.0))
}

fn column(rec: &PathRecord<f64>, i: usize) -> Vec<(f64, f64)> {
    rec.times.iter().zip(&rec.states).map(|(&t, s)| (t, s[i])).collect()
}

fn phase(rec: &PathRecord<f64>) -> Vec<(f64, f64)> {
    rec.states.iter().map(|s| (s[1], s[0])).collect()
}

pub(super) fn run_goodwin(p: &GoodwinScenario, r: &RunSettings) -> Result<RunOutput> {
    let run = GoodwinRun { regime: p.regime, clamp_eps: p.clamp_eps };
    let cfg = config(r);
    let mut out = RunOutput::default();
    let mut starts = Vec::new();
    let mut portrait = Chart::new("Wage share against employment", "lambda_w", "s_w");
    let mut series = Chart::new("First starting point", "t", "share");
    for (k, start) in p.initial.iter().enumerate() {
        let paths = goodwin::simulate(*start, &p.params, &run, &cfg)?;
        out.artifacts.push(csv_artifact(
            &format!("trajectories_{k}.csv"),
            &["t", "path", "s_w", "lambda_w"],
            trajectory_rows(&paths),
        ));
        starts.push(json!({
            "initial": start,
            "clamp_rate": clamp_rate(&paths),
            "max_lambda_w": paths.iter().map(|p| p.max_of(1)).fold(f64::NEG_INFINITY, f64::max),
            "min_s_w": paths.iter().map(|p| p.min_of(0)).fold(f64::INFINITY, f64::min),
            "left_unit_square": outside_unit_square(&paths),
            "first_integral_at_start": goodwin::conservation(start, &p.params, p.regime).ok(),
        }));
        portrait = portrait.line(format!("start {k}"), phase(&paths[0]));
        if k == 0 {
            series = series.line("s_w", column(&paths[0], 0)).line("lambda_w", column(&paths[0], 1));
        }
    }
    let fp = goodwin::fixed_point(&p.params, p.regime);
    let fp_pt = vec![(fp.lambda_w, fp.s_w)];
    out.artifacts.push(svg("phase.svg", portrait.scatter("fixed point", fp_pt).to_svg()));
    out.artifacts.push(svg("series.svg", series.to_svg()));
    out.summary = json!({ "model": "goodwin", "fixed_point": fp, "starts": starts });
    Ok(out)
}

pub(super) fn run_keen(p: &KeenScenario, r: &RunSettings) -> Result<RunOutput> {
    let run = KeenRun {
        regime: p.regime,
        with_nu_factor: p.with_nu_factor,
        clamp_eps: p.clamp_eps,
        minsky_threshold: p.minsky_threshold,
    };
    let cfg = config(r);
    let mut out = RunOutput::default();
    let mut starts = Vec::new();
    let mut portrait = Chart::new("Wage share against employment", "lambda_w", "s_w");
    let mut leverage = Chart::new("Firm leverage", "t", "Gamma_f");
    for (k, start) in p.initial.iter().enumerate() {
        let paths = keen::simulate(*start, &p.params, &run, &cfg)?;
        out.artifacts.push(csv_artifact(
            &format!("trajectories_{k}.csv"),
            &["t", "path", "s_w", "lambda_w", "gamma_f"],
            trajectory_rows(&paths),
        ));
        let stopped: Vec<f64> = paths.iter().filter_map(|p| p.stopped_at).collect();
        starts.push(json!({
            "initial": start,
            "clamp_rate": clamp_rate(&paths),
            "max_lambda_w": paths.iter().map(|p| p.max_of(1)).fold(f64::NEG_INFINITY, f64::max),
            "max_gamma_f": paths.iter().map(|p| p.max_of(2)).fold(f64::NEG_INFINITY, f64::max),
            "left_unit_square": outside_unit_square(&paths),
            "minsky_paths": stopped.len(),
            "first_minsky_time": stopped.iter().copied().reduce(f64::min),
        }));
        portrait = portrait.line(format!("start {k}"), phase(&paths[0]));
        leverage = leverage.line(format!("start {k}"), column(&paths[0], 2));
    }
    out.artifacts.push(svg("phase.svg", portrait.to_svg()));
    out.artifacts.push(svg("leverage.svg", leverage.to_svg()));
    out.summary = json!({ "model": "keen", "starts": starts });
    Ok(out)
}

pub(super) fn run_mmc(p: &MmcScenario, r: &RunSettings) -> Result<RunOutput> {
    let paths = mmc::simulate(p.initial, &p.params, &p.solver, &config(r))?;
    let mut header = vec!["t", "path"];
    header.extend(MMC_COLUMNS);
    let mut out = RunOutput::default();
    out.artifacts.push(csv_artifact("trajectories.csv", &header, trajectory_rows(&paths)));

    let rec = &paths[0];
    let mut stocks = Chart::new("Stocks", "t", "money units");
    for (i, name) in MMC_COLUMNS.iter().enumerate().take(7) {
        stocks = stocks.line(*name, column(rec, i));
    }
    out.artifacts.push(svg("stocks.svg", stocks.to_svg()));
    let shares = Chart::new("Shares", "t", "share")
        .line("s_w", column(rec, 9))
        .line("lambda_w", column(rec, 10))
        .line("upsilon_f", column(rec, mmc::col::UPSILON));
    out.artifacts.push(svg("shares.svg", shares.to_svg()));

    let worst = |c: usize| {
        paths.iter().flat_map(|p| &p.states).map(|s| s[c].abs()).fold(0.0, f64::max)
    };
    let crunch_rows = paths.iter().flat_map(|p| &p.states).filter(|s| s[mmc::col::CREDIT_CRUNCH] != 0.0).count();
    out.summary = json!({
        "model": "mmc",
        "clamp_rate": clamp_rate(&paths),
        "max_identity_residual": worst(MMC_COLUMNS.len() - 2),
        "max_production_residual": worst(MMC_COLUMNS.len() - 1),
        "credit_crunch_rows": crunch_rows,
        "final_state": rec.last().iter().take(mmc::STATE_DIM).copied().collect::<Vec<f64>>(),
    });
    Ok(out)
}
