//! Single-bank balance sheet and the optimal dividend barrier.

use circuitlab_core::balance_sheet::{
    cashflow_objective, constant_control_search, constraints_report, simulate, ConstantControls, ControlGrid,
    ControlPath, FlowParams, FlowState, RegWeights, FLOW_COLUMNS,
};
use circuitlab_core::dividend_optimizer::{solve_variational, stationary_barrier, EquityParams, VariationalGrid};
use circuitlab_core::stochastic_engine::SimConfig;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{svg, Preset};
use crate::config::RunSettings;
use crate::output::{csv_artifact, num, RunOutput};
use crate::plot::Chart;
use crate::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalanceScenario {
    pub params: FlowParams<f64>,
    pub initial: FlowState<f64>,
    pub controls: ControlPath<f64>,
    pub weights: RegWeights<f64>,
    /// Lognormal investment returns, one path per stream.
    pub stochastic: bool,
    /// Optional grid search over constant controls.
    pub search: Option<ControlGrid<f64>>,
}

impl Preset for BalanceScenario {
    const FIGURES: &'static [u32] = &[];
    const DEFAULT_FIGURE: u32 = 0;

    fn preset(_: u32) -> (Self, RunSettings) {
        let s = Self {
            params: FlowParams::example(),
            initial: FlowState::balanced(100.0, 20.0, 10.0, 90.0, 25.0),
            controls: ControlPath::constant(ConstantControls {
                phi: 20.0,
                psi: 2.5,
                omega_inv: 0.5,
                pi_dep: 9.0,
                delta_div: 1.0,
            }),
            weights: RegWeights::basel_like(),
            stochastic: false,
            search: None,
        };
        (s, RunSettings::new(1, 0.01, 10.0, 10))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DividendScenario {
    pub figure: u32,
    pub params: EquityParams<f64>,
    /// Upper end of the equity grid; ten times the stationary barrier when unset.
    pub e_max: Option<f64>,
    pub intervals: usize,
    /// Times to maturity written next to the final one.
    pub maturities: Vec<f64>,
}

impl Preset for DividendScenario {
    const FIGURES: &'static [u32] = &[12];
    const DEFAULT_FIGURE: u32 = 12;

    fn preset(figure: u32) -> (Self, RunSettings) {
        let s = Self { figure, params: EquityParams::fig12(), e_max: None, intervals: 2000, maturities: vec![1.0, 5.0, 20.0, 60.0] };
        (s, RunSettings::new(1, 0.01, 150.0, 1))
    }
}

const SLACKS: [&str; 3] = ["capital_slack", "funding_slack", "liquidity_slack"];

pub(super) fn run_balance(p: &BalanceScenario, r: &RunSettings) -> Result<RunOutput> {
    p.weights.validate()?;
    let cfg = SimConfig::new(r.horizon, r.dt, r.paths, r.seed);
    let trajs = simulate(p.initial, &p.params, &p.controls, p.stochastic, &cfg)?;
    let mut header = vec!["t", "path"];
    header.extend(FLOW_COLUMNS);
    header.extend(SLACKS);
    let mut rows = Vec::new();
    let mut paths = Vec::new();
    for tr in &trajs {
        let flows = tr.rows(&p.params, &p.controls);
        let last = tr.t.len() - 1;
        let mut mins = [f64::INFINITY; 3];
        for (k, vals) in flows.iter().enumerate() {
            let c = constraints_report(&tr.states[k], &p.weights);
            let sl = [c.capital_slack, c.funding_slack, c.liquidity_slack];
            for (m, v) in mins.iter_mut().zip(sl) {
                *m = m.min(v);
            }
            if k % r.record_every == 0 || k == last {
                let mut row = vec![num(tr.t[k]), tr.path.to_string()];
                row.extend(vals.iter().chain(&sl).map(|&v| num(v)));
                rows.push(row);
            }
        }
        paths.push(json!({
            "path": tr.path,
            "cashflow": cashflow_objective(tr, &p.params),
            "max_identity_residual": tr.max_residual,
            "min_slacks": mins,
            "feasible": mins.iter().all(|&m| m > 0.0),
        }));
    }
    let mut out = RunOutput::default();
    out.artifacts.push(csv_artifact("balance.csv", &header, rows));

    let tr = &trajs[0];
    let mut chart = Chart::new("Balance sheet", "t", "money units");
    for (i, name) in ["X", "I", "C", "D", "Y", "E"].iter().enumerate() {
        let pts = tr.t.iter().zip(&tr.states).map(|(&t, s)| (t, [s.x, s.i, s.c, s.d, s.y, s.e][i])).collect();
        chart = chart.line(*name, pts);
    }
    out.artifacts.push(svg("balance.svg", chart.to_svg()));

    let mut summary = json!({ "model": "balance", "paths": paths });
    if let Some(grid) = &p.search {
        let res = constant_control_search(p.initial, &p.params, &p.weights, r.horizon, r.dt, grid)?;
        let header = ["phi", "psi", "omega_inv", "pi_dep", "delta_div", "cashflow", "min_capital_slack", "min_funding_slack", "min_liquidity_slack", "feasible"];
        let rows = res.rows.iter().map(|s| {
            let u = s.controls;
            let mut row: Vec<String> = [u.phi, u.psi, u.omega_inv, u.pi_dep, u.delta_div, s.cf, s.min_capital_slack, s.min_funding_slack, s.min_liquidity_slack]
                .iter()
                .map(|&v| num(v))
                .collect();
            row.push(s.feasible().to_string());
            row
        });
        out.artifacts.push(csv_artifact("search.csv", &header, rows));
        summary["search_best"] = json!(res.best_row());
    }
    out.summary = summary;
    Ok(out)
}

pub(super) fn run_dividend(p: &DividendScenario, r: &RunSettings) -> Result<RunOutput> {
    let barrier = stationary_barrier(&p.params)?;
    let e_max = p.e_max.unwrap_or(10.0 * barrier.e_star);
    if !(e_max > 0.0) {
        return Err(CliError::schema("parameters.e_max", "must be positive"));
    }
    let mut grid = VariationalGrid::new(e_max, p.intervals, r.dt, r.horizon);
    grid.record_at = p.maturities.iter().copied().filter(|&t| t < r.horizon).collect();
    let sol = solve_variational(&p.params, &grid)?;

    let mut header = vec!["e".to_string(), "v_stationary".to_string()];
    header.extend(sol.tau.iter().map(|t| format!("v_T{}", num(*t))));
    header.push("e_star".into());
    let rows = sol.e.iter().enumerate().map(|(k, &e)| {
        let mut row = vec![num(e), num(barrier.value(e))];
        row.extend(sol.values.iter().map(|v| num(v[k])));
        row.push(num(barrier.e_star));
        row
    });
    let mut out = RunOutput::default();
    out.artifacts.push(csv_artifact("dividend.csv", &header, rows));

    let mut chart = Chart::new("Excess value V - E", "E", "V - E");
    for (t, v) in sol.tau.iter().zip(&sol.values) {
        chart = chart.line(format!("T = {}", num(*t)), sol.e.iter().zip(v).map(|(&e, &x)| (e, x - e)).collect());
    }
    chart = chart.line("stationary", sol.e.iter().map(|&e| (e, barrier.value(e) - e)).collect());
    out.artifacts.push(svg("excess_value.svg", chart.to_svg()));

    let worst = sol.e.iter().zip(sol.last()).map(|(&e, &v)| (v - barrier.value(e)).abs()).fold(0.0, f64::max);
    out.summary = json!({
        "model": "dividend",
        "roots": barrier.roots,
        "coefficients": barrier.coefficients,
        "e_star": barrier.e_star,
        "pasting_residual": barrier.pasting_residual(),
        "tau": sol.tau,
        "free_boundary": sol.free_boundary,
        "max_deviation_from_stationary": worst,
        "oscillation_steps": sol.oscillation_steps,
    });
    Ok(out)
}
