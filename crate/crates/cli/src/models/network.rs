//! Interbank default simulation and the semi-analytic two-bank surfaces.

use circuitlab_core::banking_network::{
    assets_from_scaled, instrument_payoffs, simulate_paths, survival_probabilities, BankNetwork, Estimate, Instrument,
    NetworkRun, PathOutcome,
};
use circuitlab_core::stochastic_engine::SimConfig;
use circuitlab_core::wedge_analytics::{
    joint_survival_q, marginal_survival, marginal_survival_1d, QuadratureSpec, TwoBankProblem,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{svg, Preset};
use crate::config::RunSettings;
use crate::output::{csv_artifact, num, RunOutput};
use crate::plot::{Chart, Heatmap};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkScenario {
    pub figure: u32,
    pub network: BankNetwork<f64>,
    pub simulation: NetworkRun,
}

impl Preset for NetworkScenario {
    const FIGURES: &'static [u32] = &[15];
    const DEFAULT_FIGURE: u32 = 15;

    fn preset(figure: u32) -> (Self, RunSettings) {
        let network = BankNetwork::fig15([60.0, 90.0], [0.4, 0.4], 0.0).expect("reference network is valid");
        (Self { figure, network, simulation: NetworkRun::default() }, RunSettings::new(10_000, 0.05, 12.5, 5))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WedgeScenario {
    pub figure: u32,
    /// Liabilities, volatilities and correlation; external assets are set from the grid.
    pub network: BankNetwork<f64>,
    /// Scaled log-distances of bank 1 from its interior boundary.
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub quadrature: QuadratureSpec,
    /// Also estimate every grid point by simulation with `run.paths` paths.
    pub monte_carlo: bool,
    pub simulation: NetworkRun,
}

impl Preset for WedgeScenario {
    const FIGURES: &'static [u32] = &[16];
    const DEFAULT_FIGURE: u32 = 16;

    fn preset(figure: u32) -> (Self, RunSettings) {
        let network = BankNetwork::fig15([60.0, 90.0], [0.4, 0.4], 0.0).expect("reference network is valid");
        let s = Self {
            figure,
            network,
            x1: vec![2.0, 3.0, 4.0, 5.0, 6.0],
            x2: vec![0.5, 1.5, 2.5, 3.5, 4.5],
            quadrature: QuadratureSpec::default(),
            monte_carlo: false,
            simulation: NetworkRun::default(),
        };
        (s, RunSettings::new(100_000, 0.05, 12.5, 1))
    }
}

fn survival_curves(paths: &[PathOutcome<f64>], n: usize, times: &[f64]) -> Vec<Vec<f64>> {
    let total = paths.len().max(1) as f64;
    times
        .iter()
        .map(|&t| {
            let alive = |p: &PathOutcome<f64>, i: usize| !p.defaults.iter().any(|d| d.bank == i && d.time <= t);
            let mut row = vec![paths.iter().filter(|p| (0..n).all(|i| alive(p, i))).count() as f64 / total];
            row.extend((0..n).map(|i| paths.iter().filter(|p| alive(p, i)).count() as f64 / total));
            row
        })
        .collect()
}

pub(super) fn run_network(p: &NetworkScenario, r: &RunSettings) -> Result<RunOutput> {
    let net = &p.network;
    net.validate()?;
    let n = net.n();
    let cfg = SimConfig::new(r.horizon, r.dt, r.paths, r.seed);
    let paths = simulate_paths(net, &p.simulation, &cfg)?;

    let mut header = vec!["path".to_string()];
    for i in 0..n {
        header.extend([
            format!("survived_{i}"),
            format!("default_time_{i}"),
            format!("terminal_assets_{i}"),
            format!("omega_{i}"),
        ]);
    }
    let rows = paths.iter().map(|o| {
        let mut row = vec![o.path.to_string()];
        for i in 0..n {
            let t = o.defaults.iter().find(|d| d.bank == i).map(|d| num(d.time)).unwrap_or_default();
            row.extend([o.survived[i].to_string(), t, num(o.terminal_assets[i]), num(o.omega[i])]);
        }
        row
    });
    let mut out = RunOutput::default();
    out.artifacts.push(csv_artifact("outcomes.csv", &header, rows));

    let steps = cfg.steps()?;
    let times: Vec<f64> =
        (0..=steps).filter(|k| k % r.record_every == 0 || *k == steps).map(|k| k as f64 * r.dt).collect();
    let curves = survival_curves(&paths, n, &times);
    let mut header = vec!["t".to_string(), "joint".to_string()];
    header.extend((0..n).map(|i| format!("bank_{i}")));
    let rows = times.iter().zip(&curves).map(|(&t, c)| {
        let mut row = vec![num(t)];
        row.extend(c.iter().map(|&v| num(v)));
        row
    });
    out.artifacts.push(csv_artifact("survival.csv", &header, rows));
    let mut chart = Chart::new("No interior default up to t", "t", "fraction of paths");
    for (k, label) in header.iter().skip(1).enumerate() {
        chart = chart.line(label.clone(), times.iter().zip(&curves).map(|(&t, c)| (t, c[k])).collect());
    }
    out.artifacts.push(svg("survival.svg", chart.to_svg()));

    let est = survival_probabilities(&paths)?;
    let mut summary = json!({
        "model": "network",
        "paths": paths.len(),
        "joint_survival": est.joint,
        "marginal_survival": est.marginal,
        "interior_default": (0..n)
            .map(|i| Estimate::<f64>::binomial(paths.iter().filter(|o| o.defaulted_before_maturity(i)).count(), paths.len()))
            .collect::<Vec<_>>(),
    });
    if n == 2 {
        summary["cds"] = json!([
            instrument_payoffs(net, &paths, Instrument::Cds(0))?,
            instrument_payoffs(net, &paths, Instrument::Cds(1))?,
        ]);
        summary["ftd"] = json!(instrument_payoffs(net, &paths, Instrument::Ftd)?);
    }
    out.summary = summary;
    Ok(out)
}

/// One grid point of the two-bank surfaces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WedgeRow {
    pub x: [f64; 2],
    pub assets: [f64; 2],
    /// Joint survival.
    pub q: f64,
    /// Marginal survival of each bank.
    pub marginal: [f64; 2],
    /// Survival of bank 1 against its own boundaries alone.
    pub q1_single: f64,
    /// Simulated joint and marginal survival when requested.
    pub mc: Option<[Estimate<f64>; 3]>,
}

/// Evaluates every `(x1, x2)` grid point, `x1` outermost.
pub fn wedge_rows(p: &WedgeScenario, r: &RunSettings) -> Result<Vec<WedgeRow>> {
    let mut rows = Vec::new();
    for (i, &x1) in p.x1.iter().enumerate() {
        for (j, &x2) in p.x2.iter().enumerate() {
            let mut net = p.network.clone();
            net.external_assets = vec![assets_from_scaled(&p.network, 0, x1), assets_from_scaled(&p.network, 1, x2)];
            let prob = TwoBankProblem::new(&net)?;
            let t = prob.scaled_time(r.horizon);
            let q = joint_survival_q(&prob, prob.start, t, &p.quadrature)?;
            let m0 = marginal_survival(&prob, 0, prob.start, t, &p.quadrature)?;
            let m1 = marginal_survival(&prob, 1, prob.start, t, &p.quadrature)?;
            let single = marginal_survival_1d(&prob, 0, prob.start, t);
            let mc = if p.monte_carlo {
                let k = (i * p.x2.len() + j) as u64;
                // grid index in the high bits so neighbouring seeds share no streams
                let cfg = SimConfig::new(r.horizon, r.dt, r.paths, r.seed ^ (k << 32));
                let est = survival_probabilities(&simulate_paths(&net, &p.simulation, &cfg)?)?;
                Some([est.joint, est.marginal[0], est.marginal[1]])
            } else {
                None
            };
            rows.push(WedgeRow {
                x: [x1, x2],
                assets: [net.external_assets[0], net.external_assets[1]],
                q,
                marginal: [m0, m1],
                q1_single: single,
                mc,
            });
        }
    }
    Ok(rows)
}

pub(super) fn run_wedge(p: &WedgeScenario, r: &RunSettings) -> Result<RunOutput> {
    let rows = wedge_rows(p, r)?;
    let mut header = vec!["x1", "x2", "a1", "a2", "Q", "Q1", "Q2", "q1", "q1_minus_Q1"];
    if p.monte_carlo {
        header.extend(["mc_Q", "mc_Q_se", "mc_Q1", "mc_Q1_se", "mc_Q2", "mc_Q2_se"]);
    }
    let table = rows.iter().map(|w| {
        let mut row: Vec<String> = [w.x[0], w.x[1], w.assets[0], w.assets[1], w.q, w.marginal[0], w.marginal[1], w.q1_single]
            .iter()
            .map(|&v| num(v))
            .collect();
        row.push(num(w.q1_single - w.marginal[0]));
        if let Some(mc) = &w.mc {
            for e in mc {
                row.extend([num(e.mean), num(e.stderr)]);
            }
        }
        row
    });
    let mut out = RunOutput::default();
    out.artifacts.push(csv_artifact("wedge.csv", &header, table));

    let grid = |f: &dyn Fn(&WedgeRow) -> f64| -> Vec<Vec<f64>> {
        (0..p.x2.len()).map(|j| (0..p.x1.len()).map(|i| f(&rows[i * p.x2.len() + j])).collect()).collect()
    };
    let heat = |title: &str, f: &dyn Fn(&WedgeRow) -> f64| Heatmap {
        title: title.to_string(),
        x_label: "X1".into(),
        y_label: "X2".into(),
        xs: p.x1.clone(),
        ys: p.x2.clone(),
        values: grid(f),
    };
    out.artifacts.push(svg("marginal_q1.svg", heat("Marginal survival Q1", &|w| w.marginal[0]).to_svg()));
    out.artifacts.push(svg(
        "q1_minus_Q1.svg",
        heat("Loss of marginal survival from mutual liabilities", &|w| w.q1_single - w.marginal[0]).to_svg(),
    ));
    let min_gap = rows.iter().map(|w| w.q1_single - w.marginal[0]).fold(f64::INFINITY, f64::min);
    out.summary = json!({ "model": "wedge", "points": rows.len(), "min_q1_minus_Q1": min_gap, "rows": rows });
    Ok(out)
}
