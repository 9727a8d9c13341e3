//! Single-bank balance sheet: flow equations under controls, the shareholder
//! cash-flow objective, Basel-style constraints and a constant-control search.
//!
//! Stocks are integrated with an exponential integrator, exact for controls
//! held constant over a step. Cash is evolved and equity recomputed from the
//! balancing identity; an independently integrated equity line is kept as a
//! cross-check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CircuitError, Result};
use crate::scalar::Scalar;
use crate::stochastic_engine::{map_paths, standard_normal, RngStream, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowParams<T> {
    /// Loan repayment/loss rate.
    pub lambda: T,
    /// Debt repayment rate.
    pub mu: T,
    /// Loan interest rate.
    pub nu: T,
    /// Debt interest rate.
    pub xi: T,
    /// Deposit withdrawal rate.
    pub alpha: T,
    /// Deposit interest rate.
    pub beta: T,
    /// Expected investment growth rate.
    pub r: T,
    /// Dividend yield on investments.
    pub zeta: T,
    pub sigma: T,
    pub discount: T,
    /// Maturity used by the lagged new-loan and new-debt terms.
    pub t_lag: T,
}

impl<T: Scalar> FlowParams<T> {
    pub fn zero() -> Self {
        let z = T::zero();
        Self {
            lambda: z,
            mu: z,
            nu: z,
            xi: z,
            alpha: z,
            beta: z,
            r: z,
            zeta: z,
            sigma: z,
            discount: z,
            t_lag: z,
        }
    }

    /// A plain commercial-bank setting used by the examples.
    pub fn example() -> Self {
        Self {
            lambda: T::lit(0.2),
            mu: T::lit(0.1),
            nu: T::lit(0.06),
            xi: T::lit(0.03),
            alpha: T::lit(0.1),
            beta: T::lit(0.01),
            r: T::lit(0.04),
            zeta: T::lit(0.02),
            sigma: T::lit(0.15),
            discount: T::lit(0.08),
            t_lag: T::lit(5.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("lambda", self.lambda),
            ("mu", self.mu),
            ("nu", self.nu),
            ("xi", self.xi),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("r", self.r),
            ("zeta", self.zeta),
            ("sigma", self.sigma),
            ("discount", self.discount),
            ("t_lag", self.t_lag),
        ];
        for (name, v) in named {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowState<T> {
    pub x: T,
    pub i: T,
    pub c: T,
    pub d: T,
    pub y: T,
    pub e: T,
}

impl<T: Scalar> FlowState<T> {
    /// Builds a state with equity set by the balancing identity.
    pub fn balanced(x: T, i: T, c: T, d: T, y: T) -> Self {
        Self { x, i, c, d, y, e: x + i + c - d - y }
    }

    pub fn total_assets(&self) -> T {
        self.x + self.i + self.c
    }

    /// `X + I + C - D - Y - E`.
    pub fn residual(&self) -> T {
        self.x + self.i + self.c - self.d - self.y - self.e
    }

    fn scale(&self) -> T {
        self.total_assets().abs().max(T::one())
    }
}

/// Control values in force at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantControls<T> {
    /// New-loan rate.
    pub phi: T,
    /// New-borrowing rate.
    pub psi: T,
    pub omega_inv: T,
    pub pi_dep: T,
    /// Dividend/buyback rate; negative means issuance.
    pub delta_div: T,
}

/// Piecewise-constant control schedule. Value `k` holds on
/// `[knots[k], knots[k+1])`; before the first knot the first value applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlPath<T> {
    pub knots: Vec<T>,
    pub values: Vec<ConstantControls<T>>,
}

impl<T: Scalar> ControlPath<T> {
    pub fn constant(u: ConstantControls<T>) -> Self {
        Self { knots: vec![T::zero()], values: vec![u] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.knots.is_empty() || self.knots.len() != self.values.len() {
            return Err(invalid("controls", "knots and values must be non-empty and equally long"));
        }
        if self.knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("controls", "knots must be strictly increasing"));
        }
        Ok(())
    }

    pub fn at(&self, t: T) -> ConstantControls<T> {
        let k = self.knots.partition_point(|&s| s <= t);
        self.values[k.saturating_sub(1)]
    }

    /// Net new loans `phi(t) - e^{-lambda T} phi(t - T)` and net new debt
    /// `psi(t) - e^{-mu T} psi(t - T)`.
    pub fn net_new(&self, t: T, p: &FlowParams<T>) -> (T, T) {
        let now = self.at(t);
        let then = self.at(t - p.t_lag);
        (
            now.phi - (-p.lambda * p.t_lag).exp() * then.phi,
            now.psi - (-p.mu * p.t_lag).exp() * then.psi,
        )
    }
}

fn phi1<T: Scalar>(z: T) -> T {
    if z.abs() < T::lit(1e-8) {
        T::one() + z * T::half()
    } else {
        z.exp_m1() / z
    }
}

fn phi2<T: Scalar>(z: T) -> T {
    if z.abs() < T::lit(0.05) {
        let mut term = T::half();
        let mut sum = term;
        for k in 3..12 {
            term = term * z / T::from_usize(k).unwrap();
            sum += term;
        }
        sum
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

/// Exact step of `u' = -a u + f` with constant `f`: returns the new value
/// and `\int u` over the step.
fn linear_step<T: Scalar>(u: T, a: T, f: T, h: T) -> (T, T) {
    let z = -a * h;
    let next = z.exp() * u + h * phi1(z) * f;
    let area = h * phi1(z) * u + h * h * phi2(z) * f;
    (next, area)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrajectory<T> {
    pub path: u64,
    pub t: Vec<T>,
    pub states: Vec<FlowState<T>>,
    /// Expected investments with dividends reinvested.
    pub j: Vec<T>,
    /// Equity integrated from its own flow equation.
    pub equity_tracked: Vec<T>,
    /// Controls in force from each recorded time onward.
    pub controls: Vec<ConstantControls<T>>,
    /// Largest `|E_tracked - (X + I + C - D - Y)| / assets` over the run.
    pub max_residual: T,
}

pub const FLOW_COLUMNS: [&str; 10] = ["x", "i", "c", "d", "y", "e", "j", "equity_tracked", "net_new_loans", "delta_div"];

/// Integrates the flow equations from `state` to `horizon`. With `noise`
/// set, investments follow the lognormal step driven by that stream.
pub fn evolve<T: Scalar>(
    state: FlowState<T>,
    p: &FlowParams<T>,
    controls: &ControlPath<T>,
    horizon: T,
    dt: T,
    noise: Option<RngStream>,
) -> Result<FlowTrajectory<T>> {
    p.validate()?;
    controls.validate()?;
    let steps = SimConfig::new(horizon, dt, 1, 0).steps()?;
    let res = state.residual();
    if res.abs() > T::lit(1e-10) * state.scale() {
        return Err(CircuitError::Identity(format!("X + I + C - D - Y - E = {res}")));
    }
    let mut rng = noise.map(|s| s.rng());
    let mut s = state;
    let mut j = state.i;
    let mut e_tracked = state.e;
    let mut out = FlowTrajectory {
        path: noise.map(|s| s.stream_index).unwrap_or(0),
        t: vec![T::zero()],
        states: vec![s],
        j: vec![j],
        equity_tracked: vec![e_tracked],
        controls: vec![controls.at(T::zero())],
        max_residual: T::zero(),
    };
    let g = p.r - p.zeta;
    for k in 0..steps {
        let t = T::from_usize(k).unwrap() * dt;
        let u = controls.at(t);
        let (big_phi, big_psi) = controls.net_new(t, p);

        let (x1, ix) = linear_step(s.x, p.lambda, big_phi, dt);
        let (d1, id) = linear_step(s.d, p.alpha, u.pi_dep, dt);
        let (y1, iy) = linear_step(s.y, p.mu, big_psi, dt);
        let (j1, _) = linear_step(j, -p.r, u.omega_inv, dt);
        let (i1, ii) = match rng.as_mut() {
            None => linear_step(s.i, -g, u.omega_inv, dt),
            Some(rng) => {
                let z: T = standard_normal(rng);
                let growth = ((g - T::half() * p.sigma * p.sigma) * dt + p.sigma * dt.sqrt() * z).exp();
                let i1 = s.i * growth + u.omega_inv * dt * phi1(g * dt);
                (i1, T::half() * dt * (s.i + i1))
            }
        };
        let income = p.nu * ix + p.zeta * ii - u.omega_inv * dt - p.beta * id - p.xi * iy - u.delta_div * dt;
        let c1 = s.c - (x1 - s.x) + (d1 - s.d) + (y1 - s.y) + income;
        e_tracked += income + (i1 - s.i);
        s = FlowState::balanced(x1, i1, c1, d1, y1);
        j = j1;
        let step = k + 1;
        if let Some(c) = [s.x, s.i, s.c, s.d, s.y, s.e].iter().position(|v| !v.is_finite()) {
            return Err(CircuitError::NonFinite { component: c, step });
        }
        let r = ((e_tracked - s.e) / s.scale()).abs();
        out.max_residual = out.max_residual.max(r);
        let t1 = T::from_usize(step).unwrap() * dt;
        out.t.push(t1);
        out.states.push(s);
        out.j.push(j);
        out.equity_tracked.push(e_tracked);
        out.controls.push(controls.at(t1));
    }
    Ok(out)
}

/// Monte Carlo wrapper around [`evolve`], one path per stream.
pub fn simulate<T: Scalar>(
    state: FlowState<T>,
    p: &FlowParams<T>,
    controls: &ControlPath<T>,
    stochastic: bool,
    cfg: &SimConfig<T>,
) -> Result<Vec<FlowTrajectory<T>>> {
    if !stochastic {
        return Ok(vec![evolve(state, p, controls, cfg.horizon, cfg.dt, None)?]);
    }
    map_paths(cfg.seed, cfg.paths, |stream| {
        evolve(state, p, controls, cfg.horizon, cfg.dt, Some(stream))
    })
    .into_iter()
    .collect()
}

impl<T: Scalar> FlowTrajectory<T> {
    /// Rows matching [`FLOW_COLUMNS`].
    pub fn rows(&self, p: &FlowParams<T>, controls: &ControlPath<T>) -> Vec<Vec<T>> {
        (0..self.t.len())
            .map(|k| {
                let s = self.states[k];
                let (nl, _) = controls.net_new(self.t[k], p);
                vec![s.x, s.i, s.c, s.d, s.y, s.e, self.j[k], self.equity_tracked[k], nl, self.controls[k].delta_div]
            })
            .collect()
    }
}

/// Discounted shareholder cash flow up to the trajectory's final time,
/// by the trapezoidal rule on the recorded grid.
pub fn cashflow_objective<T: Scalar>(traj: &FlowTrajectory<T>, p: &FlowParams<T>) -> T {
    let n = traj.t.len();
    if n < 2 {
        return T::zero();
    }
    let big_t = traj.t[n - 1];
    let f: Vec<T> = (0..n)
        .map(|k| {
            let s = &traj.states[k];
            let disc = (-p.discount * (traj.t[k] - big_t)).exp() - T::one();
            p.nu * s.x + p.r * traj.j[k] - p.beta * s.d - p.xi * s.y + disc * traj.controls[k].delta_div
        })
        .collect();
    let mut acc = T::zero();
    for k in 1..n {
        acc += T::half() * (traj.t[k] - traj.t[k - 1]) * (f[k] + f[k - 1]);
    }
    (-p.discount * big_t).exp() * acc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "T: Scalar"))]
pub struct RegWeights<T: Scalar> {
    /// Standard-model risk weight per loan bucket.
    #[serde(default = "unit_vec")]
    pub rwa: Vec<T>,
    /// Share of total loans in each bucket.
    #[serde(default = "unit_vec")]
    pub loan_mix: Vec<T>,
    pub kappa: T,
    pub rsf_x: T,
    pub rsf_i: T,
    pub asf_d: T,
    pub asf_y: T,
    pub co_d: T,
    pub co_y: T,
    pub ci_x: T,
    pub ci_i: T,
    pub k2: T,
    pub k3: T,
    pub k4: T,
}

fn unit_vec<T: Scalar>() -> Vec<T> {
    vec![T::one()]
}

impl<T: Scalar> RegWeights<T> {
    pub fn zero() -> Self {
        let z = T::zero();
        Self {
            rwa: vec![z],
            loan_mix: vec![T::one()],
            kappa: z,
            rsf_x: z,
            rsf_i: z,
            asf_d: z,
            asf_y: z,
            co_d: z,
            co_y: z,
            ci_x: z,
            ci_i: z,
            k2: z,
            k3: z,
            k4: z,
        }
    }

    /// Weights in the spirit of the Basel III standardised tables.
    pub fn basel_like() -> Self {
        Self {
            rwa: vec![T::lit(0.8)],
            loan_mix: vec![T::one()],
            kappa: T::lit(0.105),
            rsf_x: T::lit(0.85),
            rsf_i: T::lit(0.5),
            asf_d: T::lit(0.9),
            asf_y: T::one(),
            co_d: T::lit(0.1),
            co_y: T::lit(0.25),
            ci_x: T::lit(0.05),
            ci_i: T::lit(0.5),
            k2: T::one(),
            k3: T::one(),
            k4: T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rwa.is_empty() || self.rwa.len() != self.loan_mix.len() {
            return Err(invalid("rwa", "need one weight per loan_mix bucket"));
        }
        let scalars = [
            self.rsf_x, self.rsf_i, self.asf_d, self.asf_y, self.co_d, self.co_y, self.ci_x, self.ci_i, self.k2,
            self.k3, self.k4,
        ];
        if self.rwa.iter().chain(&self.loan_mix).chain(&scalars).any(|&w| !(w >= T::zero())) {
            return Err(invalid("weights", "must be >= 0"));
        }
        if !(self.kappa >= T::zero() && self.kappa < T::one()) {
            return Err(invalid("kappa", "must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn risk_weighted_assets(&self, x: T) -> T {
        self.rwa.iter().zip(&self.loan_mix).map(|(&w, &m)| w * m * x).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport<T> {
    pub rwa: T,
    /// Required capital `kappa RWA + K2 + K3 + K4`.
    pub required_capital: T,
    /// `E - K`.
    pub capital_slack: T,
    /// `ASF - RSF`.
    pub funding_slack: T,
    /// `CI - CO`.
    pub liquidity_slack: T,
}

impl<T: Scalar> ConstraintReport<T> {
    pub fn capital_ok(&self) -> bool {
        self.capital_slack > T::zero()
    }
    pub fn funding_ok(&self) -> bool {
        self.funding_slack > T::zero()
    }
    pub fn liquidity_ok(&self) -> bool {
        self.liquidity_slack > T::zero()
    }
    pub fn all_ok(&self) -> bool {
        self.capital_ok() && self.funding_ok() && self.liquidity_ok()
    }
}

pub fn constraints_report<T: Scalar>(s: &FlowState<T>, w: &RegWeights<T>) -> ConstraintReport<T> {
    let rwa = w.risk_weighted_assets(s.x);
    let k = w.kappa * rwa + w.k2 + w.k3 + w.k4;
    let asf = w.asf_d * s.d + w.asf_y * s.y + s.e;
    let rsf = w.rsf_x * s.x + w.rsf_i * s.i;
    let ci = w.ci_x * s.x + w.ci_i * s.i + s.c;
    let co = w.co_d * s.d + w.co_y * s.y;
    ConstraintReport {
        rwa,
        required_capital: k,
        capital_slack: s.e - k,
        funding_slack: asf - rsf,
        liquidity_slack: ci - co,
    }
}

/// Grid along one control: `points` evenly spaced values in `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis<T> {
    pub min: T,
    pub max: T,
    pub points: usize,
}

impl<T: Scalar> Axis<T> {
    pub fn fixed(v: T) -> Self {
        Self { min: v, max: v, points: 1 }
    }

    pub fn values(&self) -> Vec<T> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.min],
            n => {
                let step = (self.max - self.min) / T::from_usize(n - 1).unwrap();
                (0..n).map(|k| self.min + step * T::from_usize(k).unwrap()).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlGrid<T> {
    pub phi: Axis<T>,
    pub psi: Axis<T>,
    pub omega_inv: Axis<T>,
    pub pi_dep: Axis<T>,
    pub delta_div: Axis<T>,
}

impl<T: Scalar> ControlGrid<T> {
    pub fn points(&self) -> Vec<ConstantControls<T>> {
        let mut out = Vec::new();
        for &phi in &self.phi.values() {
            for &psi in &self.psi.values() {
                for &omega_inv in &self.omega_inv.values() {
                    for &pi_dep in &self.pi_dep.values() {
                        for &delta_div in &self.delta_div.values() {
                            out.push(ConstantControls { phi, psi, omega_inv, pi_dep, delta_div });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchRow<T> {
    pub controls: ConstantControls<T>,
    pub cf: T,
    pub min_capital_slack: T,
    pub min_funding_slack: T,
    pub min_liquidity_slack: T,
}

impl<T: Scalar> SearchRow<T> {
    pub fn feasible(&self) -> bool {
        self.min_capital_slack > T::zero() && self.min_funding_slack > T::zero() && self.min_liquidity_slack > T::zero()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult<T> {
    pub rows: Vec<SearchRow<T>>,
    /// Index into `rows` of the feasible point with the largest CF, if any.
    pub best: Option<usize>,
}

impl<T: Scalar> SearchResult<T> {
    pub fn best_row(&self) -> Option<&SearchRow<T>> {
        self.best.map(|k| &self.rows[k])
    }
}

/// Evaluates one constant control: deterministic run, CF and the smallest
/// slack of each constraint over every step.
pub fn evaluate_constant<T: Scalar>(
    initial: FlowState<T>,
    p: &FlowParams<T>,
    w: &RegWeights<T>,
    horizon: T,
    dt: T,
    u: ConstantControls<T>,
) -> Result<SearchRow<T>> {
    let traj = evolve(initial, p, &ControlPath::constant(u), horizon, dt, None)?;
    let mut row = SearchRow {
        controls: u,
        cf: cashflow_objective(&traj, p),
        min_capital_slack: T::infinity(),
        min_funding_slack: T::infinity(),
        min_liquidity_slack: T::infinity(),
    };
    for s in &traj.states {
        let r = constraints_report(s, w);
        row.min_capital_slack = row.min_capital_slack.min(r.capital_slack);
        row.min_funding_slack = row.min_funding_slack.min(r.funding_slack);
        row.min_liquidity_slack = row.min_liquidity_slack.min(r.liquidity_slack);
    }
    Ok(row)
}

/// Exhaustive search over constant controls. Points violating any
/// constraint at any step are kept in the table but cannot be `best`.
pub fn constant_control_search<T: Scalar>(
    initial: FlowState<T>,
    p: &FlowParams<T>,
    w: &RegWeights<T>,
    horizon: T,
    dt: T,
    grid: &ControlGrid<T>,
) -> Result<SearchResult<T>> {
    w.validate()?;
    let rows: Result<Vec<SearchRow<T>>> = grid
        .points()
        .into_par_iter()
        .map(|u| evaluate_constant(initial, p, w, horizon, dt, u))
        .collect();
    let rows = rows?;
    let best = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.feasible())
        .fold(None, |acc: Option<(usize, T)>, (k, r)| match acc {
            Some((_, cf)) if cf >= r.cf => acc,
            _ => Some((k, r.cf)),
        })
        .map(|(k, _)| k);
    Ok(SearchResult { rows, best })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_functions_match_series_at_switch() {
        for z in [0.049f64, 0.051, -0.049, -0.051] {
            let direct = (z.exp_m1() - z) / (z * z);
            assert!((phi2(z) - direct).abs() < 1e-12);
        }
        assert!((phi1(1e-9f64) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn schedule_lookup() {
        let u = |v: f64| ConstantControls { phi: v, ..Default::default() };
        let c = ControlPath { knots: vec![0.0, 1.0, 2.0], values: vec![u(1.0), u(2.0), u(3.0)] };
        assert_eq!(c.at(-5.0).phi, 1.0);
        assert_eq!(c.at(0.5).phi, 1.0);
        assert_eq!(c.at(1.0).phi, 2.0);
        assert_eq!(c.at(7.0).phi, 3.0);
    }

    #[test]
    fn axis_values() {
        let a = Axis { min: 0.0, max: 1.0, points: 5 };
        assert_eq!(a.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(Axis::fixed(2.0).values(), vec![2.0]);
    }
}
