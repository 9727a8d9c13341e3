//! Interlinked banks with external and mutual obligations: default
//! boundaries, removal of defaulted banks, terminal clearing and Monte
//! Carlo estimates of survival probabilities and credit payoffs.
//!
//! Liabilities grow deterministically at rate `mu`, the same drift as the
//! assets, so the simulation works in time-zero money units: it evolves
//! `ln A_i - mu t` against fixed boundary levels.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CircuitError, Result};
use crate::linalg::solve;
use crate::scalar::Scalar;
use crate::stochastic_engine::{
    map_paths, marshall_olkin_arrivals, standard_normal, CorrelationMatrix, JumpSpec, JumpSubset, SimConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "T: Scalar"))]
pub struct BankNetwork<T: Scalar> {
    pub external_assets: Vec<T>,
    pub external_liabilities: Vec<T>,
    /// `mutual[i][j]` is what bank `i` owes bank `j`.
    pub mutual: Vec<Vec<T>>,
    pub recoveries: Vec<T>,
    pub vols: Vec<T>,
    #[serde(default)]
    pub mu: T,
    pub corr: CorrelationMatrix<T>,
    #[serde(default)]
    pub jumps: Option<JumpSpec<T>>,
}

impl<T: Scalar> BankNetwork<T> {
    /// Two banks with the liabilities used for the wedge examples:
    /// `L = (50, 60)`, `L12 = 10`, `L21 = 20`, `R = (0.4, 0.4)`.
    pub fn fig15(assets: [T; 2], vols: [T; 2], rho: T) -> Result<Self> {
        let net = Self {
            external_assets: assets.to_vec(),
            external_liabilities: vec![T::lit(50.0), T::lit(60.0)],
            mutual: vec![vec![T::zero(), T::lit(10.0)], vec![T::lit(20.0), T::zero()]],
            recoveries: vec![T::lit(0.4), T::lit(0.4)],
            vols: vols.to_vec(),
            mu: T::zero(),
            corr: CorrelationMatrix::pair(rho)?,
            jumps: None,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn n(&self) -> usize {
        self.external_assets.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(invalid("external_assets", "need at least one bank"));
        }
        let lens = [
            ("external_liabilities", self.external_liabilities.len()),
            ("mutual", self.mutual.len()),
            ("recoveries", self.recoveries.len()),
            ("vols", self.vols.len()),
            ("corr", self.corr.dim()),
        ];
        for (name, len) in lens {
            if len != n {
                return Err(invalid(name, format!("expected {n} entries, got {len}")));
            }
        }
        for (i, row) in self.mutual.iter().enumerate() {
            if row.len() != n {
                return Err(invalid("mutual", "matrix is not square"));
            }
            if row[i] != T::zero() {
                return Err(invalid("mutual", format!("diagonal entry {i} must be zero")));
            }
            if row.iter().any(|&x| !(x >= T::zero())) {
                return Err(invalid("mutual", format!("row {i} has a negative entry")));
            }
        }
        for i in 0..n {
            if !(self.external_assets[i] > T::zero()) {
                return Err(invalid("external_assets", format!("bank {i} must be positive")));
            }
            if !(self.external_liabilities[i] >= T::zero()) {
                return Err(invalid("external_liabilities", format!("bank {i} must be >= 0")));
            }
            if !(self.recoveries[i] >= T::zero() && self.recoveries[i] <= T::one()) {
                return Err(invalid("recoveries", format!("bank {i} outside [0, 1]")));
            }
            if !(self.vols[i] >= T::zero()) {
                return Err(invalid("vols", format!("bank {i} must be >= 0")));
            }
        }
        if let Some(j) = &self.jumps {
            j.validate()?;
            if j.dim() != n {
                return Err(invalid("jumps", format!("decay has {} entries for {n} banks", j.dim())));
            }
        }
        Ok(())
    }

    /// `sum_j L_ji`.
    pub fn interbank_assets(&self, i: usize) -> T {
        (0..self.n()).filter(|&j| j != i).map(|j| self.mutual[j][i]).sum()
    }

    /// `sum_j L_ij`.
    pub fn interbank_liabilities(&self, i: usize) -> T {
        self.mutual[i].iter().copied().sum()
    }

    pub fn equity(&self, i: usize) -> T {
        self.external_assets[i] + self.interbank_assets(i)
            - self.external_liabilities[i]
            - self.interbank_liabilities(i)
    }

    pub fn total_liabilities(&self, i: usize) -> T {
        self.external_liabilities[i] + self.interbank_liabilities(i)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefaultBoundarySet<T> {
    /// Levels monitored before maturity.
    pub interior: Vec<T>,
    /// Levels applied at maturity.
    pub terminal: Vec<T>,
}

pub fn boundaries<T: Scalar>(net: &BankNetwork<T>) -> DefaultBoundarySet<T> {
    let n = net.n();
    let mut out = DefaultBoundarySet { interior: Vec::with_capacity(n), terminal: Vec::with_capacity(n) };
    for i in 0..n {
        let owed = net.total_liabilities(i);
        let claims = net.interbank_assets(i);
        out.interior.push(net.recoveries[i] * owed - claims);
        out.terminal.push(owed - claims);
    }
    out
}

/// Removes bank `k` after it defaults. Each survivor's claim on `k` is
/// replaced by the recovered fraction and its debt to `k` becomes external,
/// so its boundaries move right by `(1 - R_i R_k) L_ki` (interior) and
/// `(1 - R_k) L_ki` (terminal).
pub fn remove_bank<T: Scalar>(net: &BankNetwork<T>, k: usize) -> Result<BankNetwork<T>> {
    let n = net.n();
    if k >= n {
        return Err(invalid("k", format!("bank {k} out of range for {n} banks")));
    }
    let keep: Vec<usize> = (0..n).filter(|&i| i != k).collect();
    let rk = net.recoveries[k];
    let pick = |v: &[T]| keep.iter().map(|&i| v[i]).collect::<Vec<T>>();
    let external_liabilities = keep
        .iter()
        .map(|&i| net.external_liabilities[i] + net.mutual[i][k] - rk * net.mutual[k][i])
        .collect();
    let mutual = keep.iter().map(|&i| pick(&net.mutual[i])).collect();
    let jumps = net.jumps.as_ref().map(|j| {
        let reindex = |m: usize| if m > k { m - 1 } else { m };
        let subsets = j
            .subsets
            .iter()
            .filter_map(|s| {
                let members: Vec<usize> = s.members.iter().filter(|&&m| m != k).map(|&m| reindex(m)).collect();
                (!members.is_empty()).then(|| JumpSubset { members, intensity: s.intensity })
            })
            .collect();
        JumpSpec { subsets, decay: pick(&j.decay) }
    });
    Ok(BankNetwork {
        external_assets: pick(&net.external_assets),
        external_liabilities,
        mutual,
        recoveries: pick(&net.recoveries),
        vols: pick(&net.vols),
        mu: net.mu,
        corr: net.corr.restrict(&keep),
        jumps,
    })
}

/// Non-dimensional coordinates: `X_i = (Sigma / sigma_i) ln(A_i / Lambda_i^<)`
/// in scaled time `Sigma^2 t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NondimContext<T> {
    /// Geometric-mean volatility.
    pub sigma_bar: T,
    pub x: Vec<T>,
    pub xi: Vec<T>,
    pub zeta: Vec<T>,
    pub varsigma: Vec<T>,
    /// Terminal boundaries `M_i^=`; the interior ones are all zero.
    pub m_terminal: Vec<T>,
}

impl<T: Scalar> NondimContext<T> {
    pub fn new(net: &BankNetwork<T>) -> Result<Self> {
        net.validate()?;
        let n = net.n();
        if net.vols.iter().any(|&s| !(s > T::zero())) {
            return Err(invalid("vols", "all volatilities must be positive"));
        }
        let b = boundaries(net);
        if let Some(i) = b.interior.iter().position(|&l| !(l > T::zero())) {
            return Err(CircuitError::Domain(format!("bank {i} has a non-positive interior boundary")));
        }
        let nn = T::from_usize(n).unwrap();
        let sigma_bar = (net.vols.iter().map(|s| s.ln()).sum::<T>() / nn).exp();
        let jumps = net.jumps.clone().unwrap_or_else(|| JumpSpec::none(n));
        let mut ctx = Self {
            sigma_bar,
            x: Vec::new(),
            xi: Vec::new(),
            zeta: Vec::new(),
            varsigma: Vec::new(),
            m_terminal: Vec::new(),
        };
        for i in 0..n {
            let s = net.vols[i];
            let zeta = sigma_bar / s;
            let lambda = jumps.bank_intensity(i);
            ctx.x.push(zeta * (net.external_assets[i] / b.interior[i]).ln());
            ctx.xi.push(-s / (T::two() * sigma_bar) - jumps.compensator(i) * lambda / (s * sigma_bar));
            ctx.zeta.push(zeta);
            ctx.varsigma.push(s * jumps.decay[i] / sigma_bar);
            ctx.m_terminal.push(zeta * (b.terminal[i] / b.interior[i]).ln());
        }
        Ok(ctx)
    }

    pub fn scaled_time(&self, t: T) -> T {
        self.sigma_bar * self.sigma_bar * t
    }
}

/// Assets `A_i` corresponding to the scaled coordinate `x`.
pub fn assets_from_scaled<T: Scalar>(net: &BankNetwork<T>, i: usize, x: T) -> T {
    let n = T::from_usize(net.n()).unwrap();
    let sigma_bar = (net.vols.iter().map(|s| s.ln()).sum::<T>() / n).exp();
    boundaries(net).interior[i] * (net.vols[i] * x / sigma_bar).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clearing<T> {
    pub omega: Vec<T>,
    /// `omega_i = 1` within `1e-9`.
    pub solvent: Vec<bool>,
    pub iterations: usize,
    /// Whether the iteration cap was hit and the exact linear solve used.
    pub fallback: bool,
}

const SOLVENT_TOL: f64 = 1e-9;

fn clearing_map<T: Scalar>(assets: &[T], ext: &[T], mutual: &[Vec<T>], alive: &[bool], w: &[T]) -> Vec<T> {
    let n = assets.len();
    (0..n)
        .map(|i| {
            if !alive[i] {
                return T::zero();
            }
            let mut owed = ext[i];
            let mut inflow = assets[i];
            for j in 0..n {
                if j != i && alive[j] {
                    owed += mutual[i][j];
                    inflow += mutual[j][i] * w[j];
                }
            }
            if owed > T::zero() {
                (inflow / owed).min(T::one())
            } else {
                T::one()
            }
        })
        .collect()
}

/// Clearing among the banks flagged `alive`; the others neither pay nor
/// receive.
pub fn clear_subset<T: Scalar>(assets: &[T], ext: &[T], mutual: &[Vec<T>], alive: &[bool]) -> Result<Clearing<T>> {
    let n = assets.len();
    let mut w: Vec<T> = alive.iter().map(|&a| if a { T::one() } else { T::zero() }).collect();
    let cap = 10 * n * n;
    let mut iterations = 0;
    let mut converged = false;
    let mono_tol = T::lit(1e-14);
    while iterations < cap {
        let next = clearing_map(assets, ext, mutual, alive, &w);
        iterations += 1;
        let mut step = T::zero();
        for i in 0..n {
            if next[i] > w[i] + mono_tol {
                return Err(CircuitError::Domain(format!(
                    "clearing iterate {i} increased from {} to {} at iteration {iterations}",
                    w[i], next[i]
                )));
            }
            step = step.max((next[i] - w[i]).abs());
        }
        w = next;
        if step < T::lit(1e-12) {
            converged = true;
            break;
        }
    }
    let mut fallback = false;
    if !converged {
        fallback = true;
        // exact solve on the current default set, repeated until the set is stable
        for _ in 0..=n {
            let defaulted: Vec<usize> = (0..n).filter(|&i| alive[i] && w[i] < T::one()).collect();
            let m = defaulted.len();
            let mut a = vec![vec![T::zero(); m]; m];
            let mut rhs = vec![T::zero(); m];
            for (r, &i) in defaulted.iter().enumerate() {
                let mut owed = ext[i];
                rhs[r] = assets[i];
                for j in 0..n {
                    if j != i && alive[j] {
                        owed += mutual[i][j];
                        if let Some(c) = defaulted.iter().position(|&d| d == j) {
                            a[r][c] -= mutual[j][i];
                        } else {
                            rhs[r] += mutual[j][i];
                        }
                    }
                }
                a[r][r] += owed;
            }
            let sol = solve(&a, &rhs)?;
            for (r, &i) in defaulted.iter().enumerate() {
                w[i] = sol[r].max(T::zero()).min(T::one());
            }
            let next = clearing_map(assets, ext, mutual, alive, &w);
            let same = (0..n).all(|i| (next[i] < T::one()) == (w[i] < T::one()));
            w = next;
            if same {
                break;
            }
        }
    }
    let check = clearing_map(assets, ext, mutual, alive, &w);
    let res = (0..n).fold(T::zero(), |m, i| m.max((check[i] - w[i]).abs()));
    if res > T::lit(1e-10) {
        return Err(CircuitError::NoConvergence { what: "clearing vector", iterations, residual: res.to64() });
    }
    let solvent = (0..n).map(|i| alive[i] && w[i] >= T::one() - T::lit(SOLVENT_TOL)).collect();
    Ok(Clearing { omega: w, solvent, iterations, fallback })
}

/// Terminal clearing of the whole network given terminal external assets.
pub fn clearing_vector<T: Scalar>(net: &BankNetwork<T>, terminal_assets: &[T]) -> Result<Clearing<T>> {
    if terminal_assets.len() != net.n() {
        return Err(invalid("terminal_assets", "one entry per bank"));
    }
    clear_subset(terminal_assets, &net.external_liabilities, &net.mutual, &vec![true; net.n()])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    #[default]
    Lognormal,
    JumpDiffusion,
}

/// Monte Carlo options on top of the time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkRun {
    #[serde(default)]
    pub dynamics: Dynamics,
    /// Brownian-bridge crossing test between grid points.
    #[serde(default = "yes")]
    pub bridge: bool,
    /// Substeps used to locate crossings when more than one bank is alive.
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    /// Bridge crossing probability above which a step is refined.
    #[serde(default = "default_refine")]
    pub refine_above: f64,
}

fn yes() -> bool {
    true
}
fn default_substeps() -> usize {
    32
}
fn default_refine() -> f64 {
    1e-8
}

impl Default for NetworkRun {
    fn default() -> Self {
        Self { dynamics: Dynamics::Lognormal, bridge: true, substeps: default_substeps(), refine_above: default_refine() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefaultEvent<T> {
    pub bank: usize,
    pub time: T,
    /// External assets (time-zero units) at default.
    pub assets: T,
    /// Whether every other bank was still alive at that moment.
    pub others_alive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathOutcome<T> {
    pub path: u64,
    /// Interior defaults in the order they happened.
    pub defaults: Vec<DefaultEvent<T>>,
    /// Terminal external assets of survivors (NaN for defaulted banks).
    pub terminal_assets: Vec<T>,
    pub omega: Vec<T>,
    /// Survived the interior and was solvent at clearing.
    pub survived: Vec<bool>,
}

impl<T: Scalar> PathOutcome<T> {
    pub fn defaulted_before_maturity(&self, i: usize) -> bool {
        self.defaults.iter().any(|d| d.bank == i)
    }
}

struct Live<'a, T: Scalar> {
    net: &'a BankNetwork<T>,
    ext: Vec<T>,
    alive: Vec<bool>,
}

impl<'a, T: Scalar> Live<'a, T> {
    fn new(net: &'a BankNetwork<T>) -> Self {
        Self { net, ext: net.external_liabilities.clone(), alive: vec![true; net.n()] }
    }

    fn log_barrier(&self, i: usize) -> T {
        let n = self.net.n();
        let mut owed = self.ext[i];
        let mut claims = T::zero();
        for j in 0..n {
            if j != i && self.alive[j] {
                owed += self.net.mutual[i][j];
                claims += self.net.mutual[j][i];
            }
        }
        let b = self.net.recoveries[i] * owed - claims;
        if b > T::zero() {
            b.ln()
        } else {
            T::neg_infinity()
        }
    }

    fn remove(&mut self, k: usize) {
        self.alive[k] = false;
        let rk = self.net.recoveries[k];
        for i in 0..self.net.n() {
            if self.alive[i] {
                self.ext[i] += self.net.mutual[i][k] - rk * self.net.mutual[k][i];
            }
        }
    }

    fn count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }
}

/// Probability that a Brownian bridge of variance `var` from `a > 0` to
/// `b > 0` (distances above the barrier) dips below zero.
fn bridge_cross<T: Scalar>(a: T, b: T, var: T) -> T {
    if !(a > T::zero()) || !(b > T::zero()) {
        return T::one();
    }
    if !(var > T::zero()) || !a.is_finite() || !b.is_finite() {
        return T::zero();
    }
    (-T::two() * a * b / var).exp()
}

struct PathSim<'a, T: Scalar, R: Rng> {
    live: Live<'a, T>,
    z: Vec<T>,
    rng: R,
    events: Vec<DefaultEvent<T>>,
}

impl<'a, T: Scalar, R: Rng> PathSim<'a, T, R> {
    /// Defaults every listed bank at time `t`, deepest breach first, then
    /// any survivor that now sits at or below its moved boundary.
    fn settle(&mut self, mut crossed: Vec<(usize, T)>, t: T) {
        let n = self.z.len();
        loop {
            crossed.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
            for &(i, _) in &crossed {
                if !self.live.alive[i] {
                    continue;
                }
                let b = self.live.log_barrier(i);
                let at = if self.z[i] <= b { self.z[i] } else { b };
                let others_alive = self.live.count() == n;
                self.events.push(DefaultEvent { bank: i, time: t, assets: at.exp(), others_alive });
                self.live.remove(i);
            }
            crossed = (0..n)
                .filter(|&i| self.live.alive[i])
                .filter_map(|i| {
                    let b = self.live.log_barrier(i);
                    (self.z[i] <= b).then(|| (i, (self.z[i] - b) / self.live.net.vols[i].max(T::lit(1e-300))))
                })
                .collect();
            if crossed.is_empty() {
                return;
            }
        }
    }

    /// One diffusion move over `h` using independent increments `dw`
    /// (already scaled by the square root of the time step), followed by
    /// bridge tests.
    fn advance(&mut self, dw_ind: &[T], h: T, drift: &[T], t_end: T, bridge: bool) {
        let net = self.live.net;
        let n = self.z.len();
        let l = net.corr.cholesky_factor();
        let mut crossed = Vec::new();
        for i in 0..n {
            if !self.live.alive[i] {
                continue;
            }
            let dw = (0..=i).fold(T::zero(), |s, k| s + l[i][k] * dw_ind[k]);
            let z0 = self.z[i];
            let z1 = z0 + drift[i] * h + net.vols[i] * dw;
            self.z[i] = z1;
            let b = self.live.log_barrier(i);
            let s = net.vols[i];
            if z1 <= b {
                crossed.push((i, (z1 - b) / s.max(T::lit(1e-300))));
            } else if bridge && b.is_finite() {
                let p = bridge_cross(z0 - b, z1 - b, s * s * h);
                if p > T::zero() {
                    let u: f64 = self.rng.random();
                    if T::lit(u) < p {
                        crossed.push((i, (z1 - b) / s.max(T::lit(1e-300))));
                    }
                }
            }
        }
        if !crossed.is_empty() {
            self.settle(crossed, t_end);
        }
    }

    fn crossing_risk(&self, z1: &[T], h: T) -> T {
        let net = self.live.net;
        let mut worst = T::zero();
        for i in 0..z1.len() {
            if self.live.alive[i] {
                let b = self.live.log_barrier(i);
                if b.is_finite() {
                    let s = net.vols[i];
                    worst = worst.max(bridge_cross(self.z[i] - b, z1[i] - b, s * s * h));
                }
            }
        }
        worst
    }
}

/// Simulates asset paths with interior default monitoring and terminal
/// clearing of the survivors.
pub fn simulate_paths<T: Scalar>(
    net: &BankNetwork<T>,
    run: &NetworkRun,
    cfg: &SimConfig<T>,
) -> Result<Vec<PathOutcome<T>>> {
    net.validate()?;
    let steps = cfg.steps()?;
    let n = net.n();
    let h = cfg.horizon / T::from_usize(steps).unwrap();
    let jumps = match (run.dynamics, &net.jumps) {
        (Dynamics::JumpDiffusion, Some(j)) if !j.is_empty() => Some(j.clone()),
        _ => None,
    };
    let drift: Vec<T> = (0..n)
        .map(|i| {
            let s = net.vols[i];
            let comp = jumps.as_ref().map(|j| j.compensator(i) * j.bank_intensity(i)).unwrap_or(T::zero());
            -T::half() * s * s - comp
        })
        .collect();
    let substeps = run.substeps.max(1);
    let hs = h / T::from_usize(substeps).unwrap();
    let refine_above = T::lit(run.refine_above);

    let out = map_paths(cfg.seed, cfg.paths, |stream| {
        let mut sim = PathSim {
            live: Live::new(net),
            z: net.external_assets.iter().map(|a| a.ln()).collect(),
            rng: stream.rng(),
            events: Vec::new(),
        };
        let start: Vec<(usize, T)> = (0..n)
            .filter_map(|i| {
                let b = sim.live.log_barrier(i);
                (sim.z[i] <= b).then(|| (i, sim.z[i] - b))
            })
            .collect();
        if !start.is_empty() {
            sim.settle(start, T::zero());
        }
        let sq = h.sqrt();
        for k in 0..steps {
            if sim.live.count() == 0 {
                break;
            }
            let t_end = T::from_usize(k + 1).unwrap() * h;
            let eps: Vec<T> = (0..n).map(|_| standard_normal::<T>(&mut sim.rng) * sq).collect();
            let refine = run.bridge && sim.live.count() >= 2 && {
                let l = net.corr.cholesky_factor();
                let z1: Vec<T> = (0..n)
                    .map(|i| {
                        let dw = (0..=i).fold(T::zero(), |s, c| s + l[i][c] * eps[c]);
                        sim.z[i] + drift[i] * h + net.vols[i] * dw
                    })
                    .collect();
                sim.crossing_risk(&z1, h) > refine_above
            };
            if refine {
                let mut rem = eps.clone();
                for s in 0..substeps {
                    let left = T::from_usize(substeps - s).unwrap();
                    let var = hs * (T::one() - T::one() / left);
                    let inc: Vec<T> = (0..n)
                        .map(|c| {
                            let g: T = standard_normal(&mut sim.rng);
                            let x = rem[c] / left + var.max(T::zero()).sqrt() * g;
                            rem[c] -= x;
                            x
                        })
                        .collect();
                    let t_sub = T::from_usize(k).unwrap() * h + T::from_usize(s + 1).unwrap() * hs;
                    sim.advance(&inc, hs, &drift, t_sub, true);
                }
            } else {
                sim.advance(&eps, h, &drift, t_end, run.bridge);
            }
            if let Some(j) = &jumps {
                let draw = marshall_olkin_arrivals(&mut sim.rng, j, h);
                let mut hit = Vec::new();
                for i in 0..n {
                    if sim.live.alive[i] && draw.counts[i] > 0 {
                        sim.z[i] += draw.log_jump[i];
                        let b = sim.live.log_barrier(i);
                        if sim.z[i] <= b {
                            hit.push((i, (sim.z[i] - b) / net.vols[i].max(T::lit(1e-300))));
                        }
                    }
                }
                if !hit.is_empty() {
                    sim.settle(hit, t_end);
                }
            }
            if let Some(c) = sim.z.iter().position(|v| v.is_nan()) {
                return Err(CircuitError::NonFinite { component: c, step: k + 1 });
            }
        }
        let assets: Vec<T> = (0..n).map(|i| if sim.live.alive[i] { sim.z[i].exp() } else { T::nan() }).collect();
        let clear_assets: Vec<T> = assets.iter().map(|&a| if a.is_nan() { T::zero() } else { a }).collect();
        let cl = clear_subset(&clear_assets, &sim.live.ext, &net.mutual, &sim.live.alive)?;
        Ok(PathOutcome {
            path: stream.stream_index,
            defaults: sim.events,
            terminal_assets: assets,
            omega: (0..n).map(|i| if sim.live.alive[i] { cl.omega[i] } else { T::nan() }).collect(),
            survived: cl.solvent,
        })
    });
    out.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate<T> {
    pub mean: T,
    pub stderr: T,
}

impl<T: Scalar> Estimate<T> {
    pub fn binomial(hits: usize, n: usize) -> Self {
        let nn = T::from_usize(n.max(1)).unwrap();
        let p = T::from_usize(hits).unwrap() / nn;
        Self { mean: p, stderr: (p * (T::one() - p) / nn).sqrt() }
    }

    /// Whether `x` lies within `k` standard errors.
    pub fn agrees(&self, x: T, k: T) -> bool {
        (self.mean - x).abs() <= k * self.stderr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalEstimate<T> {
    pub joint: Estimate<T>,
    pub marginal: Vec<Estimate<T>>,
}

pub fn survival_probabilities<T: Scalar>(paths: &[PathOutcome<T>]) -> Result<SurvivalEstimate<T>> {
    let first = paths.first().ok_or_else(|| invalid("paths", "need at least one path"))?;
    let n = first.survived.len();
    let joint = paths.iter().filter(|p| p.survived.iter().all(|&s| s)).count();
    let marginal = (0..n)
        .map(|i| Estimate::binomial(paths.iter().filter(|p| p.survived[i]).count(), paths.len()))
        .collect();
    Ok(SurvivalEstimate { joint: Estimate::binomial(joint, paths.len()), marginal })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Instrument {
    Cds(usize),
    Ftd,
}

/// Solves the two-bank settlement balance for the pay-out fractions.
pub fn detailed_balance<T: Scalar>(net: &BankNetwork<T>, assets: [T; 2]) -> [T; 2] {
    let (l1, l2) = (net.external_liabilities[0], net.external_liabilities[1]);
    let (l12, l21) = (net.mutual[0][1], net.mutual[1][0]);
    let delta = l1 * l2 + l1 * l21 + l2 * l12;
    let k1 = (l2 * assets[0] + l21 * (assets[0] + assets[1])) / delta;
    let k2 = (l1 * assets[1] + l12 * (assets[0] + assets[1])) / delta;
    [k1, k2]
}

/// Loss fraction of bank `i` on one path of a two-bank network.
pub fn cds_payoff<T: Scalar>(net: &BankNetwork<T>, path: &PathOutcome<T>, i: usize) -> T {
    let o = 1 - i;
    let owed = net.external_liabilities[i] + net.mutual[i][o];
    let claim = net.mutual[o][i];
    let recovered = net.recoveries[o] * claim;
    if let Some(d) = path.defaults.iter().find(|d| d.bank == i) {
        let inflow = if d.others_alive { claim } else { recovered };
        return T::one() - (d.assets + inflow) / owed;
    }
    if path.survived[i] {
        return T::zero();
    }
    if path.defaulted_before_maturity(o) {
        T::one() - (path.terminal_assets[i] + recovered) / owed
    } else {
        T::one() - path.omega[i]
    }
}

pub fn ftd_payoff<T: Scalar>(net: &BankNetwork<T>, path: &PathOutcome<T>) -> T {
    if let Some(d) = path.defaults.first() {
        return cds_payoff(net, path, d.bank);
    }
    cds_payoff(net, path, 0).max(cds_payoff(net, path, 1))
}

/// Expected payoff and standard error over the paths. Two banks only.
pub fn instrument_payoffs<T: Scalar>(
    net: &BankNetwork<T>,
    paths: &[PathOutcome<T>],
    instrument: Instrument,
) -> Result<Estimate<T>> {
    if net.n() != 2 {
        return Err(invalid("instrument", "payoffs are defined for two banks"));
    }
    if let Instrument::Cds(i) = instrument {
        if i > 1 {
            return Err(invalid("instrument", format!("no bank {i}")));
        }
    }
    if paths.is_empty() {
        return Err(invalid("paths", "need at least one path"));
    }
    let xs: Vec<T> = paths
        .iter()
        .map(|p| match instrument {
            Instrument::Cds(i) => cds_payoff(net, p, i),
            Instrument::Ftd => ftd_payoff(net, p),
        })
        .collect();
    let (mean, stderr) = crate::scalar::mean_stderr(&xs);
    Ok(Estimate { mean, stderr })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bridge_probability_limits() {
        assert_eq!(bridge_cross(0.0f64, 1.0, 1.0), 1.0);
        assert_eq!(bridge_cross(1.0f64, 1.0, 0.0), 0.0);
        assert!((bridge_cross(1.0f64, 2.0, 4.0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn single_bank_clearing() {
        let c = clear_subset(&[25.0f64], &[50.0], &[vec![0.0]], &[true]).unwrap();
        assert!((c.omega[0] - 0.5).abs() < 1e-15);
        assert!(!c.solvent[0]);
    }
}
