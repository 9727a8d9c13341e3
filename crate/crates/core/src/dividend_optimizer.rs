//! Optimal dividend barrier for bank equity hit by two kinds of exponential jumps.
//!
//! Equity follows `dE = mu dt + sigma dW - J_1 dN_1 - J_2 dN_2` until it
//! reaches zero; dividends are paid to maximize discounted payouts. The value
//! `V(E)` solves a variational inequality whose stationary form has the closed
//! solution `V = sum_j C_j exp(xi_j E)` below a barrier `E*`, with `xi_j` the
//! real roots of the symbol `Psi`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, CircuitError, Result};
use crate::linalg::{solve, solve_tridiagonal};
use crate::roots::brent;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquityParams<T> {
    pub mu: T,
    pub sigma: T,
    /// Discount rate.
    pub r: T,
    pub lambda1: T,
    pub lambda2: T,
    pub delta1: T,
    pub delta2: T,
}

impl<T: Scalar> EquityParams<T> {
    /// Representative parameters of the reference example.
    pub fn fig12() -> Self {
        let l = T::lit;
        Self {
            mu: l(0.05),
            sigma: l(0.25),
            r: l(0.10),
            lambda1: l(0.05),
            delta1: l(3.0),
            lambda2: l(0.02),
            delta2: l(1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > T::zero()) {
            return Err(invalid("sigma", "must be positive"));
        }
        if !(self.r > T::zero()) {
            return Err(invalid("r", "discount rate must be positive"));
        }
        if !(self.lambda1 >= T::zero() && self.lambda2 >= T::zero()) {
            return Err(invalid("lambda", "intensities must be non-negative"));
        }
        if !(self.delta1 > T::zero() && self.delta2 > T::zero()) {
            return Err(invalid("delta", "jump decay must be positive"));
        }
        Ok(())
    }

    pub fn coefficients(&self) -> SymbolCoefficients<T> {
        SymbolCoefficients {
            a2: T::half() * self.sigma * self.sigma,
            a1: self.mu,
            a0: -(self.r + self.lambda1 + self.lambda2),
        }
    }

    /// `(lambda_i, delta_i)` for jump sources with positive intensity.
    fn active_jumps(&self) -> Vec<(T, T)> {
        [(self.lambda1, self.delta1), (self.lambda2, self.delta2)]
            .into_iter()
            .filter(|(l, _)| *l > T::zero())
            .collect()
    }
}

/// `a2 V_EE + a1 V_E + a0 V`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolCoefficients<T> {
    pub a2: T,
    pub a1: T,
    pub a0: T,
}

/// `Psi(xi) = a2 xi^2 + a1 xi + a0 + sum_i lambda_i delta_i / (xi + delta_i)`.
pub fn symbol<T: Scalar>(xi: T, p: &EquityParams<T>) -> Result<T> {
    let c = p.coefficients();
    // lambda delta / (xi + delta) - lambda = -lambda xi / (xi + delta), so Psi(0) = -R exactly
    let mut v = (c.a2 * xi + c.a1) * xi - p.r;
    for (l, d) in [(p.lambda1, p.delta1), (p.lambda2, p.delta2)] {
        if xi + d == T::zero() {
            return Err(CircuitError::Domain(format!("symbol evaluated at its pole -{d}")));
        }
        v -= l * xi / (xi + d);
    }
    Ok(v)
}

fn symbol_derivative<T: Scalar>(xi: T, p: &EquityParams<T>) -> T {
    let c = p.coefficients();
    let mut v = T::two() * c.a2 * xi + c.a1;
    for (l, d) in [(p.lambda1, p.delta1), (p.lambda2, p.delta2)] {
        v -= l * d / ((xi + d) * (xi + d));
    }
    v
}

/// `Psi` with denominators cleared over the active poles.
fn cleared<T: Scalar>(xi: T, c: &SymbolCoefficients<T>, jumps: &[(T, T)]) -> T {
    let quad = (c.a2 * xi + c.a1) * xi + c.a0;
    let mut v = quad * jumps.iter().fold(T::one(), |acc, &(_, d)| acc * (xi + d));
    for (i, &(l, d)) in jumps.iter().enumerate() {
        let others = jumps
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .fold(T::one(), |acc, (_, &(_, dj))| acc * (xi + dj));
        v += l * d * others;
    }
    v
}

/// Real roots of `Psi`, ascending: one left of each active pole plus one on
/// each side of zero (four for two active jump sources).
pub fn symbol_roots<T: Scalar>(p: &EquityParams<T>) -> Result<Vec<T>> {
    p.validate()?;
    let c = p.coefficients();
    let mut jumps = p.active_jumps();
    jumps.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    // merge coincident poles
    let mut merged: Vec<(T, T)> = Vec::new();
    for (l, d) in jumps {
        match merged.last_mut() {
            Some(last) if (last.1 - d).abs() <= T::epsilon() * d => last.0 += l,
            _ => merged.push((l, d)),
        }
    }
    let poles: Vec<T> = merged.iter().map(|&(_, d)| -d).collect();
    let f = |x: T| cleared(x, &c, &merged);

    let outward = |start: T, dir: T| -> Result<T> {
        let target = f(start).signum();
        let mut step = T::one();
        for _ in 0..200 {
            let x = start + dir * step;
            if f(x).signum() != target {
                return Ok(x);
            }
            step = step * T::two();
        }
        Err(CircuitError::Domain("symbol root bracket diverged".into()))
    };

    let mut brackets = Vec::new();
    let first = poles.first().copied().unwrap_or(T::zero());
    brackets.push((outward(first, -T::one())?, first));
    for w in poles.windows(2) {
        brackets.push((w[0], w[1]));
    }
    if let Some(&last) = poles.last() {
        brackets.push((last, T::zero()));
    }
    brackets.push((T::zero(), outward(T::zero(), T::one())?));

    let xtol = T::epsilon() * T::lit(4.0);
    let mut roots = Vec::with_capacity(brackets.len());
    for (a, b) in brackets {
        if f(a).signum() == f(b).signum() {
            return Err(CircuitError::Domain(format!(
                "no real root of the symbol in [{a}, {b}]; roots may be complex"
            )));
        }
        let mut x = brent(f, a, b, xtol, 200)?;
        if poles.iter().any(|&q| q == x) {
            return Err(CircuitError::Domain(format!("symbol root coincides with pole {x}")));
        }
        let psi = symbol(x, p)?;
        let polished = x - psi / symbol_derivative(x, p);
        if polished.is_finite() && symbol(polished, p)?.abs() < psi.abs() {
            x = polished;
        }
        roots.push(x);
    }
    Ok(roots)
}

/// Stationary solution: roots, coefficients and the dividend barrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierSolution<T> {
    pub roots: Vec<T>,
    pub coefficients: Vec<T>,
    pub e_star: T,
}

impl<T: Scalar> BarrierSolution<T> {
    fn sum(&self, e: T, power: i32) -> T {
        self.roots
            .iter()
            .zip(&self.coefficients)
            .map(|(&x, &c)| c * x.powi(power) * (x * e).exp())
            .sum()
    }

    /// Value function; linear with unit slope above the barrier.
    pub fn value(&self, e: T) -> T {
        if e <= self.e_star {
            self.sum(e, 0)
        } else {
            self.sum(self.e_star, 0) + e - self.e_star
        }
    }

    pub fn value_e(&self, e: T) -> T {
        if e <= self.e_star {
            self.sum(e, 1)
        } else {
            T::one()
        }
    }

    pub fn value_ee(&self, e: T) -> T {
        if e <= self.e_star {
            self.sum(e, 2)
        } else {
            T::zero()
        }
    }

    /// Largest violation among `V(0) = 0`, `V_E(E*) = 1`, `V_EE(E*) = 0`.
    pub fn pasting_residual(&self) -> T {
        let a = self.sum(T::zero(), 0).abs();
        let b = (self.sum(self.e_star, 1) - T::one()).abs();
        let c = self.sum(self.e_star, 2).abs();
        a.max(b).max(c)
    }
}

fn barrier_coefficients<T: Scalar>(roots: &[T], deltas: &[T], e: T) -> Result<Vec<T>> {
    let n = roots.len();
    let mut m = vec![vec![T::one(); n]];
    for &d in deltas {
        m.push(roots.iter().map(|&x| T::one() / (x + d)).collect());
    }
    m.push(roots.iter().map(|&x| x * (x * e).exp()).collect());
    let mut rhs = vec![T::zero(); n];
    rhs[n - 1] = T::one();
    solve(&m, &rhs)
}

/// Scan range for the barrier search.
pub const BARRIER_SCAN: (f64, f64, usize) = (1e-3, 50.0, 400);

/// Solves for `(C_j, E*)` so that `V(0)=0`, the jump terms cancel, and
/// `V_E(E*)=1`, `V_EE(E*)=0`.
pub fn stationary_barrier<T: Scalar>(p: &EquityParams<T>) -> Result<BarrierSolution<T>> {
    let roots = symbol_roots(p)?;
    let mut deltas: Vec<T> = p.active_jumps().iter().map(|&(_, d)| d).collect();
    deltas.dedup_by(|a, b| (*a - *b).abs() <= T::epsilon() * *b);
    if deltas.len() + 2 != roots.len() {
        return Err(CircuitError::Singular);
    }
    let residual = |e: T| -> T {
        match barrier_coefficients(&roots, &deltas, e) {
            Ok(c) => roots.iter().zip(&c).map(|(&x, &cj)| cj * x * x * (x * e).exp()).sum(),
            Err(_) => T::nan(),
        }
    };
    let (lo, hi, n) = BARRIER_SCAN;
    let ratio = (hi / lo).powf(1.0 / n as f64);
    let mut prev = (T::lit(lo), residual(T::lit(lo)));
    let mut bracket = None;
    let mut scan = Vec::new();
    for k in 1..=n {
        let e = T::lit(lo * ratio.powi(k as i32));
        let r = residual(e);
        scan.push((e.to64(), r.to64()));
        if r.is_finite() && prev.1.is_finite() && r.signum() != prev.1.signum() {
            bracket = Some((prev.0, e));
            break;
        }
        prev = (e, r);
    }
    let (a, b) = bracket.ok_or_else(|| {
        let sample: Vec<String> = scan.iter().step_by(40).map(|(e, r)| format!("{e:.3e}:{r:.3e}")).collect();
        CircuitError::Domain(format!("barrier residual has no sign change; scan {}", sample.join(", ")))
    })?;
    let e_star = brent(residual, a, b, T::epsilon() * T::lit(4.0), 200)?;
    let coefficients = barrier_coefficients(&roots, &deltas, e_star)?;
    Ok(BarrierSolution {
        roots,
        coefficients,
        e_star,
    })
}

/// Exponential-integrator evaluation of
/// `I(E_k) = delta * int_0^{E_k} V(j) exp(-delta (E_k - j)) dj`
/// for `V` linear between uniformly spaced nodes.
pub fn jump_integral<T: Scalar>(v: &[T], h: T, delta: T) -> Vec<T> {
    let mut out = vec![T::zero(); v.len()];
    let dh = delta * h;
    let e = (-dh).exp();
    let w0 = -(-dh).exp_m1();
    let w1 = T::one() - w0 / dh;
    for k in 0..v.len().saturating_sub(1) {
        out[k + 1] = e * out[k] + v[k] * (w0 - w1) + v[k + 1] * w1;
    }
    out
}

/// Grid and time stepping for the time-dependent problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "T: Scalar"))]
pub struct VariationalGrid<T: Scalar> {
    pub e_max: T,
    /// Number of intervals; the grid has `intervals + 1` nodes.
    pub intervals: usize,
    pub dt: T,
    /// Time to maturity at the end of the march.
    pub horizon: T,
    /// Times to maturity at which slices are kept (the last slice is always kept).
    #[serde(default)]
    pub record_at: Vec<T>,
    /// Warn when `dt / h^2` exceeds this.
    #[serde(default = "default_cfl")]
    pub cfl_bound: T,
}

fn default_cfl<T: Scalar>() -> T {
    T::lit(1e5)
}

impl<T: Scalar> VariationalGrid<T> {
    pub fn new(e_max: T, intervals: usize, dt: T, horizon: T) -> Self {
        Self {
            e_max,
            intervals,
            dt,
            horizon,
            record_at: Vec::new(),
            cfl_bound: default_cfl(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquityValueGrid<T> {
    pub e: Vec<T>,
    pub tau: Vec<T>,
    /// One slice of `V` per entry of `tau`.
    pub values: Vec<Vec<T>>,
    /// Smallest grid node where `V - E` reaches its maximum, per slice.
    pub free_boundary: Vec<T>,
    /// Jump integrals of the last slice.
    pub jump_integrals: [Vec<T>; 2],
    /// Steps whose pre-projection excess value had more than one local maximum.
    pub oscillation_steps: usize,
}

impl<T: Scalar> EquityValueGrid<T> {
    pub fn last(&self) -> &[T] {
        self.values.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

fn free_boundary<T: Scalar>(e: &[T], v: &[T]) -> T {
    let top = v.iter().zip(e).map(|(&x, &y)| x - y).fold(T::neg_infinity(), T::max);
    let tol = T::lit(1e-12) * top.abs().max(T::one());
    v.iter()
        .zip(e)
        .find(|&(&x, &y)| x - y >= top - tol)
        .map(|(_, &y)| y)
        .unwrap_or(T::zero())
}

fn local_maxima<T: Scalar>(e: &[T], v: &[T]) -> usize {
    let x: Vec<T> = v.iter().zip(e).map(|(&a, &b)| a - b).collect();
    let tol = T::lit(1e-12);
    x.windows(3).filter(|w| w[1] > w[0] + tol && w[1] > w[2] + tol).count()
}

/// Marches the penalized problem in time to maturity `tau` from `V(0, E) = E`:
/// Crank-Nicolson for the local operator, explicit jump integrals, then
/// projection onto `{V_E >= 1}` via the monotone envelope of `V - E`.
pub fn solve_variational<T: Scalar>(p: &EquityParams<T>, grid: &VariationalGrid<T>) -> Result<EquityValueGrid<T>> {
    p.validate()?;
    let n = grid.intervals;
    if n < 3 {
        return Err(invalid("intervals", "need at least 3"));
    }
    if !(grid.e_max > T::zero() && grid.dt > T::zero() && grid.horizon > T::zero()) {
        return Err(invalid("grid", "e_max, dt and horizon must be positive"));
    }
    let h = grid.e_max / T::from_usize(n).unwrap();
    let dt = grid.dt;
    if dt / (h * h) > grid.cfl_bound {
        log::warn!("dt/h^2 = {} exceeds {}", dt / (h * h), grid.cfl_bound);
    }
    let steps = (grid.horizon / dt).round().to_usize().unwrap_or(0).max(1);
    let record: Vec<usize> = grid
        .record_at
        .iter()
        .map(|&t| (t / dt).round().to_usize().unwrap_or(0))
        .collect();
    let c = p.coefficients();
    let e: Vec<T> = (0..=n).map(|k| T::from_usize(k).unwrap() * h).collect();
    let mut v = e.clone();

    let half_dt = T::half() * dt;
    let lo = c.a2 / (h * h) - c.a1 / (T::two() * h);
    let mid = -T::two() * c.a2 / (h * h) + c.a0;
    let up = c.a2 / (h * h) + c.a1 / (T::two() * h);
    let mut lower = vec![-half_dt * lo; n + 1];
    let mut diag = vec![T::one() - half_dt * mid; n + 1];
    let mut upper = vec![-half_dt * up; n + 1];
    lower[0] = T::zero();
    diag[0] = T::one();
    upper[0] = T::zero();
    lower[n] = -T::one();
    diag[n] = T::one();
    upper[n] = T::zero();

    let mut out = EquityValueGrid {
        e: e.clone(),
        tau: Vec::new(),
        values: Vec::new(),
        free_boundary: Vec::new(),
        jump_integrals: [Vec::new(), Vec::new()],
        oscillation_steps: 0,
    };
    if record.contains(&0) {
        out.tau.push(T::zero());
        out.values.push(v.clone());
        out.free_boundary.push(free_boundary(&e, &v));
    }
    let mut rhs = vec![T::zero(); n + 1];
    for step in 1..=steps {
        let i1 = jump_integral(&v, h, p.delta1);
        let i2 = jump_integral(&v, h, p.delta2);
        for k in 1..n {
            let av = lo * v[k - 1] + mid * v[k] + up * v[k + 1];
            rhs[k] = v[k] + half_dt * av + dt * (p.lambda1 * i1[k] + p.lambda2 * i2[k]);
        }
        rhs[0] = T::zero();
        rhs[n] = h;
        let mut next = solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
        if let Some(k) = next.iter().position(|x| !x.is_finite()) {
            return Err(CircuitError::NonFinite { component: k, step });
        }
        if local_maxima(&e, &next) > 1 {
            out.oscillation_steps += 1;
        }
        let mut best = T::neg_infinity();
        for k in 0..=n {
            best = best.max(next[k] - e[k]);
            next[k] = best + e[k];
        }
        v = next;
        if step == steps || record.contains(&step) {
            out.tau.push(T::from_usize(step).unwrap() * dt);
            out.values.push(v.clone());
            out.free_boundary.push(free_boundary(&e, &v));
        }
        if step == steps {
            out.jump_integrals = [i1, i2];
        }
    }
    if out.oscillation_steps > steps / 10 {
        log::warn!(
            "excess value oscillated on {} of {steps} steps; grid may be too coarse",
            out.oscillation_steps
        );
    }
    Ok(out)
}
