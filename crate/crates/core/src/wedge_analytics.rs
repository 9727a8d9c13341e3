//! Semi-analytic survival probabilities for two banks.
//!
//! In scaled coordinates `X_i = (Sigma / sigma_i) ln(A_i / Lambda_i^<)` and
//! scaled time `Sigma^2 t` the pair of banks is a correlated Brownian motion
//! with drift `xi`, killed on the two axes. Its transition density is a
//! Bessel series in a wedge of angle `varpi`; integrating it and its
//! boundary fluxes gives joint and marginal survival.
//!
//! Jumps have no closed form here and are rejected.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::banking_network::{boundaries, remove_bank, BankNetwork, NondimContext};
use crate::error::{invalid, CircuitError, Result};
use crate::scalar::Scalar;
use crate::special::{bessel_i_scaled, gauss_legendre, normal_cdf, normal_pdf};

const TRUNCATION: f64 = 1e-14;
/// Density and flux values whose bound is below `e^-46` (about 1e-20)
/// are returned as zero without summing the series.
const NEGLIGIBLE_LN: f64 = -46.0;
/// Above this Bessel argument non-integer orders are expensive; the flux
/// then uses the single-face first-passage form when the other face is
/// far enough away for its influence to be below `e^-60`.
const HYBRID_Z: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Survival1d<T> {
    pub value: T,
    /// The start was already on or below the interior boundary.
    pub absorbed: bool,
}

fn ln_normal_cdf(x: f64) -> f64 {
    if x > -30.0 {
        normal_cdf(x).ln()
    } else {
        let x2 = x * x;
        -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * PI).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

pub(crate) fn survival_1d_f64(x0: f64, xi: f64, m_int: f64, m_term: f64, tau: f64) -> f64 {
    if x0 <= m_int {
        return 0.0;
    }
    let m_term = m_term.max(m_int);
    if tau <= 0.0 {
        return if x0 >= m_term { 1.0 } else { 0.0 };
    }
    let s = tau.sqrt();
    let direct = normal_cdf((x0 + xi * tau - m_term) / s);
    if m_int == f64::NEG_INFINITY {
        return direct;
    }
    let y = x0 - m_int;
    let c = m_term - m_int;
    let image = (-2.0 * xi * y + ln_normal_cdf((-y - c + xi * tau) / s)).exp();
    (direct - image).max(0.0)
}

/// Probability that a Brownian motion with drift `xi` started at `x0`
/// stays above `m_int` for time `tau` and ends above `m_term`.
/// `m_int` may be minus infinity.
pub fn survival_1d<T: Scalar>(x0: T, xi: T, m_int: T, m_term: T, tau: T) -> Survival1d<T> {
    Survival1d {
        value: T::lit(survival_1d_f64(x0.to64(), xi.to64(), m_int.to64(), m_term.to64(), tau.to64())),
        absorbed: x0 <= m_int,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WedgeContext<T> {
    pub rho: T,
    pub rho_bar: T,
    /// Opening angle of the wedge after decorrelation, in `(0, pi)`.
    pub varpi: T,
    pub xi: [T; 2],
    /// `C^-1 xi`.
    pub theta: [T; 2],
    /// `xi' C^-1 xi`.
    pub theta_xi: T,
}

impl<T: Scalar> WedgeContext<T> {
    pub fn new(rho: T, xi: [T; 2]) -> Result<Self> {
        if !(rho > -T::one() && rho < T::one()) {
            return Err(invalid("rho", format!("{rho} outside (-1, 1)")));
        }
        if !xi.iter().all(|x| x.is_finite()) {
            return Err(invalid("xi", "drift must be finite"));
        }
        let rho_bar = (T::one() - rho * rho).sqrt();
        let varpi = rho_bar.atan2(-rho);
        let r2 = rho_bar * rho_bar;
        let theta = [(xi[0] - rho * xi[1]) / r2, (xi[1] - rho * xi[0]) / r2];
        let theta_xi = theta[0] * xi[0] + theta[1] * xi[1];
        Ok(Self { rho, rho_bar, varpi, xi, theta, theta_xi })
    }

    /// Bessel order of the `n`-th eigenfunction.
    pub fn nu(&self, n: usize) -> T {
        T::from_usize(n).unwrap() * T::lit(PI) / self.varpi
    }

    /// Polar coordinates `(R, phi)` after decorrelation. `phi = 0` on the
    /// `X_1 = 0` face and `phi = varpi` on the `X_2 = 0` face.
    pub fn polar(&self, x: [T; 2]) -> (T, T) {
        let u = (x[1] - self.rho * x[0]) / self.rho_bar;
        let v = x[0];
        (u.hypot(v), v.atan2(u))
    }

    /// The same wedge with the banks relabelled.
    pub fn swapped(&self) -> Self {
        Self::new(self.rho, [self.xi[1], self.xi[0]]).expect("already validated")
    }

    fn to_f64(&self) -> WedgeContext<f64> {
        WedgeContext {
            rho: self.rho.to64(),
            rho_bar: self.rho_bar.to64(),
            varpi: self.varpi.to64(),
            xi: [self.xi[0].to64(), self.xi[1].to64()],
            theta: [self.theta[0].to64(), self.theta[1].to64()],
            theta_xi: self.theta_xi.to64(),
        }
    }
}

impl WedgeContext<f64> {
    /// Integer spacing of the Bessel orders, if any.
    fn spacing(&self) -> Option<usize> {
        let a = PI / self.varpi;
        let k = a.round();
        ((a - k).abs() < 1e-12 && k >= 1.0).then_some(k as usize)
    }

    fn ln_tilt(&self, t: f64, x: [f64; 2], xp: [f64; 2]) -> f64 {
        self.theta[0] * (x[0] - xp[0]) + self.theta[1] * (x[1] - xp[1]) - 0.5 * self.theta_xi * t
    }
}

/// `exp(-z) I_k(z)` for `k = 0, 1, ...` by backward recurrence normalised
/// with `I_0 + 2 sum I_k = e^z`. Orders past the end are negligible.
fn miller_scaled(z: f64) -> Vec<f64> {
    let start = (120.0 * z).sqrt().ceil() as usize + 40;
    let mut f = vec![0.0; start + 2];
    f[start] = 1.0;
    for k in (1..=start).rev() {
        f[k - 1] = f[k + 1] + (2.0 * k as f64 / z) * f[k];
        if f[k - 1] > 1e250 {
            for v in &mut f[k - 1..] {
                *v *= 1e-250;
            }
        }
    }
    let norm = f[0] + 2.0 * f[1..].iter().sum::<f64>();
    f.truncate(start + 1);
    for v in &mut f {
        *v /= norm;
    }
    f
}

/// `sum_n coef(n, nu_n) exp(-z) I_{nu_n}(z)` where `|coef| <= nu^power`.
fn bessel_series(
    ctx: &WedgeContext<f64>,
    z: f64,
    power: i32,
    n_terms: usize,
    coef: impl Fn(usize, f64) -> f64,
) -> Result<f64> {
    if z <= 0.0 {
        return Ok(0.0);
    }
    let a = PI / ctx.varpi;
    let table = match ctx.spacing() {
        Some(k) if z >= 1.0 => Some((k, miller_scaled(z))),
        _ => None,
    };
    let root = z.sqrt();
    let (mut sum, mut bounds, mut last) = (0.0, 0.0, 0.0);
    for n in 1..=n_terms {
        let nu = a * n as f64;
        let i = match &table {
            Some((k, t)) => t.get(k * n).copied().unwrap_or(0.0),
            None => bessel_i_scaled(nu, z),
        };
        let bound = nu.powi(power) * i;
        sum += coef(n, nu) * i;
        bounds += bound;
        last = bound;
        if nu > root && bound <= TRUNCATION * bounds {
            return Ok(sum);
        }
    }
    Err(CircuitError::NoConvergence { what: "wedge Bessel series", iterations: n_terms, residual: last })
}

fn green_f64(ctx: &WedgeContext<f64>, t: f64, x: [f64; 2], xp: [f64; 2], n_terms: usize) -> Result<f64> {
    if x[0] <= 0.0 || x[1] <= 0.0 {
        return Ok(0.0);
    }
    let (r, phi) = ctx.polar(x);
    let (rp, phip) = ctx.polar(xp);
    let z = r * rp / t;
    let ln_pref = -(r - rp) * (r - rp) / (2.0 * t) + (2.0 / (ctx.rho_bar * ctx.varpi * t)).ln() + ctx.ln_tilt(t, x, xp);
    let terms = (120.0 * z).sqrt() + 40.0;
    if ln_pref + terms.ln() < NEGLIGIBLE_LN {
        return Ok(0.0);
    }
    let s = bessel_series(ctx, z, 0, n_terms, |_, nu| (nu * phi).sin() * (nu * phip).sin())?;
    Ok(ln_pref.exp() * s)
}

fn check_interior<T: Scalar>(t: T, xp: [T; 2]) -> Result<()> {
    if !(t > T::zero()) {
        return Err(invalid("t", "time must be positive"));
    }
    if !(xp[0] > T::zero() && xp[1] > T::zero()) {
        return Err(CircuitError::Domain(format!("start ({}, {}) is not inside the quadrant", xp[0], xp[1])));
    }
    Ok(())
}

/// Transition density from `xp` to `x` at time `t` for the motion killed
/// on both axes.
pub fn wedge_green<T: Scalar>(t: T, x: [T; 2], xp: [T; 2], ctx: &WedgeContext<T>, n_terms: usize) -> Result<T> {
    check_interior(t, xp)?;
    let c = ctx.to_f64();
    green_f64(&c, t.to64(), [x[0].to64(), x[1].to64()], [xp[0].to64(), xp[1].to64()], n_terms).map(T::lit)
}

/// Distance in the decorrelated plane from polar point `(r, phi)` to the
/// ray at angle `alpha`.
fn ray_distance(r: f64, phi: f64, alpha: f64) -> f64 {
    let d = (phi - alpha).abs();
    if d >= 0.5 * PI {
        r
    } else {
        r * d.sin()
    }
}

/// Killing rate density on one face. `face = 0` is `X_1 = 0` (bank 1
/// defaults) parametrised by `X_2`; `face = 1` is `X_2 = 0` parametrised
/// by `X_1`.
fn flux_f64(ctx: &WedgeContext<f64>, s: f64, along: f64, xp: [f64; 2], face: usize, n_terms: usize) -> Result<f64> {
    if along <= 0.0 {
        return Ok(0.0);
    }
    let x = if face == 1 { [along, 0.0] } else { [0.0, along] };
    let r = along / ctx.rho_bar;
    let (rp, phip) = ctx.polar(xp);
    let z = r * rp / s;
    let ln_pref = -(r - rp) * (r - rp) / (2.0 * s) + (1.0 / (ctx.varpi * s * along)).ln() + ctx.ln_tilt(s, x, xp);
    let terms = (120.0 * z).sqrt() + 40.0;
    if ln_pref + 2.0 * terms.ln() + 2.0 < NEGLIGIBLE_LN {
        return Ok(0.0);
    }
    if ctx.spacing().is_none() && z > HYBRID_Z {
        let (phi_face, other) = if face == 1 { (ctx.varpi, 0.0) } else { (0.0, ctx.varpi) };
        let d = ray_distance(r, phi_face, other);
        let dp = ray_distance(rp, phip, other);
        if 2.0 * d * dp / s > 60.0 {
            return Ok(first_passage_flux(ctx, s, along, xp, face));
        }
    }
    let sum = if face == 1 {
        bessel_series(ctx, z, 1, n_terms, |n, nu| {
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            sign * nu * (nu * phip).sin()
        })?
    } else {
        bessel_series(ctx, z, 1, n_terms, |_, nu| nu * (nu * phip).sin())?
    };
    // the alternating series can round to a tiny negative value
    Ok((ln_pref.exp() * sum).max(0.0))
}

/// Flux through one face ignoring the other: first-passage density of the
/// killed coordinate times the conditional law of the other one.
fn first_passage_flux(ctx: &WedgeContext<f64>, s: f64, along: f64, xp: [f64; 2], face: usize) -> f64 {
    let k = if face == 1 { 1 } else { 0 };
    let a = xp[k];
    let fp = a / (2.0 * PI * s * s * s).sqrt() * (-(a + ctx.xi[k] * s).powi(2) / (2.0 * s)).exp();
    let (mean, sd) = flux_window(ctx, s, xp, face);
    fp * normal_pdf((along - mean) / sd) / sd
}

/// Centre and spread of the exit position on a face at time `s`.
fn flux_window(ctx: &WedgeContext<f64>, s: f64, xp: [f64; 2], face: usize) -> (f64, f64) {
    let (k, o) = if face == 1 { (1, 0) } else { (0, 1) };
    let mean = xp[o] + ctx.xi[o] * s - ctx.rho * (xp[k] + ctx.xi[k] * s);
    (mean, ctx.rho_bar.max(1e-3) * s.sqrt())
}

/// Probability flux out of the quadrant through one face at time `t`.
/// `face` is the bank whose coordinate is zero there (`0` or `1`); `along`
/// is the other coordinate.
pub fn boundary_flux<T: Scalar>(
    t: T,
    along: T,
    xp: [T; 2],
    face: usize,
    ctx: &WedgeContext<T>,
    n_terms: usize,
) -> Result<T> {
    check_interior(t, xp)?;
    if face > 1 {
        return Err(invalid("face", "must be 0 or 1"));
    }
    flux_f64(&ctx.to_f64(), t.to64(), along.to64(), [xp[0].to64(), xp[1].to64()], face, n_terms).map(T::lit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    /// Gauss-Legendre order per panel.
    pub order: usize,
    /// Lower order used for the error estimate.
    pub check_order: usize,
    /// Largest panel in space.
    pub max_panel: f64,
    /// Spatial truncation in standard deviations.
    pub span: f64,
    /// Panels per half of the time interval.
    pub time_panels: usize,
    pub tolerance: f64,
    pub n_terms: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { order: 10, check_order: 7, max_panel: 0.5, span: 9.0, time_panels: 16, tolerance: 1e-6, n_terms: 20_000 }
    }
}

impl QuadratureSpec {
    fn validate(&self) -> Result<()> {
        if self.order < 2 || self.check_order < 2 {
            return Err(invalid("order", "need at least two nodes per panel"));
        }
        if !(self.max_panel > 0.0 && self.span > 0.0 && self.tolerance > 0.0) || self.time_panels == 0 {
            return Err(invalid("quadrature", "panel size, span, tolerance and time panels must be positive"));
        }
        Ok(())
    }
}

/// Panel edges on `[a, b]`: at most `base` wide, landing on every layer
/// point and graded geometrically down to the layer scale around it.
fn panel_edges(a: f64, b: f64, base: f64, layers: &[(f64, f64)]) -> Vec<f64> {
    let mut edges = vec![a];
    let mut x = a;
    while x < b {
        let mut w = base;
        for &(p, sc) in layers {
            let d = (x - p).abs();
            w = w.min(sc.max(1e-9).max(d / 3.0));
        }
        if x + w >= b || b - (x + w) < 0.25 * w {
            w = b - x;
        }
        for &(p, _) in layers {
            if x < p && p < x + w {
                w = p - x;
            }
        }
        x = if (x + w - b).abs() <= 0.0 { b } else { x + w };
        edges.push(x);
    }
    edges
}

struct Rule {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl Rule {
    fn new(order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        Self { x, w }
    }

    fn nodes(&self, a: f64, b: f64, base: f64, layers: &[(f64, f64)]) -> Vec<(f64, f64)> {
        if !(b > a) {
            return Vec::new();
        }
        let edges = panel_edges(a, b, base, layers);
        let mut out = Vec::with_capacity(edges.len() * self.x.len());
        for e in edges.windows(2) {
            let (lo, h) = (e[0], e[1] - e[0]);
            for (x, w) in self.x.iter().zip(&self.w) {
                out.push((lo + 0.5 * h * (x + 1.0), 0.5 * h * w));
            }
        }
        out
    }
}

fn par_sum(nodes: &[(f64, f64)], f: impl Fn(f64) -> Result<f64> + Sync) -> Result<f64> {
    let parts: Vec<f64> = nodes.par_iter().map(|&(x, w)| f(x).map(|v| w * v)).collect::<Result<_>>()?;
    Ok(parts.iter().sum())
}

fn upper_limit(xp: f64, xi: f64, t: f64, span: f64) -> f64 {
    xp + (xi * t).max(0.0) + span * t.sqrt()
}

/// `int int G(t, x | xp) dx` over `x2 in [0, hi]` and `x1 >= lower1(x2)`,
/// with `x2_breaks` as panel edges.
fn region_mass(
    ctx: &WedgeContext<f64>,
    xp: [f64; 2],
    t: f64,
    x2_lo: f64,
    x2_breaks: &[f64],
    lower1: &(dyn Fn(f64) -> f64 + Sync),
    q: &QuadratureSpec,
    order: usize,
) -> Result<f64> {
    let rule = Rule::new(order);
    let base = q.max_panel.min(0.5 * t.sqrt());
    let hi1 = upper_limit(xp[0], ctx.xi[0], t, q.span);
    let hi2 = upper_limit(xp[1], ctx.xi[1], t, q.span);
    let layers: Vec<(f64, f64)> = x2_breaks.iter().map(|&b| (b, base)).collect();
    let outer = rule.nodes(x2_lo.max(0.0), hi2, base, &layers);
    par_sum(&outer, |x2| {
        let lo1 = lower1(x2).max(0.0);
        let inner = rule.nodes(lo1, hi1, base, &[]);
        let mut s = 0.0;
        for (x1, w) in inner {
            s += w * green_f64(ctx, t, [x1, x2], xp, q.n_terms)?;
        }
        Ok(s)
    })
}

/// `int g(s, y) weight(y) dy` over the exit positions `y >= lo` on a face.
fn face_integral(
    ctx: &WedgeContext<f64>,
    xp: [f64; 2],
    s: f64,
    face: usize,
    lo: f64,
    weight: &dyn Fn(f64) -> f64,
    layers: &[(f64, f64)],
    rule: &Rule,
    q: &QuadratureSpec,
) -> Result<f64> {
    let (c, sd) = flux_window(ctx, s, xp, face);
    let span = q.span + 2.0;
    let a = lo.max(0.0).max(c - span * sd);
    let b = c + span * sd;
    let mut layers = layers.to_vec();
    if a <= 0.0 && ctx.spacing().is_none() {
        // the flux behaves like y^(nu_1 - 1) at the corner
        layers.push((0.0, 1e-5 * sd));
    }
    let mut total = 0.0;
    for (y, w) in rule.nodes(a, b, q.max_panel.min(0.75 * sd), &layers) {
        let wt = weight(y);
        if wt != 0.0 {
            total += w * wt * flux_f64(ctx, s, y, xp, face, q.n_terms)?;
        }
    }
    Ok(total)
}

/// `int_0^t f(s) ds` for integrands that vanish quickly at `s = 0` on the
/// scale `d^2`, optionally with a square-root layer at `s = t`.
fn time_integral(
    t: f64,
    d: f64,
    end_layer: bool,
    rule: &Rule,
    q: &QuadratureSpec,
    f: impl Fn(f64) -> Result<f64> + Sync,
) -> Result<f64> {
    let start_layer = [(0.0, (d / 6.0).max(1e-6))];
    if !end_layer {
        let top = t.sqrt();
        let nodes = rule.nodes(0.0, top, top / q.time_panels as f64, &start_layer);
        return par_sum(&nodes, |u| Ok(2.0 * u * f(u * u)?));
    }
    let top = (0.5 * t).sqrt();
    let base = top / q.time_panels as f64;
    let head = rule.nodes(0.0, top, base, &start_layer);
    let tail = rule.nodes(0.0, top, base, &[(0.0, base / 8.0)]);
    Ok(par_sum(&head, |u| Ok(2.0 * u * f(u * u)?))? + par_sum(&tail, |v| Ok(2.0 * v * f(t - v * v)?))?)
}

fn cumulative_flux_f64(ctx: &WedgeContext<f64>, xp: [f64; 2], t: f64, face: usize, q: &QuadratureSpec, order: usize) -> Result<f64> {
    let rule = Rule::new(order);
    let d = if face == 1 { xp[1] } else { xp[0] };
    time_integral(t, d, false, &rule, q, |s| face_integral(ctx, xp, s, face, 0.0, &|_| 1.0, &[], &rule, q))
}

fn checked(q: &QuadratureSpec, what: &'static str, f: impl Fn(usize) -> Result<f64>) -> Result<f64> {
    q.validate()?;
    let value = f(q.order)?;
    let coarse = f(q.check_order)?;
    let err = (value - coarse).abs();
    if err > q.tolerance {
        return Err(CircuitError::NoConvergence { what, iterations: q.order, residual: err });
    }
    Ok(value)
}

/// Probability of still being inside the quadrant at time `t`.
pub fn interior_mass<T: Scalar>(ctx: &WedgeContext<T>, xp: [T; 2], t: T, q: &QuadratureSpec) -> Result<T> {
    check_interior(t, xp)?;
    let c = ctx.to_f64();
    let xp = [xp[0].to64(), xp[1].to64()];
    checked(q, "interior mass quadrature", |order| region_mass(&c, xp, t.to64(), 0.0, &[], &|_| 0.0, q, order))
        .map(T::lit)
}

/// Probability of having left through `face` by time `t`.
pub fn cumulative_flux<T: Scalar>(
    ctx: &WedgeContext<T>,
    xp: [T; 2],
    t: T,
    face: usize,
    q: &QuadratureSpec,
) -> Result<T> {
    check_interior(t, xp)?;
    if face > 1 {
        return Err(invalid("face", "must be 0 or 1"));
    }
    let c = ctx.to_f64();
    let xp = [xp[0].to64(), xp[1].to64()];
    checked(q, "boundary flux quadrature", |order| cumulative_flux_f64(&c, xp, t.to64(), face, q, order)).map(T::lit)
}

/// Default boundaries of a two-bank network and its terminal domains,
/// all in scaled coordinates relative to the interior boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoBankTerminalDomains<T> {
    pub zeta: [T; 2],
    /// `Lambda_i^<`.
    pub interior: [T; 2],
    /// `Lambda_i^=`.
    pub terminal: [T; 2],
    /// Interior boundary of bank `i` once the other bank has gone.
    pub interior_after: [T; 2],
    /// Terminal boundary of bank `i` once the other bank has gone.
    pub terminal_after: [T; 2],
    pub external: [T; 2],
    /// `mutual[i][j]` owed by `i` to `j`.
    pub mutual: [[T; 2]; 2],
    pub delta: T,
}

impl<T: Scalar> TwoBankTerminalDomains<T> {
    pub fn new(net: &BankNetwork<T>) -> Result<Self> {
        if net.n() != 2 {
            return Err(invalid("network", "two banks required"));
        }
        net.validate()?;
        let ctx = NondimContext::new(net)?;
        let b = boundaries(net);
        let after = [boundaries(&remove_bank(net, 1)?), boundaries(&remove_bank(net, 0)?)];
        let (l1, l2) = (net.external_liabilities[0], net.external_liabilities[1]);
        let (l12, l21) = (net.mutual[0][1], net.mutual[1][0]);
        Ok(Self {
            zeta: [ctx.zeta[0], ctx.zeta[1]],
            interior: [b.interior[0], b.interior[1]],
            terminal: [b.terminal[0], b.terminal[1]],
            interior_after: [after[0].interior[0], after[1].interior[0]],
            terminal_after: [after[0].terminal[0], after[1].terminal[0]],
            external: [l1, l2],
            mutual: [[T::zero(), l12], [l21, T::zero()]],
            delta: l1 * l2 + l1 * l21 + l2 * l12,
        })
    }

    fn scaled(&self, i: usize, level: T) -> T {
        if level > T::zero() {
            self.zeta[i] * (level / self.interior[i]).ln()
        } else {
            T::neg_infinity()
        }
    }

    /// `M_i^=`: solvency level at maturity while both banks are alive.
    pub fn m_terminal(&self, i: usize) -> T {
        self.scaled(i, self.terminal[i])
    }

    /// Interior boundary after the other bank's default.
    pub fn m_interior_after(&self, i: usize) -> T {
        self.scaled(i, self.interior_after[i])
    }

    /// Terminal boundary after the other bank's default.
    pub fn m_terminal_after(&self, i: usize) -> T {
        self.scaled(i, self.terminal_after[i])
    }

    /// Solvency boundary of bank `i` at maturity when the other bank
    /// cannot pay in full, as a function of the other coordinate.
    pub fn theta(&self, i: usize, x_other: T) -> T {
        let o = 1 - i;
        let a_other = self.interior[o] * (x_other / self.zeta[o]).exp();
        let num = self.delta - self.mutual[o][i] * a_other;
        let den = self.interior[i] * (self.external[o] + self.mutual[o][i]);
        if num > T::zero() {
            self.zeta[i] * (num / den).ln()
        } else {
            T::neg_infinity()
        }
    }

    /// Which banks are solvent at maturity when both reach it.
    pub fn classify(&self, x: [T; 2]) -> [bool; 2] {
        let m = [self.m_terminal(0), self.m_terminal(1)];
        let solvent = |i: usize| {
            let o = 1 - i;
            if x[o] >= m[o] {
                x[i] >= m[i]
            } else {
                x[i] >= self.theta(i, x[o])
            }
        };
        [solvent(0), solvent(1)]
    }

    pub fn swapped(&self) -> Self {
        let sw = |a: [T; 2]| [a[1], a[0]];
        Self {
            zeta: sw(self.zeta),
            interior: sw(self.interior),
            terminal: sw(self.terminal),
            interior_after: sw(self.interior_after),
            terminal_after: sw(self.terminal_after),
            external: sw(self.external),
            mutual: [[T::zero(), self.mutual[1][0]], [self.mutual[0][1], T::zero()]],
            delta: self.delta,
        }
    }
}

/// Everything needed for semi-analytic survival of a two-bank network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoBankProblem<T> {
    pub wedge: WedgeContext<T>,
    pub domains: TwoBankTerminalDomains<T>,
    pub sigma_bar: T,
    pub start: [T; 2],
}

impl<T: Scalar> TwoBankProblem<T> {
    pub fn new(net: &BankNetwork<T>) -> Result<Self> {
        if net.jumps.as_ref().is_some_and(|j| !j.is_empty()) {
            return Err(invalid("jumps", "no semi-analytic form with jumps"));
        }
        let domains = TwoBankTerminalDomains::new(net)?;
        let nd = NondimContext::new(net)?;
        let wedge = WedgeContext::new(net.corr.get(0, 1), [nd.xi[0], nd.xi[1]])?;
        Ok(Self { wedge, domains, sigma_bar: nd.sigma_bar, start: [nd.x[0], nd.x[1]] })
    }

    pub fn scaled_time(&self, t: T) -> T {
        self.sigma_bar * self.sigma_bar * t
    }

    pub fn swapped(&self) -> Self {
        Self {
            wedge: self.wedge.swapped(),
            domains: self.domains.swapped(),
            sigma_bar: self.sigma_bar,
            start: [self.start[1], self.start[0]],
        }
    }
}

/// Joint survival: both banks avoid their interior boundaries and are
/// solvent at maturity. `t` is scaled time.
pub fn joint_survival_q<T: Scalar>(p: &TwoBankProblem<T>, xp: [T; 2], t: T, q: &QuadratureSpec) -> Result<T> {
    check_interior(t, xp)?;
    let c = p.wedge.to_f64();
    let m1 = p.domains.m_terminal(0).to64();
    let m2 = p.domains.m_terminal(1).to64();
    let xp = [xp[0].to64(), xp[1].to64()];
    checked(q, "joint survival quadrature", |order| region_mass(&c, xp, t.to64(), m2, &[], &|_| m1, q, order))
        .map(T::lit)
}

/// Survival of bank 1 on its own boundaries, ignoring the other bank.
pub fn marginal_survival_1d<T: Scalar>(p: &TwoBankProblem<T>, bank: usize, xp: [T; 2], t: T) -> T {
    survival_1d(xp[bank], p.wedge.xi[bank], T::zero(), p.domains.m_terminal(bank), t).value
}

/// Marginal survival of bank 1, including the paths on which bank 2
/// defaults first and bank 1 continues against moved boundaries.
pub fn marginal_survival_q1<T: Scalar>(p: &TwoBankProblem<T>, xp: [T; 2], t: T, q: &QuadratureSpec) -> Result<T> {
    check_interior(t, xp)?;
    let c = p.wedge.to_f64();
    let d = &p.domains;
    let m1 = d.m_terminal(0).to64();
    let m2 = d.m_terminal(1).to64();
    let m_int = d.m_interior_after(0).to64();
    let m_term = d.m_terminal_after(0).to64();
    let theta = |x2: f64| d.theta(0, T::lit(x2)).to64();
    let xi1 = c.xi[0];
    let (xp, t) = ([xp[0].to64(), xp[1].to64()], t.to64());
    checked(q, "marginal survival quadrature", |order| {
        let lower = |x2: f64| if x2 >= m2 { m1 } else { theta(x2) };
        let mass = region_mass(&c, xp, t, 0.0, &[m2], &lower, q, order)?;
        let rule = Rule::new(order);
        let flux = time_integral(t, xp[1], true, &rule, q, |s| {
            let tau = t - s;
            let sc = tau.sqrt().max(1e-6);
            let layers: Vec<(f64, f64)> = [m_int, m_term].iter().filter(|v| v.is_finite()).map(|&v| (v, sc)).collect();
            let weight = |x1: f64| survival_1d_f64(x1, xi1, m_int, m_term, tau);
            face_integral(&c, xp, s, 1, m_int.max(0.0), &weight, &layers, &rule, q)
        })?;
        Ok(mass + flux)
    })
    .map(T::lit)
}

/// Marginal survival of either bank.
pub fn marginal_survival<T: Scalar>(
    p: &TwoBankProblem<T>,
    bank: usize,
    xp: [T; 2],
    t: T,
    q: &QuadratureSpec,
) -> Result<T> {
    match bank {
        0 => marginal_survival_q1(p, xp, t, q),
        1 => marginal_survival_q1(&p.swapped(), [xp[1], xp[0]], t, q),
        _ => Err(invalid("bank", "must be 0 or 1")),
    }
}
