//! Stochastic monetary circuit: rentiers, firms and an aggregate bank.
//!
//! Stocks are `C_r, D_r, L_r, D_f, L_f, K_f, K_b`; the labour block
//! `(theta_w, N_w, s_w, lambda_w)` rides along and the price level is
//! recovered from production. Bank capital balances the bank's books,
//! `K_b = L_r + L_f - D_r - D_f`, and the dynamics preserve this as long as
//! the capital constraint does not ration credit.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, CircuitError, Result};
use crate::scalar::Scalar;
use crate::stochastic_engine::{clamp_unit, map_paths, standard_normal, PathRecord, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmcParams<T> {
    pub kappa_c: T,
    pub sigma_c: T,
    pub sigma_k: T,
    pub alpha0: T,
    pub alpha1: T,
    pub upsilon0: T,
    pub upsilon1: T,
    pub upsilon2: T,
    pub upsilon3: T,
    pub delta_rf: T,
    pub delta_ff: T,
    pub delta_rb: T,
    pub delta_bb: T,
    pub xi_delta: T,
    pub xi_a: T,
    pub r_d: T,
    pub r_l: T,
    pub nu_f: T,
    /// Capital adequacy ratio.
    pub nu_b: T,
    pub a: T,
    pub b: T,
    pub c: T,
    pub omega: T,
    pub sigma_s: T,
    pub sigma_lambda: T,
    /// Productivity growth.
    pub alpha: T,
    /// Workforce growth.
    pub beta: T,
}

impl<T: Scalar> MmcParams<T> {
    /// Deterministic reference scenario. `nu_b`, `alpha` and `beta` are not
    /// pinned by the reference and are chosen so that `alpha + beta + xi_A = c`.
    pub fn fig8() -> Self {
        let l = T::lit;
        Self {
            kappa_c: l(0.5),
            sigma_c: T::zero(),
            sigma_k: T::zero(),
            alpha0: l(0.5),
            alpha1: l(0.5),
            upsilon0: l(-1.6),
            upsilon1: l(1.1),
            upsilon2: l(0.1),
            upsilon3: l(-0.2),
            delta_rf: l(0.75),
            delta_ff: l(0.25),
            delta_rb: l(0.5),
            delta_bb: l(0.5),
            xi_delta: l(0.025),
            xi_a: l(0.02),
            r_d: l(0.02),
            r_l: l(0.04),
            nu_f: l(0.13),
            nu_b: l(0.1),
            a: l(0.05),
            b: l(0.05),
            c: l(0.075),
            omega: l(0.005),
            sigma_s: T::zero(),
            sigma_lambda: T::zero(),
            alpha: l(0.035),
            beta: l(0.02),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let tol = T::lit(1e-12);
        for (name, v) in [
            ("delta_rf", self.delta_rf),
            ("delta_ff", self.delta_ff),
            ("delta_rb", self.delta_rb),
            ("delta_bb", self.delta_bb),
            ("nu_b", self.nu_b),
        ] {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(invalid(name, "must lie in [0, 1]"));
            }
        }
        if (self.delta_rf + self.delta_ff - T::one()).abs() > tol {
            return Err(invalid("delta_ff", "must equal 1 - delta_rf"));
        }
        if (self.delta_rb + self.delta_bb - T::one()).abs() > tol {
            return Err(invalid("delta_bb", "must equal 1 - delta_rb"));
        }
        for (name, v) in [
            ("kappa_c", self.kappa_c),
            ("sigma_c", self.sigma_c),
            ("sigma_k", self.sigma_k),
            ("xi_delta", self.xi_delta),
            ("xi_a", self.xi_a),
            ("r_d", self.r_d),
            ("r_l", self.r_l),
            ("omega", self.omega),
            ("sigma_s", self.sigma_s),
            ("sigma_lambda", self.sigma_lambda),
        ] {
            if !(v >= T::zero()) {
                return Err(invalid(name, "must be non-negative"));
            }
        }
        if !(self.nu_f > T::zero()) {
            return Err(invalid("nu_f", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmcState<T> {
    pub c_r: T,
    pub d_r: T,
    pub l_r: T,
    pub d_f: T,
    pub l_f: T,
    pub k_f: T,
    pub k_b: T,
    pub theta_w: T,
    pub n_w: T,
    pub s_w: T,
    pub lambda_w: T,
}

pub const STATE_DIM: usize = 11;

impl<T: Scalar> MmcState<T> {
    pub fn fig8() -> Self {
        let l = T::lit;
        Self {
            c_r: l(3.0),
            d_r: l(30.0),
            l_r: l(20.0),
            d_f: l(20.0),
            l_f: l(50.0),
            k_f: l(40.0),
            k_b: l(20.0),
            theta_w: T::one(),
            n_w: T::one(),
            s_w: l(0.7),
            lambda_w: l(0.95),
        }
    }

    pub fn to_array(&self) -> [T; STATE_DIM] {
        [
            self.c_r,
            self.d_r,
            self.l_r,
            self.d_f,
            self.l_f,
            self.k_f,
            self.k_b,
            self.theta_w,
            self.n_w,
            self.s_w,
            self.lambda_w,
        ]
    }

    pub fn from_array(v: &[T; STATE_DIM]) -> Self {
        Self {
            c_r: v[0],
            d_r: v[1],
            l_r: v[2],
            d_f: v[3],
            l_f: v[4],
            k_f: v[5],
            k_b: v[6],
            theta_w: v[7],
            n_w: v[8],
            s_w: v[9],
            lambda_w: v[10],
        }
    }

    /// `K_b - (L_r + L_f - D_r - D_f)`.
    pub fn identity_residual(&self) -> T {
        self.k_b - (self.l_r + self.l_f - self.d_r - self.d_f)
    }

    /// Largest financial or physical stock, used to scale tolerances.
    pub fn max_stock(&self) -> T {
        [self.d_r, self.l_r, self.d_f, self.l_f, self.k_f, self.k_b.abs()]
            .into_iter()
            .fold(T::zero(), T::max)
    }
}

/// `r_D D - r_L L`.
pub fn net_interest<T: Scalar>(d: T, l: T, p: &MmcParams<T>) -> T {
    p.r_d * d - p.r_l * l
}

/// Logistic map of the real line onto `(0, 1)`.
pub fn phi<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-T::two() * x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UpsilonMode {
    /// Single substitution starting from `Phi(upsilon0)`.
    OneStep,
    #[default]
    FixedPoint,
    Newton,
}

const UPSILON_TOL: f64 = 1e-12;
const UPSILON_MAX_ITER: usize = 200;

fn upsilon_argument<T: Scalar>(u: T, s: &MmcState<T>, p: &MmcParams<T>) -> T {
    p.upsilon0
        + p.upsilon1 * s.c_r / ((T::one() - u) * p.nu_f * s.k_f)
        + p.upsilon2 * s.d_f / s.k_f
        + p.upsilon3 * s.l_f / s.k_f
}

/// Investment propensity `upsilon_f`, the root of `u = Phi(x(u))`.
pub fn solve_upsilon<T: Scalar>(s: &MmcState<T>, p: &MmcParams<T>, mode: UpsilonMode) -> Result<T> {
    solve_upsilon_from(s, p, mode, None)
}

/// As [`solve_upsilon`], with an optional starting point for the iterative modes.
pub fn solve_upsilon_from<T: Scalar>(
    s: &MmcState<T>,
    p: &MmcParams<T>,
    mode: UpsilonMode,
    guess: Option<T>,
) -> Result<T> {
    if !(s.k_f > T::zero()) {
        return Err(CircuitError::Domain(format!("K_f = {} must be positive", s.k_f)));
    }
    if !(s.c_r > T::zero()) {
        return Err(CircuitError::Domain(format!("C_r = {} must be positive", s.c_r)));
    }
    let u0 = phi(p.upsilon0);
    let first = phi(upsilon_argument(u0, s, p));
    let tol = T::lit(UPSILON_TOL);
    match mode {
        UpsilonMode::OneStep => Ok(first),
        UpsilonMode::FixedPoint => {
            let mut u = guess.unwrap_or(first);
            let mut step = T::infinity();
            for _ in 0..UPSILON_MAX_ITER {
                let next = T::half() * u + T::half() * phi(upsilon_argument(u, s, p));
                step = (next - u).abs();
                u = next;
                if step < tol {
                    return Ok(u);
                }
            }
            Err(CircuitError::NoConvergence {
                what: "upsilon fixed point",
                iterations: UPSILON_MAX_ITER,
                residual: step.to64(),
            })
        }
        UpsilonMode::Newton => {
            let mut u = guess.unwrap_or(first);
            let mut g = T::infinity();
            for _ in 0..UPSILON_MAX_ITER {
                let x = upsilon_argument(u, s, p);
                let f = phi(x);
                g = u - f;
                if g.abs() < tol {
                    return Ok(u);
                }
                let om = T::one() - u;
                let dx = p.upsilon1 * s.c_r / (om * om * p.nu_f * s.k_f);
                let dg = T::one() - T::two() * f * (T::one() - f) * dx;
                let mut next = u - g / dg;
                if !(next > T::zero() && next < T::one()) || !dg.is_finite() {
                    next = T::half() * (u + f);
                }
                u = next;
            }
            Err(CircuitError::NoConvergence {
                what: "upsilon newton",
                iterations: UPSILON_MAX_ITER,
                residual: g.abs().to64(),
            })
        }
    }
}

/// Intensive and flow quantities implied by a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmcDerived<T> {
    pub ni_r: T,
    pub ni_f: T,
    pub upsilon_f: T,
    pub gamma_f: T,
    /// Production after the capacity cap.
    pub y_f: T,
    /// Production demanded by consumption and investment, before the cap.
    pub y_demand: T,
    pub i_f: T,
    /// Demand relative to capacity; above one when the cap binds.
    pub u_f: T,
    pub c_w: T,
    pub pi_f: T,
    pub pi_f_d: T,
    pub pi_f_u: T,
    pub pi_b: T,
    pub pi_b_d: T,
    pub pi_b_u: T,
    pub profit_rate: T,
    pub cf_r: T,
    pub cf_f: T,
    pub sigma_r: T,
    pub capacity_capped: bool,
}

pub fn derived_quantities<T: Scalar>(s: &MmcState<T>, p: &MmcParams<T>, mode: UpsilonMode) -> Result<MmcDerived<T>> {
    derived_from(s, p, mode, None)
}

fn derived_from<T: Scalar>(s: &MmcState<T>, p: &MmcParams<T>, mode: UpsilonMode, guess: Option<T>) -> Result<MmcDerived<T>> {
    let u = solve_upsilon_from(s, p, mode, guess)?;
    if !(u < T::one()) {
        return Err(CircuitError::Domain(format!("degenerate investment propensity {u}")));
    }
    let one = T::one();
    let s_f = one - s.s_w;
    let ni_r = net_interest(s.d_r, s.l_r, p);
    let ni_f = net_interest(s.d_f, s.l_f, p);
    let y_demand = s.c_r / ((one - u) * s_f);
    let capacity = p.nu_f * s.k_f;
    let capped = y_demand > capacity;
    let y_f = if capped { capacity } else { y_demand };
    let i_f = u * s.c_r / (one - u);
    // When capped, workers absorb the shortfall.
    let c_w = if capped { y_f - s.c_r - i_f } else { s.s_w * y_f };
    let pi_f = s.c_r / (one - u) + ni_f;
    let pi_b = -p.xi_delta * (s.l_r + s.l_f) - ni_r - ni_f;
    let (pi_f_d, pi_f_u) = (p.delta_rf * pi_f, p.delta_ff * pi_f);
    let (pi_b_d, pi_b_u) = (p.delta_rb * pi_b, p.delta_bb * pi_b);
    Ok(MmcDerived {
        ni_r,
        ni_f,
        upsilon_f: u,
        gamma_f: u * s_f,
        y_f,
        y_demand,
        i_f,
        u_f: y_demand / capacity,
        c_w,
        pi_f,
        pi_f_d,
        pi_f_u,
        pi_b,
        pi_b_d,
        pi_b_u,
        profit_rate: pi_f / s.k_f,
        cf_r: ni_r + pi_f_d + pi_b_d - s.c_r,
        cf_f: pi_f_u - i_f,
        sigma_r: s.d_r - s.l_r + s.k_f + s.d_f - s.l_f + s.k_b,
        capacity_capped: capped,
    })
}

/// Drift, diagonal diffusion loadings (one independent Brownian motion per
/// non-zero entry) and constraint flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmcDynamics<T> {
    pub drift: [T; STATE_DIM],
    pub diffusion: [T; STATE_DIM],
    pub derived: MmcDerived<T>,
    /// Capital constraint binds; loan creation is suppressed.
    pub credit_crunch: bool,
    /// Loan creation that was demanded but not granted, per unit time.
    pub unmet_financing: T,
    pub c_bar: T,
}

pub fn mmc_drift_and_diffusion<T: Scalar>(
    s: &MmcState<T>,
    p: &MmcParams<T>,
    mode: UpsilonMode,
) -> Result<MmcDynamics<T>> {
    dynamics_from(s, p, mode, None)
}

fn dynamics_from<T: Scalar>(s: &MmcState<T>, p: &MmcParams<T>, mode: UpsilonMode, guess: Option<T>) -> Result<MmcDynamics<T>> {
    let d = derived_from(s, p, mode, guess)?;
    let one = T::one();
    let u = d.upsilon_f;
    let loans = s.l_r + s.l_f;
    let c_bar = p.alpha0 * (p.delta_bb * d.ni_r + (p.delta_rf - p.delta_rb) * d.ni_f + p.delta_rf * s.c_r / (one - u))
        + p.alpha1 * p.nu_f * s.k_f;
    let credit_crunch = !(p.nu_b * loans - s.k_b < T::zero());
    let need_r = (-d.cf_r).max(T::zero());
    let need_f = (-d.cf_f).max(T::zero());
    let (grant_r, grant_f, unmet) = if credit_crunch {
        (T::zero(), T::zero(), need_r + need_f)
    } else {
        (need_r, need_f, T::zero())
    };
    let s_f = one - s.s_w;
    let lambda_u = one - s.lambda_w;
    let drift = [
        p.kappa_c * (c_bar - s.c_r),
        d.cf_r.max(T::zero()),
        -p.xi_delta * s.l_r + grant_r,
        d.cf_f.max(T::zero()),
        -p.xi_delta * s.l_f + grant_f,
        d.i_f - p.xi_a * s.k_f,
        d.pi_b_u,
        p.alpha * s.theta_w,
        p.beta * s.n_w,
        -(p.a - p.b * s.lambda_w - p.omega / lambda_u) * s.s_w,
        (d.i_f / (p.nu_f * s.k_f) - p.c - p.omega / s_f) * s.lambda_w,
    ];
    let z = T::zero();
    let diffusion = [
        p.sigma_c * s.c_r,
        z,
        z,
        z,
        z,
        p.sigma_k * s.k_f,
        z,
        z,
        z,
        p.sigma_s * (s.s_w * s_f).max(z).sqrt(),
        p.sigma_lambda * (s.lambda_w * lambda_u).max(z).sqrt(),
    ];
    Ok(MmcDynamics {
        drift,
        diffusion,
        derived: d,
        credit_crunch,
        unmet_financing: unmet,
        c_bar,
    })
}

/// Price level `C_r / ((1 - upsilon_f) s_f lambda_w theta_w N_w)`.
pub fn price_level<T: Scalar>(s: &MmcState<T>, d: &MmcDerived<T>) -> T {
    d.y_demand / (s.lambda_w * s.theta_w * s.n_w)
}

/// Column names of the recorded rows.
pub const MMC_COLUMNS: [&str; 26] = [
    "c_r",
    "d_r",
    "l_r",
    "d_f",
    "l_f",
    "k_f",
    "k_b",
    "theta_w",
    "n_w",
    "s_w",
    "lambda_w",
    "price",
    "upsilon_f",
    "y_f",
    "i_f",
    "c_w",
    "u_f",
    "pi_f",
    "pi_b",
    "cf_r",
    "cf_f",
    "unmet_financing",
    "credit_crunch",
    "capacity_capped",
    "identity_residual",
    "production_residual",
];

pub mod col {
    pub const C_R: usize = 0;
    pub const K_F: usize = 5;
    pub const K_B: usize = 6;
    pub const PRICE: usize = 11;
    pub const UPSILON: usize = 12;
    pub const CREDIT_CRUNCH: usize = 22;
    pub const CAPACITY_CAPPED: usize = 23;
    pub const IDENTITY_RESIDUAL: usize = 24;
    pub const PRODUCTION_RESIDUAL: usize = 25;
}

fn row<T: Scalar>(s: &MmcState<T>, dynm: &MmcDynamics<T>) -> Vec<T> {
    let d = &dynm.derived;
    let flag = |b: bool| if b { T::one() } else { T::zero() };
    let mut r = s.to_array().to_vec();
    r.extend([
        price_level(s, d),
        d.upsilon_f,
        d.y_f,
        d.i_f,
        d.c_w,
        d.u_f,
        d.pi_f,
        d.pi_b,
        d.cf_r,
        d.cf_f,
        dynm.unmet_financing,
        flag(dynm.credit_crunch),
        flag(d.capacity_capped),
        s.identity_residual(),
        (d.y_f - d.c_w - s.c_r - d.i_f) / d.y_f,
    ]);
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmcRun<T> {
    pub upsilon_mode: UpsilonMode,
    /// Lower floor for `C_r` and `K_f`.
    pub floor: T,
    /// Clamp band for `s_w` and `lambda_w`.
    pub clamp_eps: T,
    /// Relative tolerance for the balance-sheet identity at `t = 0`.
    pub identity_tol: T,
}

impl<T: Scalar> Default for MmcRun<T> {
    fn default() -> Self {
        Self {
            upsilon_mode: UpsilonMode::FixedPoint,
            floor: T::lit(1e-9),
            clamp_eps: T::lit(1e-9),
            identity_tol: T::lit(1e-10),
        }
    }
}

/// Euler-Maruyama paths. Rows follow [`MMC_COLUMNS`]; `clamped_steps` counts
/// steps where a floor or the unit-square clamp was applied.
pub fn simulate<T: Scalar>(
    initial: MmcState<T>,
    p: &MmcParams<T>,
    run: &MmcRun<T>,
    cfg: &SimConfig<T>,
) -> Result<Vec<PathRecord<T>>> {
    p.validate()?;
    let steps = cfg.steps()?;
    let res = initial.identity_residual();
    if res.abs() > run.identity_tol * initial.max_stock().max(T::one()) {
        return Err(CircuitError::Identity(format!(
            "initial K_b differs from L_r + L_f - D_r - D_f by {res}"
        )));
    }
    if !(initial.s_w > T::zero() && initial.s_w < T::one() && initial.lambda_w > T::zero() && initial.lambda_w < T::one())
    {
        return Err(CircuitError::Domain("s_w and lambda_w must lie in (0, 1)".into()));
    }
    let paths = map_paths(cfg.seed, cfg.paths, |stream| {
        let mut rng = stream.rng();
        let mut rec = PathRecord::new(stream.stream_index);
        let mut s = initial;
        let sq = cfg.dt.sqrt();
        let mut dynm = mmc_drift_and_diffusion(&s, p, run.upsilon_mode)?;
        rec.push(T::zero(), row(&s, &dynm));
        for k in 1..=steps {
            let mut x = s.to_array();
            for i in 0..STATE_DIM {
                x[i] += dynm.drift[i] * cfg.dt;
                if dynm.diffusion[i] != T::zero() {
                    let z: T = standard_normal(&mut rng);
                    x[i] += dynm.diffusion[i] * sq * z;
                }
            }
            if let Some(c) = x.iter().position(|v| !v.is_finite()) {
                return Err(CircuitError::NonFinite { component: c, step: k });
            }
            let mut hit = false;
            for i in [0, 5] {
                if x[i] < run.floor {
                    x[i] = run.floor;
                    hit = true;
                }
            }
            hit |= clamp_unit(&mut x[9], run.clamp_eps);
            hit |= clamp_unit(&mut x[10], run.clamp_eps);
            if hit {
                rec.clamped_steps += 1;
            }
            s = MmcState::from_array(&x);
            dynm = dynamics_from(&s, p, run.upsilon_mode, Some(dynm.derived.upsilon_f))?;
            rec.steps = k;
            if cfg.records(k, steps) {
                rec.push(T::from_usize(k).unwrap() * cfg.dt, row(&s, &dynm));
            }
        }
        Ok(rec)
    });
    paths.into_iter().collect()
}
