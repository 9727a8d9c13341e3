//! Lotka-Volterra-Goodwin dynamics of the wage share `s_w` and employment rate `lambda_w`.
//!
//! The classical system cycles around `(c/d, a/b)` and can leave the unit
//! square. The regularized system adds `omega/(1 - x)` repulsion terms and
//! Jacobi volatilities so that both shares stay in `(0, 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, CircuitError, Result};
use crate::scalar::Scalar;
use crate::stochastic_engine::{
    clamp_unit, map_paths, rk4_step, standard_normal, PathRecord, SimConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoodwinParams<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
    #[serde(default)]
    pub omega: T,
    #[serde(default)]
    pub sigma_s: T,
    #[serde(default)]
    pub sigma_lambda: T,
}

/// Growth-rate composites from which `c` and `d` can be assembled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoodwinComposites<T> {
    /// Productivity growth.
    pub alpha: T,
    /// Labour-force growth.
    pub beta: T,
    /// Price inflation.
    pub gamma: T,
    pub nu_f: T,
    pub xi_a: T,
}

impl<T: Scalar> GoodwinComposites<T> {
    /// `d lambda / lambda = (s_f nu_f - alpha - beta - gamma - xi_A) dt`
    /// rearranged as `c - d s_w`.
    pub fn c(&self) -> T {
        self.nu_f - (self.alpha + self.beta + self.gamma + self.xi_a)
    }

    pub fn d(&self) -> T {
        self.nu_f
    }
}

impl<T: Scalar> GoodwinParams<T> {
    pub fn classical(a: T, b: T, c: T, d: T) -> Self {
        Self {
            a,
            b,
            c,
            d,
            omega: T::zero(),
            sigma_s: T::zero(),
            sigma_lambda: T::zero(),
        }
    }

    pub fn with_omega(mut self, omega: T) -> Self {
        self.omega = omega;
        self
    }

    pub fn with_sigmas(mut self, sigma_s: T, sigma_lambda: T) -> Self {
        self.sigma_s = sigma_s;
        self.sigma_lambda = sigma_lambda;
        self
    }

    /// Fills `c` and `d` from composites. Values already given directly win;
    /// a disagreement is logged and returned as a warning.
    pub fn resolve(
        a: T,
        b: T,
        c: Option<T>,
        d: Option<T>,
        composites: Option<&GoodwinComposites<T>>,
    ) -> Result<(Self, Vec<String>)> {
        let mut warnings = Vec::new();
        let pick = |name: &str, direct: Option<T>, derived: Option<T>, warnings: &mut Vec<String>| {
            match (direct, derived) {
                (Some(v), Some(w)) => {
                    if (v - w).abs() > T::lit(1e-12) * (T::one() + v.abs()) {
                        let msg = format!("{name}={v} given directly overrides composite value {w}");
                        log::warn!("{msg}");
                        warnings.push(msg);
                    }
                    Some(v)
                }
                (Some(v), None) | (None, Some(v)) => Some(v),
                (None, None) => None,
            }
        };
        let c = pick("c", c, composites.map(|k| k.c()), &mut warnings)
            .ok_or_else(|| invalid("c", "neither c nor composites given"))?;
        let d = pick("d", d, composites.map(|k| k.d()), &mut warnings)
            .ok_or_else(|| invalid("d", "neither d nor composites given"))?;
        let p = Self::classical(a, b, c, d);
        p.validate()?;
        Ok((p, warnings))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b), ("c", self.c), ("d", self.d)] {
            if !(v > T::zero()) {
                return Err(invalid(name, format!("{v} must be positive")));
            }
        }
        if self.omega < T::zero() {
            return Err(invalid("omega", "must be non-negative"));
        }
        if self.sigma_s < T::zero() || self.sigma_lambda < T::zero() {
            return Err(invalid("sigma", "volatilities must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoodwinState<T> {
    pub s_w: T,
    pub lambda_w: T,
}

impl<T: Scalar> GoodwinState<T> {
    pub fn new(s_w: T, lambda_w: T) -> Self {
        Self { s_w, lambda_w }
    }

    pub fn s_f(&self) -> T {
        T::one() - self.s_w
    }

    pub fn lambda_u(&self) -> T {
        T::one() - self.lambda_w
    }

    pub fn to_vec(self) -> Vec<T> {
        vec![self.s_w, self.lambda_w]
    }

    pub fn from_slice(v: &[T]) -> Self {
        Self::new(v[0], v[1])
    }

    pub(crate) fn check_interior(&self) -> Result<()> {
        let (zero, one) = (T::zero(), T::one());
        if !(self.s_w > zero && self.s_w < one) {
            return Err(CircuitError::Domain(format!("s_w = {} not in (0,1)", self.s_w)));
        }
        if !(self.lambda_w > zero && self.lambda_w < one) {
            return Err(CircuitError::Domain(format!(
                "lambda_w = {} not in (0,1)",
                self.lambda_w
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Classical,
    Regularized,
}

pub fn classical_drift<T: Scalar>(s: &GoodwinState<T>, p: &GoodwinParams<T>) -> (T, T) {
    (
        -(p.a - p.b * s.lambda_w) * s.s_w,
        (p.c - p.d * s.s_w) * s.lambda_w,
    )
}

pub fn regularized_drift<T: Scalar>(s: &GoodwinState<T>, p: &GoodwinParams<T>) -> Result<(T, T)> {
    s.check_interior()?;
    Ok(regularized_drift_unchecked(s, p))
}

fn regularized_drift_unchecked<T: Scalar>(s: &GoodwinState<T>, p: &GoodwinParams<T>) -> (T, T) {
    (
        -(p.a - p.b * s.lambda_w - p.omega / s.lambda_u()) * s.s_w,
        (p.c - p.d * s.s_w - p.omega / s.s_f()) * s.lambda_w,
    )
}

pub fn drift<T: Scalar>(s: &GoodwinState<T>, p: &GoodwinParams<T>, regime: Regime) -> Result<(T, T)> {
    match regime {
        Regime::Classical => Ok(classical_drift(s, p)),
        Regime::Regularized => regularized_drift(s, p),
    }
}

/// The first integral `Psi`, constant along deterministic orbits.
pub fn conservation<T: Scalar>(s: &GoodwinState<T>, p: &GoodwinParams<T>, regime: Regime) -> Result<T> {
    let domain = |what: &str, v: T| CircuitError::Domain(format!("log of {what} = {v}"));
    if !(s.s_w > T::zero()) {
        return Err(domain("s_w", s.s_w));
    }
    if !(s.lambda_w > T::zero()) {
        return Err(domain("lambda_w", s.lambda_w));
    }
    let linear = p.d * s.s_w + p.b * s.lambda_w;
    match regime {
        Regime::Classical => Ok(-(p.c * s.s_w.ln() + p.a * s.lambda_w.ln()) + linear),
        Regime::Regularized => {
            if !(s.s_f() > T::zero()) {
                return Err(domain("s_f", s.s_f()));
            }
            if !(s.lambda_u() > T::zero()) {
                return Err(domain("lambda_u", s.lambda_u()));
            }
            let w = p.omega;
            let log = (p.c - w) * s.s_w.ln()
                + w * s.s_f().ln()
                + (p.a - w) * s.lambda_w.ln()
                + w * s.lambda_u().ln();
            Ok(-log + linear)
        }
    }
}

pub fn fixed_point<T: Scalar>(p: &GoodwinParams<T>, regime: Regime) -> GoodwinState<T> {
    match regime {
        Regime::Classical => GoodwinState::new(p.c / p.d, p.a / p.b),
        Regime::Regularized => {
            let four = T::lit(4.0);
            let w = p.omega;
            let s = (p.c + p.d - ((p.c - p.d).powi(2) + four * p.d * w).sqrt()) / (T::two() * p.d);
            let l = (p.a + p.b - ((p.a - p.b).powi(2) + four * p.b * w).sqrt()) / (T::two() * p.b);
            GoodwinState::new(s, l)
        }
    }
}

/// Deterministic orbit by RK4 (no clamping), `steps + 1` states.
pub fn deterministic_orbit<T: Scalar>(
    initial: GoodwinState<T>,
    p: &GoodwinParams<T>,
    regime: Regime,
    dt: T,
    steps: usize,
) -> Vec<GoodwinState<T>> {
    let f = |y: &[T]| {
        let s = GoodwinState::from_slice(y);
        let (ds, dl) = match regime {
            Regime::Classical => classical_drift(&s, p),
            Regime::Regularized => regularized_drift_unchecked(&s, p),
        };
        vec![ds, dl]
    };
    let mut out = Vec::with_capacity(steps + 1);
    let mut y = initial.to_vec();
    out.push(initial);
    for _ in 0..steps {
        y = rk4_step(&y, dt, f);
        out.push(GoodwinState::from_slice(&y));
    }
    out
}

/// Options controlling the stochastic simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodwinRun<T> {
    pub regime: Regime,
    /// Clamp band for regularized runs.
    pub clamp_eps: T,
}

impl<T: Scalar> GoodwinRun<T> {
    pub fn new(regime: Regime) -> Self {
        Self {
            regime,
            clamp_eps: T::lit(1e-9),
        }
    }
}

/// Euler-Maruyama paths; states are `[s_w, lambda_w]`.
pub fn simulate<T: Scalar>(
    initial: GoodwinState<T>,
    p: &GoodwinParams<T>,
    run: &GoodwinRun<T>,
    cfg: &SimConfig<T>,
) -> Result<Vec<PathRecord<T>>> {
    p.validate()?;
    let steps = cfg.steps()?;
    if run.regime == Regime::Regularized || p.sigma_s > T::zero() || p.sigma_lambda > T::zero() {
        initial.check_interior()?;
    }
    let paths = map_paths(cfg.seed, cfg.paths, |stream| {
        let mut rng = stream.rng();
        let mut rec = PathRecord::new(stream.stream_index);
        let mut s = initial;
        let sq = cfg.dt.sqrt();
        rec.push(T::zero(), s.to_vec());
        for k in 1..=steps {
            let (ds, dl) = match run.regime {
                Regime::Classical => classical_drift(&s, p),
                Regime::Regularized => regularized_drift_unchecked(&s, p),
            };
            let zs: T = standard_normal(&mut rng);
            let zl: T = standard_normal(&mut rng);
            let vol_s = p.sigma_s * (s.s_w * s.s_f()).max(T::zero()).sqrt();
            let vol_l = p.sigma_lambda * (s.lambda_w * s.lambda_u()).max(T::zero()).sqrt();
            s.s_w += ds * cfg.dt + vol_s * sq * zs;
            s.lambda_w += dl * cfg.dt + vol_l * sq * zl;
            if !s.s_w.is_finite() || !s.lambda_w.is_finite() {
                return Err(CircuitError::NonFinite {
                    component: if s.s_w.is_finite() { 1 } else { 0 },
                    step: k,
                });
            }
            if run.regime == Regime::Regularized {
                let c1 = clamp_unit(&mut s.s_w, run.clamp_eps);
                let c2 = clamp_unit(&mut s.lambda_w, run.clamp_eps);
                if c1 || c2 {
                    rec.clamped_steps += 1;
                }
            }
            rec.steps = k;
            if cfg.records(k, steps) {
                rec.push(T::from_usize(k).unwrap() * cfg.dt, s.to_vec());
            }
        }
        Ok(rec)
    });
    paths.into_iter().collect()
}
