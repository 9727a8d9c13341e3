//! Keen's extension of the Goodwin pair with firm leverage `Gamma_f = D_f / K_f`.
//!
//! Investment is an increasing function of the profit share net of interest,
//! `f(s_f - r_L Gamma_f / nu_f)`. The regularized version confines
//! `(s_w, lambda_w)` to the unit square; leverage is left free and a run is
//! cut short (a "Minsky event") once it exceeds a threshold.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, CircuitError, Result};
use crate::goodwin::{GoodwinState, Regime};
use crate::scalar::Scalar;
use crate::stochastic_engine::{clamp_unit, map_paths, standard_normal, PathRecord, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InvestmentFunction<T> {
    /// `p + exp(q x + r)`
    Exponential { p: T, q: T, r: T },
    /// `f(x) = x`, used to recover the Goodwin model.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "T: Scalar"))]
pub struct KeenParams<T: Scalar> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
    pub r_l: T,
    pub nu_f: T,
    pub investment: InvestmentFunction<T>,
    #[serde(default)]
    pub omega: T,
    #[serde(default)]
    pub sigma_s: T,
    #[serde(default)]
    pub sigma_lambda: T,
    /// Cap on the exponent `q x + r`.
    #[serde(default = "default_exp_cap")]
    pub exp_cap: T,
}

fn default_exp_cap<T: Scalar>() -> T {
    T::lit(700.0)
}

impl<T: Scalar> KeenParams<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(a: T, b: T, c: T, d: T, r_l: T, nu_f: T, p: T, q: T, r: T) -> Self {
        Self {
            a,
            b,
            c,
            d,
            r_l,
            nu_f,
            investment: InvestmentFunction::Exponential { p, q, r },
            omega: T::zero(),
            sigma_s: T::zero(),
            sigma_lambda: T::zero(),
            exp_cap: default_exp_cap(),
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

    pub fn validate(&self) -> Result<()> {
        if !(self.nu_f > T::zero()) {
            return Err(invalid("nu_f", "must be positive"));
        }
        if let InvestmentFunction::Exponential { q, .. } = self.investment {
            if q < T::zero() {
                return Err(invalid("q", "investment function must be non-decreasing"));
            }
        }
        if self.omega < T::zero() || self.sigma_s < T::zero() || self.sigma_lambda < T::zero() {
            return Err(invalid("omega/sigma", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeenState<T> {
    pub s_w: T,
    pub lambda_w: T,
    pub gamma_f: T,
}

impl<T: Scalar> KeenState<T> {
    pub fn new(s_w: T, lambda_w: T, gamma_f: T) -> Self {
        Self {
            s_w,
            lambda_w,
            gamma_f,
        }
    }

    pub fn to_vec(self) -> Vec<T> {
        vec![self.s_w, self.lambda_w, self.gamma_f]
    }

    fn pair(&self) -> GoodwinState<T> {
        GoodwinState::new(self.s_w, self.lambda_w)
    }
}

/// Investment function `f(x)`. Returns the value and whether the exponent was capped.
pub fn profit_function<T: Scalar>(x: T, p: &KeenParams<T>) -> (T, bool) {
    match p.investment {
        InvestmentFunction::Identity => (x, false),
        InvestmentFunction::Exponential { p: pp, q, r } => {
            let arg = q * x + r;
            if arg > p.exp_cap {
                log::warn!("investment exponent {arg} capped at {}", p.exp_cap);
                (pp + p.exp_cap.exp(), true)
            } else {
                (pp + arg.exp(), false)
            }
        }
    }
}

/// Drift of `(s_w, lambda_w, Gamma_f)`.
///
/// `with_nu_factor` selects `nu_f f(.)` rather than `f(.)` in the employment
/// drift of the regularized system; the classical system always uses `nu_f f(.)`.
pub fn keen_drift<T: Scalar>(
    s: &KeenState<T>,
    p: &KeenParams<T>,
    regime: Regime,
    with_nu_factor: bool,
) -> Result<[T; 3]> {
    if regime == Regime::Regularized {
        s.pair().check_interior()?;
    }
    Ok(drift_unchecked(s, p, regime, with_nu_factor))
}

fn drift_unchecked<T: Scalar>(s: &KeenState<T>, p: &KeenParams<T>, regime: Regime, with_nu_factor: bool) -> [T; 3] {
    let s_f = T::one() - s.s_w;
    let lambda_u = T::one() - s.lambda_w;
    let (f, _) = profit_function(s_f - p.r_l * s.gamma_f / p.nu_f, p);
    let (ds, dl) = match regime {
        Regime::Classical => (
            -(p.a - p.b * s.lambda_w) * s.s_w,
            (p.nu_f * f - p.c) * s.lambda_w,
        ),
        Regime::Regularized => {
            let inv = if with_nu_factor { p.nu_f * f } else { f };
            (
                -(p.a - p.b * s.lambda_w - p.omega / lambda_u) * s.s_w,
                (inv - p.c - p.omega / s_f) * s.lambda_w,
            )
        }
    };
    let dg = (p.r_l - p.nu_f * f + p.d) * s.gamma_f + p.nu_f * (f - s_f);
    [ds, dl, dg]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeenRun<T> {
    pub regime: Regime,
    pub with_nu_factor: bool,
    pub clamp_eps: T,
    /// Leverage level that ends a path early.
    pub minsky_threshold: T,
}

impl<T: Scalar> KeenRun<T> {
    pub fn new(regime: Regime) -> Self {
        Self {
            regime,
            with_nu_factor: true,
            clamp_eps: T::lit(1e-9),
            minsky_threshold: T::lit(10.0),
        }
    }
}

/// Euler-Maruyama paths; states are `[s_w, lambda_w, Gamma_f]`.
/// `stopped_at` carries the Minsky-event time when leverage crossed the threshold.
pub fn simulate<T: Scalar>(
    initial: KeenState<T>,
    p: &KeenParams<T>,
    run: &KeenRun<T>,
    cfg: &SimConfig<T>,
) -> Result<Vec<PathRecord<T>>> {
    p.validate()?;
    let steps = cfg.steps()?;
    if run.regime == Regime::Regularized || p.sigma_s > T::zero() || p.sigma_lambda > T::zero() {
        initial.pair().check_interior()?;
    }
    let paths = map_paths(cfg.seed, cfg.paths, |stream| {
        let mut rng = stream.rng();
        let mut rec = PathRecord::new(stream.stream_index);
        let mut s = initial;
        let sq = cfg.dt.sqrt();
        rec.push(T::zero(), s.to_vec());
        for k in 1..=steps {
            let [ds, dl, dg] = drift_unchecked(&s, p, run.regime, run.with_nu_factor);
            let zs: T = standard_normal(&mut rng);
            let zl: T = standard_normal(&mut rng);
            let vol_s = p.sigma_s * (s.s_w * (T::one() - s.s_w)).max(T::zero()).sqrt();
            let vol_l = p.sigma_lambda * (s.lambda_w * (T::one() - s.lambda_w)).max(T::zero()).sqrt();
            s.s_w += ds * cfg.dt + vol_s * sq * zs;
            s.lambda_w += dl * cfg.dt + vol_l * sq * zl;
            s.gamma_f += dg * cfg.dt;
            if let Some(c) = s.to_vec().iter().position(|v| !v.is_finite()) {
                return Err(CircuitError::NonFinite { component: c, step: k });
            }
            if run.regime == Regime::Regularized {
                let c1 = clamp_unit(&mut s.s_w, run.clamp_eps);
                let c2 = clamp_unit(&mut s.lambda_w, run.clamp_eps);
                if c1 || c2 {
                    rec.clamped_steps += 1;
                }
            }
            rec.steps = k;
            let t = T::from_usize(k).unwrap() * cfg.dt;
            if s.gamma_f > run.minsky_threshold {
                rec.push(t, s.to_vec());
                rec.stopped_at = Some(t);
                break;
            }
            if cfg.records(k, steps) {
                rec.push(t, s.to_vec());
            }
        }
        Ok(rec)
    });
    paths.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::goodwin::{classical_drift, GoodwinParams};

    fn fig4() -> KeenParams<f64> {
        KeenParams::new(0.225, 0.20, 0.075, 0.03, 0.03, 0.1, -0.0065, 20.0, -5.0)
    }

    #[test]
    fn investment_function_at_quarter() {
        let (f, capped) = profit_function(0.25, &fig4());
        assert!((f - 0.9935).abs() < 1e-15);
        assert!(!capped);
    }

    #[test]
    fn flat_investment_function() {
        let mut p = fig4();
        p.investment = InvestmentFunction::Exponential { p: 0.1, q: 0.0, r: -1.0 };
        assert_eq!(profit_function(3.0, &p).0, 0.1 + (-1.0f64).exp());
    }

    #[test]
    fn exponent_is_capped() {
        let (f, capped) = profit_function(1e6, &fig4());
        assert!(capped && f.is_finite());
    }

    #[test]
    fn leverage_free_gamma_drift() {
        let p = fig4();
        let s = KeenState::new(0.6, 0.7, 0.0);
        let [_, _, dg] = keen_drift(&s, &p, Regime::Classical, true).unwrap();
        let f = profit_function(0.4, &p).0;
        assert!((dg - 0.1 * (f - 0.4)).abs() < 1e-15);
    }

    #[test]
    fn regularized_with_zero_omega_equals_classical() {
        let p = fig4();
        let s = KeenState::new(0.75, 0.8, 0.1);
        assert_eq!(
            keen_drift(&s, &p, Regime::Classical, true).unwrap(),
            keen_drift(&s, &p, Regime::Regularized, true).unwrap()
        );
    }

    #[test]
    fn identity_investment_recovers_goodwin() {
        let (alpha_sum, nu_f): (f64, f64) = (0.05, 0.6);
        let mut p = KeenParams::new(0.225, 0.2, alpha_sum, 0.01, 0.0, nu_f, 0.0, 0.0, 0.0);
        p.investment = InvestmentFunction::Identity;
        let g = GoodwinParams::classical(0.225, 0.2, nu_f - alpha_sum, nu_f);
        for &(sw, lw) in &[(0.2, 0.3), (0.75, 0.95), (0.5, 1.2)] {
            let [ds, dl, _] = keen_drift(&KeenState::new(sw, lw, 0.0), &p, Regime::Classical, true).unwrap();
            let (gs, gl): (f64, f64) = classical_drift(&GoodwinState::new(sw, lw), &g);
            assert!((ds - gs).abs() < 1e-15 && (dl - gl).abs() < 1e-15);
        }
    }
}
