//! Seeded random drivers and the Euler-Maruyama step shared by the simulators.
//!
//! Every path draws from its own ChaCha stream keyed by `(master_seed, path)`,
//! so results do not depend on how paths are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CircuitError, Result};
use crate::linalg::cholesky;
use crate::scalar::Scalar;

pub type PathRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    pub fn rng(&self) -> PathRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// Runs `f` once per path index and returns results in path order.
pub fn map_paths<R, F>(master_seed: u64, paths: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(RngStream) -> R + Sync + Send,
{
    (0..paths as u64)
        .into_par_iter()
        .map(|p| f(RngStream::new(master_seed, p)))
        .collect()
}

pub fn standard_normal<T: Scalar>(rng: &mut impl Rng) -> T {
    let z: f64 = StandardNormal.sample(rng);
    T::lit(z)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "Vec<Vec<T>>",
    into = "Vec<Vec<T>>",
    bound = "T: Scalar"
)]
pub struct CorrelationMatrix<T> {
    rho: Vec<Vec<T>>,
    chol: Vec<Vec<T>>,
}

impl<T: Scalar> TryFrom<Vec<Vec<T>>> for CorrelationMatrix<T> {
    type Error = CircuitError;
    fn try_from(rho: Vec<Vec<T>>) -> Result<Self> {
        Self::new(rho)
    }
}

impl<T> From<CorrelationMatrix<T>> for Vec<Vec<T>> {
    fn from(c: CorrelationMatrix<T>) -> Self {
        c.rho
    }
}

impl<T: Scalar> CorrelationMatrix<T> {
    pub fn new(rho: Vec<Vec<T>>) -> Result<Self> {
        let n = rho.len();
        let tol = T::lit(1e-12);
        for (i, row) in rho.iter().enumerate() {
            if row.len() != n {
                return Err(invalid("rho", "matrix is not square"));
            }
            if (row[i] - T::one()).abs() > tol {
                return Err(invalid("rho", format!("diagonal entry {i} is {}", row[i])));
            }
            for j in 0..i {
                if (row[j] - rho[j][i]).abs() > tol {
                    return Err(invalid("rho", format!("entries ({i},{j}) and ({j},{i}) differ")));
                }
                if row[j].abs() > T::one() + tol {
                    return Err(invalid("rho", format!("|rho[{i}][{j}]| > 1")));
                }
            }
        }
        let chol = cholesky(&rho, T::lit(1e-12))?;
        Ok(Self { rho, chol })
    }

    pub fn identity(n: usize) -> Self {
        let rho: Vec<Vec<T>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect())
            .collect();
        Self {
            chol: rho.clone(),
            rho,
        }
    }

    /// Two factors with correlation `rho`.
    pub fn pair(rho: T) -> Result<Self> {
        Self::new(vec![vec![T::one(), rho], vec![rho, T::one()]])
    }

    pub fn dim(&self) -> usize {
        self.rho.len()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.rho[i][j]
    }

    pub fn matrix(&self) -> &[Vec<T>] {
        &self.rho
    }

    pub fn cholesky_factor(&self) -> &[Vec<T>] {
        &self.chol
    }

    /// Principal submatrix on `keep` (already PSD, so the factor is recomputed without checks failing).
    pub fn restrict(&self, keep: &[usize]) -> Self {
        let rho: Vec<Vec<T>> = keep
            .iter()
            .map(|&i| keep.iter().map(|&j| self.rho[i][j]).collect())
            .collect();
        let chol = cholesky(&rho, T::lit(1e-10)).expect("principal submatrix of a PSD matrix");
        Self { rho, chol }
    }
}

/// Correlated normal increments with covariance `rho * dt`.
pub fn gaussian_increments<T: Scalar>(
    rng: &mut impl Rng,
    corr: &CorrelationMatrix<T>,
    dt: T,
) -> Result<Vec<T>> {
    if !(dt > T::zero()) {
        return Err(invalid("dt", "must be positive"));
    }
    let n = corr.dim();
    let z: Vec<T> = (0..n).map(|_| standard_normal(rng)).collect();
    let sq = dt.sqrt();
    let l = corr.cholesky_factor();
    Ok((0..n)
        .map(|i| (0..=i).fold(T::zero(), |s, k| s + l[i][k] * z[k]) * sq)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpSubset<T> {
    pub members: Vec<usize>,
    pub intensity: T,
}

/// Marshall-Olkin common-shock jumps with negative-exponential log amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpSpec<T> {
    pub subsets: Vec<JumpSubset<T>>,
    /// Per-bank decay `theta_i` of the amplitude density `theta e^{theta j}`, `j <= 0`.
    pub decay: Vec<T>,
}

impl<T: Scalar> JumpSpec<T> {
    pub fn new(subsets: Vec<JumpSubset<T>>, decay: Vec<T>) -> Result<Self> {
        let spec = Self { subsets, decay };
        spec.validate()?;
        Ok(spec)
    }

    pub fn none(n: usize) -> Self {
        Self {
            subsets: Vec::new(),
            decay: vec![T::one(); n],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.decay.len();
        if self.decay.iter().any(|&d| !(d > T::zero())) {
            return Err(invalid("decay", "every theta_i must be positive"));
        }
        for s in &self.subsets {
            if s.intensity < T::zero() || !s.intensity.is_finite() {
                return Err(invalid("intensity", format!("{} is negative", s.intensity)));
            }
            if s.members.is_empty() || s.members.iter().any(|&m| m >= n) {
                return Err(invalid("members", format!("bad subset {:?}", s.members)));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.decay.len()
    }

    /// `kappa_i = E[e^J - 1] = -1/(theta_i + 1)`.
    pub fn compensator(&self, i: usize) -> T {
        -T::one() / (self.decay[i] + T::one())
    }

    /// Per-bank intensity `lambda_i = sum over subsets containing i`.
    pub fn bank_intensity(&self, i: usize) -> T {
        self.subsets
            .iter()
            .filter(|s| s.members.contains(&i))
            .fold(T::zero(), |acc, s| acc + s.intensity)
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.iter().all(|s| s.intensity == T::zero())
    }

    pub fn sample_amplitude(&self, rng: &mut impl Rng, i: usize) -> T {
        let e: f64 = Exp::new(self.decay[i].to64()).expect("positive decay").sample(rng);
        T::lit(-e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpDraw<T> {
    pub counts: Vec<u32>,
    /// Sum of the log amplitudes `J` received by each bank during the step.
    pub log_jump: Vec<T>,
}

pub fn marshall_olkin_arrivals<T: Scalar>(
    rng: &mut impl Rng,
    spec: &JumpSpec<T>,
    dt: T,
) -> JumpDraw<T> {
    let n = spec.dim();
    let mut counts = vec![0u32; n];
    let mut log_jump = vec![T::zero(); n];
    for s in &spec.subsets {
        let mean = (s.intensity * dt).to64();
        if mean <= 0.0 {
            continue;
        }
        let k: f64 = Poisson::new(mean).expect("positive mean").sample(rng);
        for _ in 0..k as u64 {
            for &i in &s.members {
                counts[i] += 1;
                log_jump[i] += spec.sample_amplitude(rng, i);
            }
        }
    }
    JumpDraw { counts, log_jump }
}

/// One Euler-Maruyama step: `state + drift dt + diffusion dw + jumps`.
///
/// `diffusion[i]` holds component `i`'s loadings on the increments `dw`.
pub fn euler_step<T: Scalar>(
    state: &[T],
    drift: &[T],
    diffusion: &[Vec<T>],
    dw: &[T],
    jumps: Option<&[T]>,
    dt: T,
) -> Result<Vec<T>> {
    if !(dt > T::zero()) {
        return Err(invalid("dt", "must be positive"));
    }
    let mut next = Vec::with_capacity(state.len());
    for i in 0..state.len() {
        let mut x = state[i] + drift[i] * dt;
        if let Some(row) = diffusion.get(i) {
            for (l, w) in row.iter().zip(dw) {
                x += *l * *w;
            }
        }
        if let Some(j) = jumps {
            x += j[i];
        }
        if !x.is_finite() || !state[i].is_finite() || !drift[i].is_finite() {
            return Err(CircuitError::NonFinite {
                component: i,
                step: 0,
            });
        }
        next.push(x);
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_stream_same_draws() {
        let mut a = RngStream::new(7, 3).rng();
        let mut b = RngStream::new(7, 3).rng();
        let mut c = RngStream::new(7, 4).rng();
        let xa: Vec<u64> = (0..5).map(|_| a.random()).collect();
        let xb: Vec<u64> = (0..5).map(|_| b.random()).collect();
        let xc: Vec<u64> = (0..5).map(|_| c.random()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn euler_identity_and_forced_drift() {
        let s = [1.0, 2.0];
        let none: Vec<Vec<f64>> = vec![];
        assert_eq!(euler_step(&s, &[0.0, 0.0], &none, &[], None, 0.1).unwrap(), s);
        assert_eq!(euler_step(&s, &[0.5, -1.0], &none, &[], None, 0.5).unwrap(), vec![1.25, 1.5]);
    }

    #[test]
    fn euler_flags_non_finite_component() {
        let err = euler_step(&[1.0, f64::NAN], &[0.0, 0.0], &[], &[], None, 0.1).unwrap_err();
        assert_eq!(err, CircuitError::NonFinite { component: 1, step: 0 });
    }

    #[test]
    fn compensator_closed_form() {
        let spec = JumpSpec::new(vec![], vec![3.0f64]).unwrap();
        assert_eq!(spec.compensator(0), -0.25);
    }

    #[test]
    fn negative_intensity_rejected() {
        let s = vec![JumpSubset { members: vec![0], intensity: -0.1 }];
        assert!(JumpSpec::new(s, vec![1.0f64]).is_err());
    }
}

/// Time grid and path count for a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig<T> {
    pub horizon: T,
    pub dt: T,
    pub paths: usize,
    pub seed: u64,
    /// Keep every `record_every`-th step (the final step is always kept).
    pub record_every: usize,
}

impl<T: Scalar> SimConfig<T> {
    pub fn new(horizon: T, dt: T, paths: usize, seed: u64) -> Self {
        Self {
            horizon,
            dt,
            paths,
            seed,
            record_every: 1,
        }
    }

    pub fn with_record_every(mut self, k: usize) -> Self {
        self.record_every = k.max(1);
        self
    }

    /// Number of steps, validating the grid.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(invalid("dt", "must be positive"));
        }
        if !(self.horizon > T::zero()) || !self.horizon.is_finite() {
            return Err(invalid("horizon", "must be positive"));
        }
        Ok((self.horizon / self.dt).round().to_usize().unwrap_or(0).max(1))
    }

    pub fn records(&self, step: usize, total: usize) -> bool {
        step % self.record_every == 0 || step == total
    }
}

/// One simulated path: recorded times and state vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord<T> {
    pub path: u64,
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    pub steps: usize,
    /// Steps after which at least one component was clamped.
    pub clamped_steps: usize,
    /// Set when the path terminated before the horizon.
    pub stopped_at: Option<T>,
}

impl<T: Scalar> PathRecord<T> {
    pub fn new(path: u64) -> Self {
        Self {
            path,
            times: Vec::new(),
            states: Vec::new(),
            steps: 0,
            clamped_steps: 0,
            stopped_at: None,
        }
    }

    pub fn push(&mut self, t: T, state: Vec<T>) {
        self.times.push(t);
        self.states.push(state);
    }

    pub fn last(&self) -> &[T] {
        self.states.last().map(|s| s.as_slice()).unwrap_or(&[])
    }

    /// Largest recorded value of component `i`.
    pub fn max_of(&self, i: usize) -> T {
        self.states.iter().fold(T::neg_infinity(), |m, s| m.max(s[i]))
    }

    pub fn min_of(&self, i: usize) -> T {
        self.states.iter().fold(T::infinity(), |m, s| m.min(s[i]))
    }
}

/// Fraction of executed steps that needed clamping, over all paths.
pub fn clamp_rate<T: Scalar>(paths: &[PathRecord<T>]) -> f64 {
    let steps: usize = paths.iter().map(|p| p.steps).sum();
    let clamped: usize = paths.iter().map(|p| p.clamped_steps).sum();
    if steps == 0 {
        0.0
    } else {
        clamped as f64 / steps as f64
    }
}

/// Clamps `x` into `[eps, 1 - eps]`, returning whether it moved.
pub fn clamp_unit<T: Scalar>(x: &mut T, eps: T) -> bool {
    let lo = eps;
    let hi = T::one() - eps;
    if *x < lo || x.is_nan() {
        *x = lo;
        true
    } else if *x > hi {
        *x = hi;
        true
    } else {
        false
    }
}

/// Classical fourth-order Runge-Kutta step for deterministic reference orbits.
pub fn rk4_step<T: Scalar>(y: &[T], h: T, f: impl Fn(&[T]) -> Vec<T>) -> Vec<T> {
    let add = |a: &[T], b: &[T], s: T| -> Vec<T> { a.iter().zip(b).map(|(&x, &k)| x + s * k).collect() };
    let half = h * T::half();
    let k1 = f(y);
    let k2 = f(&add(y, &k1, half));
    let k3 = f(&add(y, &k2, half));
    let k4 = f(&add(y, &k3, h));
    let six = T::lit(6.0);
    (0..y.len())
        .map(|i| y[i] + h / six * (k1[i] + T::two() * (k2[i] + k3[i]) + k4[i]))
        .collect()
}
