//! Special functions and quadrature rules used by the analytic modules.
//!
//! These work in `f64` internally; generic callers convert at the boundary.

use std::f64::consts::{PI, SQRT_2};

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Exponentially scaled modified Bessel function of the first kind,
/// `exp(-z) * I_nu(z)`, for `nu >= 0` and `z >= 0`.
///
/// Uses the ascending series summed outward from its largest term, which
/// has no cancellation, and the large-argument Hankel expansion when
/// `z` is large compared with `nu^2`.
pub fn bessel_i_scaled(nu: f64, z: f64) -> f64 {
    assert!(nu >= 0.0 && z >= 0.0, "bessel_i_scaled: nu={nu}, z={z}");
    if z == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    if z >= 60.0 && 4.0 * nu * nu <= z {
        if let Some(v) = hankel_scaled(nu, z) {
            return v;
        }
    }
    series_scaled(nu, z)
}

/// `I_nu(z)` without scaling; overflows for large `z`.
pub fn bessel_i(nu: f64, z: f64) -> f64 {
    bessel_i_scaled(nu, z) * z.exp()
}

fn series_scaled(nu: f64, z: f64) -> f64 {
    const BIG: f64 = 1e250;
    let h = 0.5 * z;
    let h2 = h * h;
    let ln_t0 = nu * h.ln() - ln_gamma(nu + 1.0) - z;
    let ln_big = BIG.ln();
    let mut offset = 0.0;
    let mut t = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        t *= h2 / ((k + 1.0) * (k + nu + 1.0));
        k += 1.0;
        sum += t;
        if sum > BIG {
            sum /= BIG;
            t /= BIG;
            offset += ln_big;
        }
        if t < 1e-18 * sum {
            break;
        }
    }
    sum * (ln_t0 + offset).exp()
}

fn hankel_scaled(nu: f64, z: f64) -> Option<f64> {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term *= -(mu - odd * odd) / (kf * 8.0 * z);
        let a = term.abs();
        if a > prev {
            return None;
        }
        sum += term;
        if a < 1e-17 * sum.abs() {
            return Some(sum / (2.0 * PI * z).sqrt());
        }
        prev = a;
    }
    None
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp;
        loop {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss-Legendre rule on `[a, b]` with `panels` equal panels.
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    pub fn new(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let (gx, gw) = gauss_legendre(order);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let lo = a + h * p as f64;
            for (x, w) in gx.iter().zip(&gw) {
                nodes.push(lo + 0.5 * h * (x + 1.0));
                weights.push(0.5 * h * w);
            }
        }
        Self { nodes, weights }
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(7);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((s - 2.0 / 13.0).abs() < 1e-14);
    }

    #[test]
    fn normal_cdf_symmetry() {
        for x in [0.0, 0.3, 1.7, 4.0] {
            assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn bessel_half_order_closed_form() {
        // I_{1/2}(z) = sqrt(2/(pi z)) sinh z
        for z in [0.01, 0.5, 3.0, 20.0] {
            let exact = (2.0 / (PI * z)).sqrt() * z.sinh() * (-z).exp();
            let got = bessel_i_scaled(0.5, z);
            assert!((got - exact).abs() < 1e-14 * exact, "z={z} got={got:e} exact={exact:e}");
        }
    }
}
