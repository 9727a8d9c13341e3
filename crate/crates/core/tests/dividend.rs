use circuitlab_core::dividend_optimizer::*;
use circuitlab_core::special::CompositeRule;
use proptest::prelude::*;

fn fig12() -> EquityParams<f64> {
    EquityParams::fig12()
}

#[test]
fn printed_roots() {
    let roots = symbol_roots(&fig12()).unwrap();
    assert_eq!(roots.len(), 4);
    for (r, want) in roots.iter().zip([-4.08, -2.06, -0.84, 1.37]) {
        assert!((r - want).abs() <= 0.01, "{r} vs {want}");
    }
    // companion-matrix values of the cleared quartic
    for (r, want) in roots.iter().zip([-4.077_57, -2.058_80, -0.834_30, 1.370_67]) {
        assert!((r - want).abs() < 1e-5, "{r} vs {want}");
    }
    for r in &roots {
        assert!(symbol(*r, &fig12()).unwrap().abs() < 1e-12);
    }
}

#[test]
fn diffusion_only_roots_are_quadratic() {
    let mut p = fig12();
    p.lambda1 = 0.0;
    p.lambda2 = 0.0;
    let roots = symbol_roots(&p).unwrap();
    let (a2, a1, a0) = (p.sigma * p.sigma / 2.0, p.mu, -p.r);
    let disc = (a1 * a1 - 4.0 * a2 * a0).sqrt();
    assert!((roots[0] - (-a1 - disc) / (2.0 * a2)).abs() < 1e-12);
    assert!((roots[1] - (-a1 + disc) / (2.0 * a2)).abs() < 1e-12);
}

#[test]
fn one_jump_source_gives_three_roots() {
    let mut p = fig12();
    p.lambda2 = 0.0;
    let roots = symbol_roots(&p).unwrap();
    assert_eq!(roots.len(), 3);
    let b = stationary_barrier(&p).unwrap();
    assert!(b.pasting_residual() < 1e-10);
}

#[test]
fn barrier_and_pasting() {
    let b = stationary_barrier(&fig12()).unwrap();
    assert!((b.e_star - 0.309_770_794_587_295).abs() < 1e-9, "{}", b.e_star);
    assert!(b.pasting_residual() < 1e-10);
    assert!((b.value(b.e_star) - 0.335_39).abs() < 1e-5);
    let want = [-0.117_894_33, -0.149_069_97, -0.051_968_14, 0.318_932_44];
    for (c, w) in b.coefficients.iter().zip(want) {
        assert!((c - w).abs() < 1e-7);
    }
    // continuation region solves the stationary equation
    let p = fig12();
    let e = 0.7 * b.e_star;
    let a2 = p.sigma * p.sigma / 2.0;
    let rule = CompositeRule::new(0.0, e, 16, 10);
    let jumps = |d: f64| d * rule.integrate(|j| b.value(j) * (-d * (e - j)).exp());
    let l = a2 * b.value_ee(e) + p.mu * b.value_e(e) - (p.r + p.lambda1 + p.lambda2) * b.value(e)
        + p.lambda1 * jumps(p.delta1)
        + p.lambda2 * jumps(p.delta2);
    assert!(l.abs() < 1e-12, "{l}");
}

#[test]
fn barrier_rises_with_volatility() {
    let mut last = 0.0;
    for sigma in [0.15, 0.2, 0.25, 0.3, 0.4, 0.5] {
        let mut p = fig12();
        p.sigma = sigma;
        let e = stationary_barrier(&p).unwrap().e_star;
        assert!(e > last, "sigma {sigma}: {e} <= {last}");
        last = e;
    }
}

#[test]
fn jump_integral_matches_quadrature() {
    let h = 0.01;
    let v: Vec<f64> = (0..=300).map(|k| {
        let e = k as f64 * h;
        e + 0.3 * (3.0 * e).sin()
    }).collect();
    let delta = 2.5;
    let fast = jump_integral(&v, h, delta);
    let interp = |x: f64| {
        let k = ((x / h).floor() as usize).min(v.len() - 2);
        let w = x / h - k as f64;
        v[k] * (1.0 - w) + v[k + 1] * w
    };
    for k in [1, 17, 150, 300] {
        let ek = k as f64 * h;
        let mut direct = 0.0;
        for c in 0..k {
            let rule = CompositeRule::new(c as f64 * h, (c + 1) as f64 * h, 1, 8);
            direct += rule.integrate(|j| delta * interp(j) * (-delta * (ek - j)).exp());
        }
        assert!((fast[k] - direct).abs() < 1e-10, "{k}: {} vs {direct}", fast[k]);
    }
}

#[test]
fn time_dependent_converges_to_stationary() {
    let p = fig12();
    let b = stationary_barrier(&p).unwrap();
    let mut grid = VariationalGrid::new(10.0 * b.e_star, 2000, 0.01, 150.0);
    grid.record_at = vec![1.0, 5.0, 20.0, 60.0];
    let sol = solve_variational(&p, &grid).unwrap();
    let worst = sol
        .e
        .iter()
        .zip(sol.last())
        .map(|(&e, &v)| (v - b.value(e)).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-3, "{worst}");
    let h = sol.e[1];
    for slice in &sol.values {
        for k in 0..slice.len() {
            assert!(slice[k] >= sol.e[k]);
            if k > 0 {
                assert!((slice[k] - slice[k - 1]) / h >= 1.0 - 1e-8);
            }
        }
    }
    // V - E is flat to third order at the barrier, so its discrete argmax is
    // only located to within a few percent
    let fb_last = *sol.free_boundary.last().unwrap();
    assert!((fb_last - b.e_star).abs() < 0.02, "{fb_last}");
    for w in sol.free_boundary.windows(2) {
        assert!(w[1] >= w[0] - h);
    }
}

#[test]
fn diffusion_only_excess_grows_with_maturity() {
    let mut p = fig12();
    p.lambda1 = 0.0;
    p.lambda2 = 0.0;
    let mut grid = VariationalGrid::new(4.0, 400, 0.01, 40.0);
    grid.record_at = (1..40).map(|k| k as f64).collect();
    let sol = solve_variational(&p, &grid).unwrap();
    for w in sol.values.windows(2) {
        for k in 0..sol.e.len() {
            assert!(w[1][k] >= w[0][k] - 1e-12);
        }
    }
    let b = stationary_barrier(&p).unwrap();
    let worst = sol.e.iter().zip(sol.last()).map(|(&e, &v)| (v - b.value(e)).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-3, "{worst}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn symbol_at_origin(mu in -0.2..0.2f64, sigma in 0.05..1.0f64, r in 0.01..0.5f64,
                        l1 in 0.0..0.5f64, l2 in 0.0..0.5f64, d1 in 0.2..5.0f64, d2 in 0.2..5.0f64) {
        let p = EquityParams { mu, sigma, r, lambda1: l1, lambda2: l2, delta1: d1, delta2: d2 };
        prop_assert_eq!(symbol(0.0, &p).unwrap(), -r);
    }

    #[test]
    fn polished_roots_have_small_residual(mu in -0.2..0.2f64, sigma in 0.05..1.0f64, r in 0.01..0.5f64,
                                          l1 in 0.001..0.5f64, l2 in 0.001..0.5f64, d1 in 0.2..5.0f64, d2 in 0.2..5.0f64) {
        let p = EquityParams { mu, sigma, r, lambda1: l1, lambda2: l2, delta1: d1, delta2: d2 };
        let roots = symbol_roots(&p).unwrap();
        prop_assert_eq!(roots.len(), if (d1 - d2).abs() < 1e-15 { 3 } else { 4 });
        for x in roots {
            let scale = 1.0 + x * x * p.sigma * p.sigma;
            prop_assert!(symbol(x, &p).unwrap().abs() < 1e-10 * scale, "{x}");
        }
    }
}
