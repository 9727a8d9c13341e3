use circuitlab_core::banking_network::BankNetwork;
use circuitlab_core::special::{normal_cdf, normal_pdf};
use circuitlab_core::wedge_analytics::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const N_TERMS: usize = 20_000;

/// Density of a Brownian motion with drift `xi` killed at zero.
fn image_1d(t: f64, x: f64, xp: f64, xi: f64) -> f64 {
    let s = t.sqrt();
    (normal_pdf((x - xp - xi * t) / s) - (-2.0 * xi * xp).exp() * normal_pdf((x + xp - xi * t) / s)) / s
}

/// First-passage density through zero from `xp`.
fn passage_1d(t: f64, xp: f64, xi: f64) -> f64 {
    xp / (2.0 * std::f64::consts::PI * t * t * t).sqrt() * (-(xp + xi * t).powi(2) / (2.0 * t)).exp()
}

fn fig16() -> WedgeContext<f64> {
    WedgeContext::new(0.0, [-0.5, -0.5]).unwrap()
}

#[test]
fn uncorrelated_wedge_is_a_right_angle() {
    let ctx = fig16();
    assert!((ctx.varpi - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    for n in 1..20 {
        assert!((ctx.nu(n) - 2.0 * n as f64).abs() < 1e-12);
    }
    // positive correlation opens the wedge, negative closes it
    assert!(WedgeContext::new(0.5, [0.0, 0.0]).unwrap().varpi > std::f64::consts::FRAC_PI_2);
    assert!(WedgeContext::new(-0.9, [0.0, 0.0]).unwrap().varpi < 0.5);
    for rho in [-0.7, -0.2, 0.3, 0.8] {
        let c = WedgeContext::new(rho, [0.0, 0.0]).unwrap();
        assert!(c.nu(3) > 3.0 * (1.0 - 1e-12) * 1.0);
        let (_, phi) = c.polar([1.3, 0.4]);
        assert!(phi > 0.0 && phi < c.varpi);
    }
    assert!(WedgeContext::new(1.0, [0.0, 0.0]).is_err());
}

#[test]
fn green_matches_images_without_correlation() {
    for (xi, t) in [([0.0, 0.0], 1.0), ([-0.5, -0.5], 2.0), ([0.3, -0.8], 0.3), ([-0.5, -0.5], 0.05)] {
        let ctx = WedgeContext::new(0.0, xi).unwrap();
        for xp in [[1.0, 0.5], [2.0, 3.0], [0.2, 4.0]] {
            for x in [[0.5, 0.5], [1.0, 2.0], [3.0, 0.1], [2.2, 3.3], [0.05, 4.0]] {
                let g = wedge_green(t, x, xp, &ctx, N_TERMS).unwrap();
                let want = image_1d(t, x[0], xp[0], xi[0]) * image_1d(t, x[1], xp[1], xi[1]);
                assert!((g - want).abs() < 1e-10, "t={t} x={x:?} xp={xp:?}: {g} vs {want}");
            }
        }
    }
}

#[test]
fn flux_matches_images_without_correlation() {
    for (xi, t) in [([0.0, 0.0], 1.0), ([-0.5, -0.5], 2.0), ([0.3, -0.8], 0.3), ([-0.5, -0.5], 0.02)] {
        let ctx = WedgeContext::new(0.0, xi).unwrap();
        for xp in [[1.0, 0.5], [2.0, 3.0], [0.3, 0.4]] {
            for y in [0.1, 0.5, 1.0, 2.5, 4.0] {
                let g2 = boundary_flux(t, y, xp, 1, &ctx, N_TERMS).unwrap();
                let want2 = image_1d(t, y, xp[0], xi[0]) * passage_1d(t, xp[1], xi[1]);
                assert!((g2 - want2).abs() < 1e-8, "{g2} vs {want2}");
                let g1 = boundary_flux(t, y, xp, 0, &ctx, N_TERMS).unwrap();
                let want1 = image_1d(t, y, xp[1], xi[1]) * passage_1d(t, xp[0], xi[0]);
                assert!((g1 - want1).abs() < 1e-8, "{g1} vs {want1}");
                assert!(g1 >= 0.0 && g2 >= 0.0);
            }
        }
    }
}

#[test]
fn swapping_banks_is_a_symmetry() {
    let ctx = WedgeContext::<f64>::new(0.35, [-0.2, 0.4]).unwrap();
    let sw = ctx.swapped();
    for (x, xp) in [([1.0, 2.0], [0.5, 1.5]), ([2.5, 0.3], [1.0, 1.0])] {
        let a = wedge_green(0.7, x, xp, &ctx, N_TERMS).unwrap();
        let b = wedge_green(0.7, [x[1], x[0]], [xp[1], xp[0]], &sw, N_TERMS).unwrap();
        assert!((a - b).abs() < 1e-12 * a.abs().max(1e-3), "{a} vs {b}");
    }
    let a = boundary_flux(0.9, 1.4, [0.8, 1.1], 1, &ctx, N_TERMS).unwrap();
    let b = boundary_flux(0.9, 1.4, [1.1, 0.8], 0, &sw, N_TERMS).unwrap();
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn correlated_flux_is_nonnegative_and_hybrid_joins_smoothly() {
    for rho in [-0.6, 0.4] {
        let ctx = WedgeContext::new(rho, [-0.5, -0.5]).unwrap();
        for s in [0.002, 0.01, 0.2, 1.0, 3.0] {
            for y in [0.2, 1.0, 2.0, 3.5, 6.0] {
                let g = boundary_flux(s, y, [4.0, 0.5], 1, &ctx, N_TERMS).unwrap();
                assert!(g >= -1e-14, "rho={rho} s={s} y={y}: {g}");
            }
        }
    }
}

#[test]
fn conservation_of_probability() {
    let q = QuadratureSpec::default();
    for ctx in [fig16(), WedgeContext::new(0.3, [-0.4, -0.6]).unwrap()] {
        for t in [0.5, 1.0, 5.0] {
            let xp = [2.0, 1.5];
            let mass = interior_mass(&ctx, xp, t, &q).unwrap();
            let out = cumulative_flux(&ctx, xp, t, 0, &q).unwrap() + cumulative_flux(&ctx, xp, t, 1, &q).unwrap();
            assert!(mass <= 1.0);
            assert!((mass + out - 1.0).abs() < 1e-6, "rho={} t={t}: {mass} + {out}", ctx.rho);
        }
    }
}

fn fig15_problem(x: [f64; 2]) -> TwoBankProblem<f64> {
    let assets = [4.0 * x[0].exp(), 22.0 * x[1].exp()];
    TwoBankProblem::new(&BankNetwork::fig15(assets, [0.4, 0.4], 0.0).unwrap()).unwrap()
}

#[test]
fn terminal_domain_endpoints() {
    let p = fig15_problem([2.0, 2.0]);
    let d = &p.domains;
    assert!((d.delta - 4600.0).abs() < 1e-12);
    assert!((d.m_terminal(0) - 10f64.ln()).abs() < 1e-12);
    assert!((d.m_terminal(1) - (70.0f64 / 22.0).ln()).abs() < 1e-12);
    assert!((d.theta(0, 0.0) - 13f64.ln()).abs() < 1e-12);
    assert!((d.m_interior_after(0) - 5.2f64.ln()).abs() < 1e-12);
    assert!((p.scaled_time(12.5) - 2.0).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let l = [rng.random_range(10.0..100.0), rng.random_range(10.0..100.0)];
        let m = [rng.random_range(0.0..30.0), rng.random_range(0.0..30.0)];
        let r = [rng.random_range(0.3..1.0), rng.random_range(0.3..1.0)];
        let net = BankNetwork {
            external_assets: vec![1e4, 1e4],
            external_liabilities: l.to_vec(),
            mutual: vec![vec![0.0, m[0]], vec![m[1], 0.0]],
            recoveries: r.to_vec(),
            vols: vec![rng.random_range(0.1..0.6), rng.random_range(0.1..0.6)],
            mu: 0.0,
            corr: circuitlab_core::stochastic_engine::CorrelationMatrix::pair(0.2).unwrap(),
            jumps: None,
        };
        let Ok(d) = TwoBankTerminalDomains::<f64>::new(&net) else { continue };
        for i in 0..2 {
            let o = 1 - i;
            assert!((d.theta(i, 0.0) - d.m_terminal_after(i)).abs() < 1e-12);
            assert!((d.theta(i, d.m_terminal(o)) - d.m_terminal(i)).abs() < 1e-12);
        }
    }
}

#[test]
fn domains_partition_the_quadrant() {
    let d = fig15_problem([2.0, 2.0]).domains;
    for x1 in [0.5, 2.0, 2.4, 2.6, 4.0] {
        for x2 in [0.2, 1.0, 1.2, 3.0] {
            let [a, b] = d.classify([x1, x2]);
            let both_defaulted_region = x1 < d.m_terminal(0) && x2 < d.m_terminal(1);
            if both_defaulted_region {
                assert!(!a && !b);
            }
            if x1 >= d.m_terminal(0) && x2 >= d.m_terminal(1) {
                assert!(a && b);
            }
        }
    }
}

#[test]
fn survival_1d_limits() {
    let far = survival_1d(60.0f64, -0.5, 0.0, 1.0, 1.0);
    assert!((far.value - 1.0).abs() < 1e-15);
    let at = survival_1d(0.0, -0.5, 0.0, 1.0, 1.0);
    assert_eq!(at.value, 0.0);
    assert!(at.absorbed);
    // without an interior boundary only the terminal test remains
    let v = survival_1d(1.0, 0.2, f64::NEG_INFINITY, 0.5, 2.0).value;
    assert!((v - normal_cdf((1.0 + 0.4 - 0.5) / 2f64.sqrt())).abs() < 1e-15);
}

#[test]
fn survival_1d_against_monte_carlo() {
    let want = survival_1d(1.0, 0.0, 0.0, 0.5, 1.0).value;
    let (paths, steps) = (1_000_000usize, 50usize);
    let h = 1.0 / steps as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut alive = 0usize;
    for _ in 0..paths {
        let mut x = 1.0f64;
        let mut ok = true;
        for _ in 0..steps {
            let next = x + h.sqrt() * rng.sample::<f64, _>(StandardNormal);
            let crossed = next <= 0.0 || rng.random::<f64>() < (-2.0 * x * next / h).exp();
            if crossed {
                ok = false;
                break;
            }
            x = next;
        }
        if ok && x > 0.5 {
            alive += 1;
        }
    }
    let p = alive as f64 / paths as f64;
    let se = (p * (1.0 - p) / paths as f64).sqrt();
    assert!((p - want).abs() < 3.0 * se, "{p} vs {want} (se {se})");
}

#[test]
fn short_horizon_survives() {
    let p = fig15_problem([4.0, 3.0]);
    let q = QuadratureSpec::default();
    let v = joint_survival_q(&p, p.start, 1e-3, &q).unwrap();
    assert!((v - 1.0).abs() < 1e-9, "{v}");
}

#[test]
fn decoupled_marginal_is_one_dimensional() {
    let mut net = BankNetwork::<f64>::fig15([60.0, 90.0], [0.4, 0.4], 0.0).unwrap();
    net.mutual = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
    let q = QuadratureSpec::default();
    for rho in [0.0, 0.4] {
        net.corr = circuitlab_core::stochastic_engine::CorrelationMatrix::pair(rho).unwrap();
        let p = TwoBankProblem::new(&net).unwrap();
        for xp in [[1.5, 0.5], [2.5, 2.0]] {
            let t = 2.0;
            let q1 = marginal_survival_q1(&p, xp, t, &q).unwrap();
            let one = marginal_survival_1d(&p, 0, xp, t);
            assert!((q1 - one).abs() < 1e-6, "rho={rho} {xp:?}: {q1} vs {one}");
        }
    }
}

#[test]
fn fig16_surface_orderings() {
    let q = QuadratureSpec::default();
    for x1 in [2.0, 4.0, 6.0] {
        for x2 in [0.5, 2.5, 4.5] {
            let p = fig15_problem([x1, x2]);
            let big_q = joint_survival_q(&p, p.start, 2.0, &q).unwrap();
            let q1 = marginal_survival(&p, 0, p.start, 2.0, &q).unwrap();
            let q2 = marginal_survival(&p, 1, p.start, 2.0, &q).unwrap();
            let one = marginal_survival_1d(&p, 0, p.start, 2.0);
            assert!(big_q <= q1.min(q2) + 1e-9, "{big_q} {q1} {q2}");
            assert!(one - q1 >= -1e-9, "{one} < {q1}");
        }
    }
}

#[test]
fn jumps_are_rejected() {
    let mut net = BankNetwork::fig15([60.0, 90.0], [0.4, 0.4], 0.0).unwrap();
    net.jumps = Some(
        circuitlab_core::stochastic_engine::JumpSpec::new(
            vec![circuitlab_core::stochastic_engine::JumpSubset { members: vec![0], intensity: 0.1 }],
            vec![2.0, 2.0],
        )
        .unwrap(),
    );
    assert!(TwoBankProblem::new(&net).is_err());
}

#[test]
fn network_monte_carlo_agrees() {
    use circuitlab_core::banking_network::{simulate_paths, survival_probabilities, NetworkRun};
    use circuitlab_core::stochastic_engine::SimConfig;
    let q = QuadratureSpec::default();
    let x = [4.0f64, 2.5];
    let net = BankNetwork::fig15([4.0 * x[0].exp(), 22.0 * x[1].exp()], [0.4, 0.4], 0.0).unwrap();
    let p = TwoBankProblem::new(&net).unwrap();
    let t = p.scaled_time(12.5);
    let out = simulate_paths(&net, &NetworkRun::default(), &SimConfig::new(12.5, 0.05, 20_000, 21)).unwrap();
    let est = survival_probabilities(&out).unwrap();
    let big_q = joint_survival_q(&p, p.start, t, &q).unwrap();
    assert!(est.joint.agrees(big_q, 3.0), "{:?} vs {big_q}", est.joint);
    for bank in 0..2 {
        let m = marginal_survival(&p, bank, p.start, t, &q).unwrap();
        assert!(est.marginal[bank].agrees(m, 3.0), "{:?} vs {m}", est.marginal[bank]);
    }

    // one bank alone against the closed form
    let mut single = net.clone();
    single.mutual = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
    let p = TwoBankProblem::new(&single).unwrap();
    let out = simulate_paths(&single, &NetworkRun::default(), &SimConfig::new(12.5, 0.05, 20_000, 22)).unwrap();
    let est = survival_probabilities(&out).unwrap();
    let want = marginal_survival_1d(&p, 0, p.start, t);
    assert!(est.marginal[0].agrees(want, 3.0), "{:?} vs {want}", est.marginal[0]);
}
