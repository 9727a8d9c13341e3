use circuitlab_core::mmc::*;
use circuitlab_core::stochastic_engine::SimConfig;
use proptest::prelude::*;

fn fig8() -> (MmcState<f64>, MmcParams<f64>) {
    (MmcState::fig8(), MmcParams::fig8())
}

fn one_step_run() -> MmcRun<f64> {
    MmcRun {
        upsilon_mode: UpsilonMode::OneStep,
        ..MmcRun::default()
    }
}

// Bisection on u - Phi(x(u)) over the lower branch.
fn bisect_upsilon(s: &MmcState<f64>, p: &MmcParams<f64>) -> f64 {
    let g = |u: f64| {
        let x = p.upsilon0
            + p.upsilon1 * s.c_r / ((1.0 - u) * p.nu_f * s.k_f)
            + p.upsilon2 * s.d_f / s.k_f
            + p.upsilon3 * s.l_f / s.k_f;
        u - 1.0 / (1.0 + (-2.0 * x).exp())
    };
    let (mut lo, mut hi) = (0.0, 0.5);
    assert!(g(lo) < 0.0 && g(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn fig8_upsilon_modes() {
    let (s, p) = fig8();
    let fixed = solve_upsilon(&s, &p, UpsilonMode::FixedPoint).unwrap();
    let newton = solve_upsilon(&s, &p, UpsilonMode::Newton).unwrap();
    let one = solve_upsilon(&s, &p, UpsilonMode::OneStep).unwrap();
    let oracle = bisect_upsilon(&s, &p);
    assert!((fixed - oracle).abs() < 1e-11, "{fixed} vs {oracle}");
    assert!((newton - oracle).abs() < 1e-11);
    assert!((fixed - 0.100_787_130_776).abs() < 1e-9);
    assert!((one - fixed).abs() < 1e-2);
}

#[test]
fn fig8_profit_substitution() {
    let (s, p) = fig8();
    let d = derived_quantities(&s, &p, UpsilonMode::FixedPoint).unwrap();
    let u = solve_upsilon(&s, &p, UpsilonMode::FixedPoint).unwrap();
    let ni_f = 0.02 * 20.0 - 0.04 * 50.0;
    assert!((d.pi_f - (3.0 / (1.0 - u) + ni_f)).abs() < 1e-14);
    assert!((d.sigma_r - 40.0).abs() < 1e-12);
}

#[test]
fn fig8_initial_stock_flow_derivative() {
    let (s, p) = fig8();
    let dy = mmc_drift_and_diffusion(&s, &p, UpsilonMode::FixedPoint).unwrap();
    assert!(!dy.credit_crunch);
    let lhs = dy.drift[2] + dy.drift[4] - dy.drift[1] - dy.drift[3];
    assert!((lhs - dy.drift[6]).abs() < 1e-12 * lhs.abs().max(1.0));
    // -CF_r - CF_f - xi (L_r + L_f) = delta_bb Pi_b
    let d = dy.derived;
    let oracle = -d.cf_r - d.cf_f - p.xi_delta * (s.l_r + s.l_f);
    assert!((oracle - p.delta_bb * d.pi_b).abs() < 1e-12);
}

#[test]
fn positive_rentier_cash_flow_only_amortizes_loans() {
    let (mut s, p) = fig8();
    s.d_r = 300.0;
    s.k_b = s.l_r + s.l_f - s.d_r - s.d_f;
    let dy = mmc_drift_and_diffusion(&s, &p, UpsilonMode::FixedPoint).unwrap();
    assert!(dy.derived.cf_r > 0.0);
    assert_eq!(dy.drift[2], -p.xi_delta * s.l_r);
}

#[test]
fn capital_indicator() {
    let (s, p) = fig8();
    assert!(!mmc_drift_and_diffusion(&s, &p, UpsilonMode::OneStep).unwrap().credit_crunch);
    let mut tiny = s;
    tiny.k_b = 1e-6;
    tiny.d_r = s.d_r + s.k_b - 1e-6;
    let dy = mmc_drift_and_diffusion(&tiny, &p, UpsilonMode::OneStep).unwrap();
    assert!(dy.credit_crunch);
    assert!(dy.unmet_financing > 0.0);
    assert_eq!(dy.drift[2], -p.xi_delta * tiny.l_r);
}

#[test]
fn deterministic_fig8_preserves_bank_identity() {
    let (s, p) = fig8();
    let cfg = SimConfig::new(100.0, 0.01, 1, 0);
    let paths = simulate(s, &p, &one_step_run(), &cfg).unwrap();
    let rec = &paths[0];
    for row in &rec.states {
        let mut a = [0.0; STATE_DIM];
        a.copy_from_slice(&row[..STATE_DIM]);
        let st = MmcState::from_array(&a);
        assert_eq!(row[col::CREDIT_CRUNCH], 0.0);
        assert!(row[col::IDENTITY_RESIDUAL].abs() < 1e-8 * st.max_stock());
        assert!(row[col::PRODUCTION_RESIDUAL].abs() < 1e-12);
    }
    // physical capital keeps being rebuilt while loans grow
    assert!(rec.last()[2] > 90.0);
    assert!(rec.last()[col::K_F] > 35.0);
}

#[test]
fn consumption_at_its_target_stays_put() {
    let mut p = MmcParams::<f64>::fig8();
    p.xi_delta = 0.0;
    p.delta_rb = 0.0;
    p.delta_bb = 1.0;
    p.delta_rf = 0.0;
    p.delta_ff = 1.0;
    p.alpha0 = 1.0;
    p.alpha1 = 0.0;
    let mut s = MmcState::fig8();
    s.l_r = 0.0;
    s.c_r = p.r_d * s.d_r;
    s.k_b = s.l_r + s.l_f - s.d_r - s.d_f;
    let cfg = SimConfig::new(20.0, 0.01, 1, 0);
    let paths = simulate(s, &p, &one_step_run(), &cfg).unwrap();
    for row in &paths[0].states {
        assert!((row[col::C_R] - s.c_r).abs() < 1e-14);
    }
}

#[test]
fn exact_solver_reports_fold_on_long_fig8_run() {
    let (s, p) = fig8();
    let cfg = SimConfig::new(100.0, 0.01, 1, 0);
    assert!(simulate(s, &p, &MmcRun::default(), &cfg).is_err());
}

#[test]
fn stochastic_run_is_reproducible() {
    let (s, mut p) = fig8();
    p.sigma_c = 0.1;
    p.sigma_k = 0.05;
    p.sigma_s = 0.01;
    p.sigma_lambda = 0.01;
    let cfg = SimConfig::new(5.0, 0.01, 4, 7).with_record_every(50);
    let a = simulate(s, &p, &one_step_run(), &cfg).unwrap();
    let b = simulate(s, &p, &one_step_run(), &cfg).unwrap();
    assert_eq!(a, b);
    assert_ne!(a[0].last(), a[1].last());
}

fn arb_state() -> impl Strategy<Value = MmcState<f64>> {
    (
        0.1..5.0f64,
        (0.0..100.0f64, 0.0..100.0f64, 0.0..100.0f64, 0.0..100.0f64),
        20.0..100.0f64,
        0.05..0.95f64,
        0.05..0.95f64,
    )
        .prop_map(|(c_r, (d_r, l_r, d_f, l_f), k_f, s_w, lambda_w)| MmcState {
            c_r,
            d_r,
            l_r,
            d_f,
            l_f,
            k_f,
            k_b: l_r + l_f - d_r - d_f,
            theta_w: 1.0,
            n_w: 1.0,
            s_w,
            lambda_w,
        })
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn production_identity(s in arb_state()) {
        let p = MmcParams::fig8();
        let d = derived_quantities(&s, &p, UpsilonMode::OneStep).unwrap();
        prop_assert!((d.y_f - d.c_w - s.c_r - d.i_f).abs() <= 1e-12 * d.y_f);
        prop_assert!(d.upsilon_f > 0.0 && d.upsilon_f < 1.0);
    }

    #[test]
    fn rentier_wealth_is_physical_capital(s in arb_state()) {
        let d = derived_quantities(&s, &MmcParams::fig8(), UpsilonMode::OneStep).unwrap();
        prop_assert!((d.sigma_r - s.k_f).abs() <= 1e-12 * s.max_stock().max(1.0));
    }

    #[test]
    fn drift_preserves_bank_identity(s in arb_state()) {
        let p = MmcParams::fig8();
        let dy = mmc_drift_and_diffusion(&s, &p, UpsilonMode::OneStep).unwrap();
        prop_assume!(!dy.credit_crunch);
        let lhs = dy.drift[2] + dy.drift[4] - dy.drift[1] - dy.drift[3];
        prop_assert!((lhs - dy.drift[6]).abs() <= 1e-12 * s.max_stock().max(1.0));
    }
}
