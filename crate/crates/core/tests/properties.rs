use std::f64::consts::{FRAC_PI_2, PI};

use fo_imc::feasibility::{beta_wg_re1, beta_wg_re2, beta_x1, beta_y1, beta_y2, feasible_beta_set};
use fo_imc::model::{eval_complementary, eval_filter, eval_open_loop, eval_sensitivity, FoFilter};
use fo_imc::solver::{
    curve_point, lambda_from_gm, lambda_from_pm, omega_g, omega_p, sample_curves, tune, SolverOptions,
};
use fo_imc::{Error, ProcessModel, RobustnessSpec};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn filter_strategy() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (
        -3.0f64..3.0, // log10 λ
        0.01f64..1.99,
        -1.0f64..2.0, // log10 θ
        -4.0f64..2.0, // log10 ω
    )
        .prop_map(|(l, b, t, w)| (10f64.powf(l), b, 10f64.powf(t), 10f64.powf(w)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn sensitivity_plus_complementary_is_one((lambda, beta, theta, omega) in filter_strategy()) {
        let f = FoFilter::new(lambda, beta).unwrap();
        let (Ok(eps), Ok(eta)) = (eval_sensitivity(&f, theta, omega), eval_complementary(&f, theta, omega)) else {
            return Ok(());
        };
        prop_assert!((eps + eta - 1.0).norm() < 1e-12 * eps.norm().max(eta.norm()).max(1.0));
    }

    #[test]
    fn complementary_matches_closed_loop((lambda, beta, theta, omega) in filter_strategy()) {
        let f = FoFilter::new(lambda, beta).unwrap();
        let Ok(l) = eval_open_loop(&f, theta, omega) else { return Ok(()) };
        prop_assume!((l + 1.0).norm() > 1e-8);
        let direct = eval_complementary(&f, theta, omega).unwrap();
        let via_loop = l / (l + 1.0);
        prop_assert!((direct - via_loop).norm() <= 1e-10 * direct.norm().max(1e-300));
    }

    #[test]
    fn integer_order_filter_is_first_order_lag(lambda in 1e-3f64..1e3, omega in 1e-4f64..1e4) {
        let f = FoFilter::new(lambda, 1.0).unwrap();
        let lag = Complex64::new(1.0, 0.0) / Complex64::new(1.0, lambda * omega);
        prop_assert!((eval_filter(&f, omega).unwrap() - lag).norm() <= 4.0 * f64::EPSILON * lag.norm());
    }

    #[test]
    fn realness_boundaries_solve_defining_equation(phi in 0.01f64..(PI / 3.0)) {
        let target = 2.0 * (0.5 * phi).sin();
        let r1 = beta_wg_re1(phi).unwrap();
        let r2 = beta_wg_re2(phi).unwrap();
        prop_assert!(((r1 * FRAC_PI_2).sin() - target).abs() < 1e-10);
        prop_assert!(((r2 * FRAC_PI_2).sin() - target).abs() < 1e-10);
    }

    #[test]
    fn feasible_intervals_lie_above_beta_x1(phi in 0.01f64..3.13) {
        let set = feasible_beta_set(phi).unwrap();
        let bx1 = beta_x1(phi).unwrap();
        for iv in &set.intervals {
            prop_assert!(iv.lo >= bx1 - 1e-15 && iv.hi <= 2.0 && iv.lo < iv.hi);
        }
    }

    #[test]
    fn paired_equations_agree_along_curves(a in 2.0f64..6.0, phi in 0.4f64..2.6, theta in 0.1f64..50.0) {
        let spec = RobustnessSpec::new(a, phi).unwrap();
        let set = feasible_beta_set(phi).unwrap();
        for s in sample_curves(&spec, theta, &set, 200) {
            let pa = lambda_from_pm(s.beta, s.omega_g, phi, theta).unwrap();
            let pb = lambda_from_gm(s.beta, s.omega_p, a, theta).unwrap();
            prop_assert!(pa.residual < 1e-9, "lambda_a residual {} at beta {}", pa.residual, s.beta);
            prop_assert!(pb.residual < 1e-9, "lambda_b residual {} at beta {}", pb.residual, s.beta);
        }
    }
}

#[test]
fn upper_bound_identity_on_sampled_phase_margins() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    for _ in 0..500 {
        let phi: f64 = rng.gen_range(1e-3..PI - 1e-3);
        let twice = 2.0 * beta_x1(phi).unwrap();
        if phi < FRAC_PI_2 {
            assert!((beta_y2(phi).unwrap() - twice).abs() < 1e-12, "phi {phi}");
        } else if phi > FRAC_PI_2 {
            assert!((beta_y1(phi).unwrap() - twice).abs() < 1e-12, "phi {phi}");
        }
    }
}

#[test]
fn membership_matches_real_positive_crossover() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let mut checked = 0;
    for _ in 0..200 {
        let phi: f64 = rng.gen_range(1e-3..PI - 1e-3);
        let set = feasible_beta_set(phi).unwrap();
        for _ in 0..200 {
            let beta: f64 = rng.gen_range(1e-6..2.0 - 1e-6);
            let positive = match omega_g(beta, phi, 1.0) {
                Ok(w) => w > 0.0,
                Err(Error::NotReal { .. }) => false,
                Err(e) => panic!("{e}"),
            };
            // Points within the guard band of an endpoint are ambiguous.
            let near_edge = set
                .intervals
                .iter()
                .any(|iv| (beta - iv.lo).abs() < 1e-9 || (beta - iv.hi).abs() < 1e-9);
            if near_edge {
                continue;
            }
            assert_eq!(set.contains(beta), positive, "phi {phi} beta {beta}");
            checked += 1;
        }
    }
    assert!(checked > 39_000);
}

#[test]
fn delay_scaling_leaves_order_and_normalised_crossovers_unchanged() {
    let spec = RobustnessSpec::new(3.0, 1.1345).unwrap();
    let opts = SolverOptions::default();
    let base = tune(&ProcessModel::new(1.0, 1.0, 1.0).unwrap(), &spec, &opts).unwrap();
    for theta in [0.1, 10.0, 40.0] {
        let r = tune(&ProcessModel::new(1.0, 1.0, theta).unwrap(), &spec, &opts).unwrap();
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
        assert!(rel(r.params.beta, base.params.beta) < 1e-6);
        assert!(rel(theta * r.omega_g, base.omega_g) < 1e-6);
        assert!(rel(theta * r.omega_p, base.omega_p) < 1e-6);
        assert!(rel(r.params.lambda, base.params.lambda * theta.powf(base.params.beta)) < 1e-6);
    }
}

#[test]
fn lambda_a_grows_with_phase_margin_and_lambda_b_with_gain_margin() {
    let (phi, theta) = (1.1345, 1.0);
    let low = feasible_beta_set(phi).unwrap().intervals[0];
    let high = feasible_beta_set(phi + 0.1).unwrap().intervals[0];
    let (lo, hi) = (low.lo.max(high.lo), low.hi.min(high.hi));
    for i in 1..=50 {
        let beta = lo + (hi - lo) * i as f64 / 51.0;
        let a0 = lambda_from_pm(beta, omega_g(beta, phi, theta).unwrap(), phi, theta).unwrap().lambda;
        let a1 = lambda_from_pm(beta, omega_g(beta, phi + 0.1, theta).unwrap(), phi + 0.1, theta)
            .unwrap()
            .lambda;
        assert!(a0 < a1, "beta {beta}: {a0} !< {a1}");
        let b0 = lambda_from_gm(beta, omega_p(beta, 3.0, theta).unwrap(), 3.0, theta).unwrap().lambda;
        let b1 = lambda_from_gm(beta, omega_p(beta, 3.5, theta).unwrap(), 3.5, theta).unwrap().lambda;
        assert!(b0 < b1, "beta {beta}: {b0} !< {b1}");
    }
}

#[test]
fn refined_solutions_close_both_crossover_conditions() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let mut solved = 0;
    while solved < 20 {
        let spec = RobustnessSpec::new(rng.gen_range(2.0..5.0), rng.gen_range(0.4..2.6)).unwrap();
        let theta = rng.gen_range(0.5..50.0);
        let Ok(r) = tune(&ProcessModel::new(1.0, 1.0, theta).unwrap(), &spec, &SolverOptions::default()) else {
            continue;
        };
        solved += 1;
        let lg = eval_open_loop(&r.params, theta, r.omega_g).unwrap();
        let lp = eval_open_loop(&r.params, theta, r.omega_p).unwrap();
        let wrap = |a: f64| a - 2.0 * PI * (a / (2.0 * PI)).round();
        assert!((lg.norm() - 1.0).abs() < 1e-6, "{spec:?}");
        assert!(wrap(lg.arg() + PI - spec.phase_margin).abs() < 1e-6, "{spec:?}");
        assert!((lp.norm() - 1.0 / spec.gain_margin).abs() < 1e-6, "{spec:?}");
        assert!(wrap(lp.arg() + PI).abs() < 1e-6, "{spec:?}");
        assert!(curve_point(r.params.beta, &spec, theta).is_ok() || r.root != fo_imc::solver::CrossoverRoot::Principal);
    }
}
