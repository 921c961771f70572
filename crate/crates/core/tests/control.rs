use nalgebra::{SMatrix, Vector3};
use proptest::prelude::*;
use proxnav::control::*;
use proxnav::dynamics::{cart_to_milankovitch, control_influence, milankovitch_to_cart, HillState, MilankovitchState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cp(weights: [f64; 3]) -> ConstraintParams {
    ConstraintParams {
        r_min: 0.0084,
        r_max: 0.105,
        alpha: 30f64.to_radians(),
        weights,
        sharpness: [1.0; 3],
        epsilon: 0.0,
        exponent_ceiling: 50.0,
        ecc_cap: OPEN_ORBIT_ECC_CAP,
    }
}

/// Random bound orbit near the body, normalized.
fn random_orbit(rng: &mut impl Rng) -> (Slow, Vector3<f64>, Vector3<f64>) {
    loop {
        let r: Vector3<f64> = Vector3::from_fn(|_, _| rng.random_range(-0.08..0.08));
        if r.norm() < 0.015 {
            continue;
        }
        let v: Vector3<f64> = Vector3::from_fn(|_, _| rng.random_range(-1.0f64..1.0)) * (1.0 / r.norm()).sqrt() * 0.7;
        let Ok(m) = cart_to_milankovitch(&HillState::normalized(r, v), 1.0) else {
            continue;
        };
        if m.e.norm() < 0.9 {
            return (m.slow(), r, v);
        }
    }
}

fn random_target(rng: &mut impl Rng, x: &Slow) -> Slow {
    x + Slow::from_fn(|i, _| rng.random_range(-0.05..0.05) * if i < 3 { 0.2 } else { 1.0 })
}

#[test]
fn descent_identity_with_penalties_off() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let c = cp([0.0; 3]);
    for _ in 0..1000 {
        let (x, r, v) = random_orbit(&mut rng);
        let target = random_target(&mut rng, &x);
        let gains: [f64; 6] = std::array::from_fn(|_| 10f64.powf(rng.random_range(-4.0..-1.0)));
        let cfg = ControllerConfig::diagonal(gains, target, f64::INFINITY);
        let out = control(&x, &cfg, &c, &r, &v).unwrap();
        assert!(!out.saturated && !out.damped);
        let b: SMatrix<f64, 6, 3> = control_influence(&r, &v, 1.0).unwrap().fixed_rows::<6>(0).into_owned();
        let dx = x - target;
        let vdot = 2.0 * (dx.transpose() * cfg.k * b * out.u)[(0, 0)];
        // projector onto range(L) from an independent SVD of L = 2 K B
        let l = cfg.k * b * 2.0;
        let svd = l.svd(true, false);
        let q = svd.u.unwrap();
        let proj = q.transpose() * dx;
        let expect = -proj.norm_squared();
        assert!(vdot <= 0.0);
        assert!((vdot - expect).abs() <= 1e-9 * expect.abs().max(1e-300), "{vdot:e} vs {expect:e}");
    }
}

#[test]
fn saturation_keeps_direction() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let (x, r, v) = random_orbit(&mut rng);
        let target = random_target(&mut rng, &x);
        let free = ControllerConfig::diagonal([1e-3; 6], target, f64::INFINITY);
        let u0 = control(&x, &free, &cp([1.0, 1.0, 10.0]), &r, &v).unwrap().u;
        let capped = ControllerConfig {
            u_max: 0.25 * u0.norm(),
            ..free
        };
        let out = control(&x, &capped, &cp([1.0, 1.0, 10.0]), &r, &v).unwrap();
        assert!(out.saturated);
        assert!((out.u.norm() - capped.u_max).abs() <= 1e-12 * capped.u_max);
        assert!((out.u.normalize() - u0.normalize()).norm() < 1e-12);
    }
}

#[test]
fn gain_scaling_keeps_direction_and_scales_magnitude() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let c = cp([0.0; 3]);
    for _ in 0..200 {
        let (x, r, v) = random_orbit(&mut rng);
        let target = random_target(&mut rng, &x);
        let a = ControllerConfig::diagonal([1e-2, 1e-3, 1e-3, 1e-4, 1e-3, 1e-4], target, f64::INFINITY);
        let s = rng.random_range(0.1..10.0);
        let b = ControllerConfig { k: a.k * s, ..a };
        let ua = control(&x, &a, &c, &r, &v).unwrap().u;
        let ub = control(&x, &b, &c, &r, &v).unwrap().u;
        assert!((ub * s - ua).norm() <= 1e-9 * ua.norm());
    }
}

#[test]
#[ignore = "u = -(L^T L)^-1 L^T dx is homogeneous of degree -1 in K, so scaling K rescales u by 1/c rather than leaving it unchanged"]
fn gain_scaling_leaves_control_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (x, r, v) = random_orbit(&mut rng);
    let target = random_target(&mut rng, &x);
    let a = ControllerConfig::diagonal([1e-3; 6], target, f64::INFINITY);
    let b = ControllerConfig { k: a.k * 4.0, ..a };
    let ua = control(&x, &a, &cp([0.0; 3]), &r, &v).unwrap().u;
    let ub = control(&x, &b, &cp([0.0; 3]), &r, &v).unwrap().u;
    assert!((ua - ub).norm() <= 1e-9 * ua.norm());
}

/// States whose three constraints all lie below `-margin / k`.
fn deep_interior(rng: &mut impl Rng, c: &ConstraintParams, margin: f64) -> (Slow, Vector3<f64>, Vector3<f64>) {
    for _ in 0..1_000_000 {
        let (x, r, v) = random_orbit(rng);
        let g = constraints_g(&x, c, 1.0).unwrap();
        if (0..3).all(|i| g[i] < -margin / c.sharpness[i]) {
            return (x, r, v);
        }
    }
    panic!("no interior state found");
}

fn locality_case(sharpness: f64, margin: f64, tol: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut c = cp([1.0, 1.0, 10.0]);
    c.sharpness = [sharpness; 3];
    // r_max^2 must exceed typical apoapses for g2 to reach the margin
    c.r_max = 0.5;
    c.r_min = 0.01;
    for _ in 0..100 {
        let (x, r, v) = deep_interior(&mut rng, &c, margin);
        let target = random_target(&mut rng, &x);
        let cfg = ControllerConfig::diagonal([1e-3; 6], target, f64::INFINITY);
        let on = control(&x, &cfg, &c, &r, &v).unwrap().u;
        let off = control(&x, &cfg, &c.unconstrained(), &r, &v).unwrap().u;
        assert!((on - off).norm() <= tol * off.norm(), "{:e}", (on - off).norm() / off.norm());
    }
}

#[test]
#[ignore = "at g = -5/k the cone term still contributes w3 exp(-5) = 6.7% of the scale factor with w3 = 10, far above 0.1%"]
fn penalties_are_local_at_five_over_k() {
    locality_case(200.0, 5.0, 1e-3);
}

#[test]
fn penalties_vanish_once_weighted_exponent_is_negligible() {
    // w3 exp(-margin) < 1e-4 leaves u unchanged within 0.1%
    locality_case(200.0, 12.0, 1e-3);
}

#[test]
fn cone_constraint_examples() {
    let c = cp([1.0; 3]);
    let x = Slow::from_column_slice(&[0.2, 0.0, 0.0, 0.01, 0.0, 0.0]);
    assert!((constraints_g(&x, &c, 1.0).unwrap()[2] + 1.5).abs() < 1e-15);
    let anti = Slow::from_column_slice(&[-0.2, 0.0, 0.0, 0.01, 0.0, 0.0]);
    assert!((constraints_g(&anti, &c, 1.0).unwrap()[2] - 0.5).abs() < 1e-15);
}

#[test]
fn periapsis_boundary_is_zero() {
    let c = cp([1.0; 3]);
    let ecc = 0.3;
    let h = (c.r_min * c.r_min * (1.0 + ecc)).sqrt();
    let x = Slow::from_column_slice(&[0.0, 0.0, h, ecc, 0.0, 0.0]);
    assert!(constraints_g(&x, &c, 1.0).unwrap()[0].abs() < 1e-18);
}

#[test]
fn apoapsis_beyond_r_max_violates() {
    let c = cp([1.0; 3]);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let ecc = rng.random_range(0.0..0.9);
        let a: f64 = rng.random_range(0.01..0.5);
        let h = (a * (1.0 - ecc * ecc)).sqrt();
        let m = MilankovitchState {
            h: Vector3::new(0.0, 0.0, h),
            e: Vector3::new(ecc, 0.0, 0.0),
            l: std::f64::consts::PI,
        };
        // geometric apoapsis from the Cartesian state at true anomaly pi
        let (r, _) = milankovitch_to_cart(&m, 1.0).unwrap();
        let g2 = constraints_g(&m.slow(), &c, 1.0).unwrap()[1];
        if r.norm() > c.r_max {
            assert!(g2 > 0.0);
        }
    }
}

#[test]
fn deep_cone_violation_ratio() {
    let mut c = cp([0.0, 0.0, 100.0]);
    c.sharpness = [1.0; 3];
    let x = Slow::from_column_slice(&[-0.2, 0.0, 0.0, 0.01, 0.0, 0.0]);
    let target = Slow::from_column_slice(&[0.2, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let cfg = ControllerConfig::diagonal([1e-3; 6], target, 1.0);
    let (v, vh, vp) = lyapunov_values(&x, &cfg, &c).unwrap();
    assert!((vh / v - (1.0 + 100.0 * 0.5f64.exp())).abs() < 1e-12);
    assert!((vh / v - 165.87).abs() < 0.01);
    assert_eq!(vp[0], 0.0);
}

#[test]
fn fd_gradients_survive_step_halving() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let c = cp([1.0; 3]);
    for _ in 0..200 {
        let (x, _, _) = random_orbit(&mut rng);
        let a = constraint_gradients_with_step(&x, &c, 1.0, FD_REL_STEP).unwrap();
        let b = constraint_gradients_with_step(&x, &c, 1.0, FD_REL_STEP / 2.0).unwrap();
        for i in 0..3 {
            let d = (a.row(i) - b.row(i)).norm();
            assert!(d <= 1e-6 * a.row(i).norm().max(1e-12), "row {i}: {d:e}");
        }
    }
}

#[test]
fn cone_gradient_ignores_eccentricity() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let c = cp([1.0; 3]);
    for _ in 0..50 {
        let (x, _, _) = random_orbit(&mut rng);
        for mode in [GradientMode::FiniteDifference, GradientMode::Analytic] {
            let g = constraint_gradients(&x, &c, 1.0, mode).unwrap();
            for j in 3..6 {
                assert!(g[(2, j)].abs() < 1e-9, "{mode:?}");
            }
        }
    }
}

#[test]
fn analytic_partials_report() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let c = cp([1.0; 3]);
    let states: Vec<Slow> = (0..100).map(|_| random_orbit(&mut rng).0).collect();
    let rep = compare_gradients(&states, &c, 1.0).unwrap();
    println!("constraint  max|analytic - fd|  max relative");
    for i in 0..3 {
        println!("g{}          {:.3e}          {:.3e}", i + 1, rep.max_abs[i], rep.max_rel[i]);
    }
    assert_eq!(rep.n_states, 100);
    assert!(rep.max_abs.iter().all(|d| d.is_finite()));
    // the printed partials are not the derivatives of the implemented constraints
    assert!(rep.max_rel[0] > 1e-3);
}

#[test]
fn near_rank_deficiency_uses_damping() {
    // r parallel to v makes h vanish; use a nearly radial state instead
    let r = Vector3::new(0.05, 0.0, 0.0);
    let v = Vector3::new(2.0, 1e-9, 0.0);
    let x = cart_to_milankovitch(&HillState::normalized(r, v), 1.0).unwrap().slow();
    let target = x + Slow::from_column_slice(&[0.0, 0.0, 0.01, 0.0, 0.0, 0.0]);
    let cfg = ControllerConfig::diagonal([1e-3; 6], target, f64::INFINITY);
    let mut c = cp([0.0; 3]);
    c.r_max = 10.0;
    match control(&x, &cfg, &c, &r, &v) {
        Ok(out) => assert!(out.u.iter().all(|u| u.is_finite())),
        Err(e) => panic!("{e}"),
    }
}

proptest! {
    #[test]
    fn penalty_is_monotone(g in -20.0..20.0f64, dg in 1e-6..5.0f64, k in 0.1..5.0f64) {
        prop_assert!(penalty(g + dg, k, 500.0) > penalty(g, k, 500.0));
    }

    #[test]
    fn control_never_exceeds_ceiling(seed in 0u64..1000, frac in 0.01..2.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, r, v) = random_orbit(&mut rng);
        let target = random_target(&mut rng, &x);
        let cfg = ControllerConfig::diagonal([1e-3; 6], target, frac);
        let out = control(&x, &cfg, &cp([1.0, 1.0, 10.0]), &r, &v).unwrap();
        prop_assert!(out.u.norm() <= frac * (1.0 + 1e-12));
        prop_assert!(out.v >= 0.0 && out.v_hat >= out.v);
        prop_assert!(out.p.iter().all(|p| *p > 0.0));
    }
}
