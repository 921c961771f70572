use nalgebra::{Matrix3, Matrix6, SymmetricEigen, Vector3};
use proptest::prelude::*;
use proxnav::dynamics::{anh3bp_accel, propagate, srp_beta, BodyParams, HillState, IntegratorOptions, Normalization};
use proxnav::ekf::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup() -> (Normalization, f64) {
    let body = BodyParams::bennu();
    (Normalization::new(&body), srp_beta(&body).unwrap().nondim)
}

fn random_state(rng: &mut impl Rng) -> HillState {
    loop {
        let r = Vector3::from_fn(|_, _| rng.random_range(-0.5..0.5));
        if r.norm() > 0.03 {
            let v = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            return HillState::normalized(r, v);
        }
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let (_, beta) = setup();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let s = random_state(&mut rng);
        let a = jacobian_a(&s.r).unwrap();
        let x = s.as_array();
        for j in 0..6 {
            let h = 1e-7;
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let f = |x: [f64; 6]| {
                let st = HillState::normalized(Vector3::new(x[0], x[1], x[2]), Vector3::new(x[3], x[4], x[5]));
                let acc = anh3bp_accel(&st, beta, &Vector3::zeros()).unwrap();
                [x[3], x[4], x[5], acc.x, acc.y, acc.z]
            };
            let (fp, fm) = (f(xp), f(xm));
            for i in 0..6 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                worst = worst.max((fd - a[(i, j)]).abs());
            }
        }
    }
    assert!(worst < 1e-5, "{worst:e}");
}

#[test]
fn discrete_transition_is_first_order() {
    let s = HillState::normalized(Vector3::new(0.03, -0.01, 0.02), Vector3::new(0.1, 0.0, -0.1));
    let f = jacobian_f(&s, 68.6, 1e-3).unwrap();
    let a = jacobian_a(&s.r).unwrap();
    assert!((f - Matrix6::identity() - a * 1e-3).norm() < 1e-15);
    assert!(jacobian_f(&HillState::normalized(Vector3::zeros(), Vector3::zeros()), 0.0, 1e-3).is_err());
}

fn diag_filter(p: [f64; 6], x: [f64; 6]) -> FilterState {
    FilterState::new(
        Vector6::from_column_slice(&x),
        Matrix6::from_diagonal(&Vector6::from_column_slice(&p)),
        0.0,
    )
    .unwrap()
}

#[test]
fn decoupled_axes_match_scalar_kalman() {
    let (norm, _) = setup();
    let l = norm.unit_length;
    let fs = diag_filter([2e-4, 5e-4, 1e-3, 1e-6, 1e-6, 1e-6], [0.03, -0.02, 0.01, 0.0, 0.0, 0.0]);
    let z_km = Vector3::new(1.9, -1.0, 0.4);
    let r_km2 = Matrix3::from_diagonal(&Vector3::new(0.3, 0.05, 1.7));
    let (out, outcome) = update(&fs, &z_km, &r_km2, &NoiseConfig::default(), &norm).unwrap();
    assert!(matches!(outcome, UpdateOutcome::Applied { .. }));
    for i in 0..3 {
        // scalar filter in normalized units
        let (x, p) = (fs.x_hat[i], fs.p[(i, i)]);
        let (z, r) = (z_km[i] / l, r_km2[(i, i)] / (l * l));
        let k = p / (p + r);
        let x1 = x + k * (z - x);
        let p1 = (1.0 - k) * p * (1.0 - k) + k * r * k;
        assert!((out.x_hat[i] - x1).abs() < 1e-12, "axis {i}");
        assert!((out.p[(i, i)] - p1).abs() < 1e-12 * p, "axis {i}");
        assert_eq!(out.x_hat[i + 3], fs.x_hat[i + 3]);
    }
}

#[test]
fn huge_measurement_noise_is_a_no_op() {
    let (norm, _) = setup();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = Matrix6::from_fn(|_, _| rng.random_range(-0.03..0.03));
    let fs = FilterState::new(Vector6::from_fn(|_, _| rng.random_range(-0.1..0.1)), a * a.transpose(), 0.0).unwrap();
    let r = Matrix3::new(0.2, 0.01, 0.0, 0.01, 0.3, 0.02, 0.0, 0.02, 0.1) * 1e12;
    let (out, _) = update(&fs, &Vector3::new(3.0, 1.0, -2.0), &r, &NoiseConfig::default(), &norm).unwrap();
    assert!((out.x_hat - fs.x_hat).abs().max() < 1e-9);
    assert!((out.p - fs.p).abs().max() < 1e-9);
}

#[test]
fn zero_innovation_shrinks_covariance_only() {
    let (norm, _) = setup();
    let fs = diag_filter([1e-3, 1e-3, 1e-3, 1e-6, 1e-6, 1e-6], [0.02, 0.01, -0.03, 0.1, 0.2, 0.3]);
    let z = Vector3::new(0.02, 0.01, -0.03) * norm.unit_length;
    let (out, _) = update(&fs, &z, &(Matrix3::identity() * 0.01), &NoiseConfig::default(), &norm).unwrap();
    assert!((out.x_hat - fs.x_hat).abs().max() < 1e-15);
    assert!(out.p.trace() < fs.p.trace());
}

#[test]
fn singular_innovation_skips_update() {
    let (norm, _) = setup();
    let fs = diag_filter([0.0; 6], [0.02, 0.01, -0.03, 0.0, 0.0, 0.0]);
    let (out, outcome) = update(&fs, &Vector3::new(1.0, 0.0, 0.0), &Matrix3::zeros(), &NoiseConfig::default(), &norm).unwrap();
    assert!(matches!(outcome, UpdateOutcome::Skipped { .. }));
    assert_eq!(out, fs);
}

#[test]
fn covariance_stays_symmetric_psd_over_many_cycles() {
    let (norm, _) = setup();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noise = NoiseConfig::default();
    let q = noise.q_normalized(&norm);
    let mut fs = diag_filter([1e-3, 1e-3, 1e-3, 1e-6, 1e-6, 1e-6], [0.03, 0.0, -0.02, 0.0, 0.1, 0.0]);
    for _ in 0..10_000 {
        let s = random_state(&mut rng);
        let f = jacobian_f(&s, 0.0, rng.random_range(1e-4..1e-3)).unwrap();
        fs.p = covariance_step(&fs.p, &f, &q);
        let b = Matrix3::from_fn(|_, _| rng.random_range(-0.1..0.1));
        let r = b * b.transpose() + Matrix3::identity() * 1e-4;
        let z = Vector3::from_fn(|_, _| rng.random_range(-3.0..3.0));
        fs = update(&fs, &z, &r, &noise, &norm).unwrap().0;
        assert!((fs.p - fs.p.transpose()).abs().max() <= 1e-12 * fs.p.abs().max());
        let min = SymmetricEigen::new(fs.p).eigenvalues.min();
        assert!(min >= -1e-12 * fs.p.abs().max(), "{min:e}");
    }
}

#[test]
fn prediction_reproduces_truth_with_control() {
    let (norm, beta) = setup();
    let truth = HillState::dimensional(Vector3::new(1.0214, 0.0, -2.0429), Vector3::new(4.0493e-5, 4.0493e-5, 4.0493e-5)).to_normalized(&norm);
    let u = Vector3::new(0.3, -0.2, 0.1);
    let dt = norm.time_to_norm(5400.0);
    let opts = IntegratorOptions::default();
    let expect = propagate(&truth, (0.0, dt), |_, _| u, beta, &opts).unwrap().last().unwrap().1;
    let fs = FilterState::new(Vector6::from_column_slice(&truth.as_array()), Matrix6::identity() * 1e-6, 0.0).unwrap();
    let out = predict(&fs, &u, dt, beta, &NoiseConfig::default(), &norm, &opts).unwrap();
    assert_eq!(out.x_hat.as_slice(), &expect.as_array());
    assert!((out.t - dt).abs() < 1e-18);
}

#[test]
fn predict_only_gap_grows_uncertainty_without_jumps() {
    let (norm, beta) = setup();
    let s = HillState::dimensional(Vector3::new(0.5, 0.3, -2.0), Vector3::new(0.0, 4e-5, 2e-5)).to_normalized(&norm);
    let p0 = FilterState::from_dimensional(
        &s.to_dimensional(&norm),
        &Matrix6::from_diagonal(&Vector6::from_column_slice(&[1e-4, 1e-4, 1e-4, 1e-12, 1e-12, 1e-12])),
        0.0,
        &norm,
    )
    .unwrap();
    let opts = IntegratorOptions::default();
    let dt = norm.time_to_norm(5400.0);
    let mut fs = p0;
    let mut last_trace = fs.p_dimensional(&norm).fixed_view::<3, 3>(0, 0).trace();
    for _ in 0..4 {
        let next = predict(&fs, &Vector3::zeros(), dt, beta, &NoiseConfig::default(), &norm, &opts).unwrap();
        let dr = (next.x_hat - fs.x_hat).fixed_rows::<3>(0).norm() * norm.unit_length;
        // no larger than the distance flown at orbital speed
        assert!(dr < 1.0, "{dr}");
        let tr = next.p_dimensional(&norm).fixed_view::<3, 3>(0, 0).trace();
        assert!(tr > last_trace);
        last_trace = tr;
        fs = next;
    }
}

#[test]
fn perfect_measurements_keep_estimate_on_truth() {
    let (norm, beta) = setup();
    let opts = IntegratorOptions::default();
    let mut truth = HillState::dimensional(Vector3::new(1.0214, 0.0, -2.0429), Vector3::new(4.0493e-5, 4.0493e-5, 4.0493e-5)).to_normalized(&norm);
    let mut fs = FilterState::new(Vector6::from_column_slice(&truth.as_array()), Matrix6::identity() * 1e-8, 0.0).unwrap();
    let noise = NoiseConfig {
        q_diag: [0.0; 6],
        ..Default::default()
    };
    let dt = norm.time_to_norm(5400.0);
    for k in 0..10 {
        truth = propagate(&truth, (k as f64 * dt, (k + 1) as f64 * dt), |_, _| Vector3::zeros(), beta, &opts)
            .unwrap()
            .last()
            .unwrap()
            .1;
        fs = predict(&fs, &Vector3::zeros(), dt, beta, &noise, &norm, &opts).unwrap();
        let z = truth.to_dimensional(&norm).r;
        fs = update(&fs, &z, &(Matrix3::identity() * 1e-6), &noise, &norm).unwrap().0;
        let err = (fs.estimate().r - truth.r).norm() * norm.unit_length;
        assert!(err < 1e-9, "{err:e}");
    }
}

proptest! {
    #[test]
    fn error_bound_is_three_sigma_of_largest_axis(a in 0.0..10.0f64, b in 0.0..10.0f64, c in 0.0..10.0f64) {
        let p = Matrix3::from_diagonal(&Vector3::new(a, b, c));
        let expect = 3.0 * a.max(b).max(c).sqrt();
        prop_assert!((bound_3sigma(&p) - expect).abs() < 1e-12 * (1.0 + expect));
    }
}
