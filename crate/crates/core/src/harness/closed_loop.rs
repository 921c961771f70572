use nalgebra::{Matrix6, Vector3};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::scenario::{ScenarioConfig, SuccessCriterion};
use crate::control::{control, lyapunov_values, ConstraintParams, ControlOutput, ControllerConfig};
use crate::dynamics::{cart_to_milankovitch, propagate, srp_beta, HillState, IntegratorOptions, Normalization, Units};
use crate::ekf::{error_bound, predict, update, FilterState, NoiseConfig, Vector6};
use crate::error::{Error, Result};
use crate::opnav::{measure, Measurement};

/// Standard gravity used for propellant mass, m/s^2.
pub const G0: f64 = 9.80665;

/// Deterministic per-stream seed: word 0 of ChaCha8 seeded with `base` on stream `stream`.
pub fn stream_seed(base: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(stream);
    rng.next_u64()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DivergenceReason {
    MinRadius { r_km: f64 },
    MaxRadius { r_km: f64 },
    Cone { angle_deg: f64 },
}

impl std::fmt::Display for DivergenceReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DivergenceReason::MinRadius { r_km } => write!(f, "min radius ({r_km:.3} km)"),
            DivergenceReason::MaxRadius { r_km } => write!(f, "max radius ({r_km:.3} km)"),
            DivergenceReason::Cone { angle_deg } => write!(f, "keep-out cone ({angle_deg:.1} deg)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Success,
    /// Ran to the horizon inside the constraints without reaching the target.
    NotConverged,
    Diverged { reason: DivergenceReason, t_hr: f64 },
    Error { message: String },
}

impl Verdict {
    pub fn is_success(&self) -> bool {
        matches!(self, Verdict::Success)
    }

    pub fn label(&self) -> String {
        match self {
            Verdict::Success => "success".into(),
            Verdict::NotConverged => "not_converged".into(),
            Verdict::Diverged { reason, .. } => match reason {
                DivergenceReason::MinRadius { .. } => "diverged_min_radius".into(),
                DivergenceReason::MaxRadius { .. } => "diverged_max_radius".into(),
                DivergenceReason::Cone { .. } => "diverged_cone".into(),
            },
            Verdict::Error { .. } => "error".into(),
        }
    }
}

/// Angle between `r` and +x, degrees.
pub fn cone_angle_deg(r: &Vector3<f64>) -> f64 {
    (r.x / r.norm()).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Position-cone and range test on a truth state in either unit system.
/// `cp` holds normalized radii.
pub fn detect_divergence(truth: &HillState, cp: &ConstraintParams, norm: &Normalization) -> Option<DivergenceReason> {
    let r = match truth.units {
        Units::Normalized => truth.r,
        Units::Dimensional => truth.r / norm.unit_length,
    };
    let n = r.norm();
    let km = norm.length_to_km(n);
    if n < cp.r_min {
        return Some(DivergenceReason::MinRadius { r_km: km });
    }
    if n > cp.r_max {
        return Some(DivergenceReason::MaxRadius { r_km: km });
    }
    let angle = cone_angle_deg(&r);
    if angle < cp.alpha.to_degrees() {
        return Some(DivergenceReason::Cone { angle_deg: angle });
    }
    None
}

/// `V(T) <= max(fraction * V(0), v_floor)` on a trial that did not diverge.
pub fn success_check(diverged: bool, v0: f64, v_final: f64, crit: &SuccessCriterion) -> bool {
    !diverged && v_final <= (crit.fraction * v0).max(crit.v_floor)
}

/// Control held constant over `[t0_s, t0_s + dt_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlSegment {
    pub t0_s: f64,
    pub dt_s: f64,
    pub u_m_s2: [f64; 3],
}

impl ControlSegment {
    pub fn magnitude(&self) -> f64 {
        Vector3::from(self.u_m_s2).norm()
    }
}

/// `(delta_v [m/s], delta_m [kg])` with `delta_v = sum |u| dt` and
/// `delta_m = m delta_v / (Isp g0)`.
pub fn fuel_mass(control_history: &[ControlSegment], isp_s: f64, m_sc_kg: f64) -> Result<(f64, f64)> {
    if !(isp_s > 0.0 && m_sc_kg > 0.0) {
        return Err(Error::Domain("Isp and spacecraft mass must be positive".into()));
    }
    let dv: f64 = control_history.iter().map(|s| s.magnitude() * s.dt_s).sum();
    Ok((dv, m_sc_kg * dv / (isp_s * G0)))
}

/// Trapezoid rule on the segment-start samples of `|u|`, closed with the last held value.
pub fn delta_v_trapezoid(control_history: &[ControlSegment]) -> f64 {
    let mags: Vec<f64> = control_history.iter().map(ControlSegment::magnitude).collect();
    control_history
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let next = mags.get(i + 1).copied().unwrap_or(mags[i]);
            0.5 * (mags[i] + next) * s.dt_s
        })
        .sum()
}

/// One measurement epoch of a closed-loop run, dimensional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t_hr: f64,
    pub truth_r_km: [f64; 3],
    pub truth_v_km_s: [f64; 3],
    pub est_r_km: [f64; 3],
    pub est_v_km_s: [f64; 3],
    /// Measurement taken at this epoch, absent at the start and when invalid.
    pub meas_km: Option<[f64; 3]>,
    pub meas_bound_km: Option<f64>,
    pub n_points: usize,
    pub err_norm_km: f64,
    pub bound_km: f64,
    /// Control applied from this epoch, zero at the last one.
    pub u_m_s2: [f64; 3],
    pub v: f64,
    pub v_hat: f64,
    pub g: [f64; 3],
    pub p: [f64; 3],
    pub angle_deg: f64,
    pub saturated: bool,
}

impl StepRecord {
    pub fn valid(&self) -> bool {
        self.meas_km.is_some()
    }

    pub fn inside_envelope(&self) -> bool {
        self.err_norm_km <= self.bound_km
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub name: String,
    pub seed: u64,
    pub verdict: Verdict,
    pub history: Vec<StepRecord>,
    pub controls: Vec<ControlSegment>,
    /// Rectangle sum of the held controls, m/s.
    pub delta_v: f64,
    pub delta_v_trapezoid: f64,
    pub fuel_mass: f64,
    pub max_accel: f64,
    /// Truth Lyapunov value at start and end, normalized.
    pub v0: f64,
    pub v_final: f64,
}

impl TrialResult {
    /// `(epochs with truth error inside the EKF 3-sigma bound, epochs)`.
    pub fn envelope_counts(&self) -> (usize, usize) {
        let inside = self.history.iter().filter(|s| s.inside_envelope()).count();
        (inside, self.history.len())
    }

    pub fn mean_accel(&self) -> f64 {
        let t: f64 = self.controls.iter().map(|s| s.dt_s).sum();
        if t > 0.0 {
            self.delta_v / t
        } else {
            0.0
        }
    }
}

struct Loop {
    norm: Normalization,
    beta: f64,
    ctrl: ControllerConfig,
    cp: ConstraintParams,
    limits: ConstraintParams,
    noise: NoiseConfig,
    opts: IntegratorOptions,
}

impl Loop {
    fn control_at(&self, fs: &FilterState) -> Result<ControlOutput> {
        let est = fs.estimate();
        let x = cart_to_milankovitch(&est, 1.0)?.slow();
        control(&x, &self.ctrl, &self.cp, &est.r, &est.v)
    }

    fn truth_v(&self, truth: &HillState) -> Result<f64> {
        let x = cart_to_milankovitch(truth, 1.0)?.slow();
        Ok(lyapunov_values(&x, &self.ctrl, &self.cp)?.0)
    }
}

/// Closed loop: control from the filter estimate, zero-order hold over each
/// measurement interval, truth propagation, rendered horizon measurement,
/// filter predict and update. Stops at the first constraint violation.
pub fn run_closed_loop(cfg: &ScenarioConfig) -> TrialResult {
    let mut result = TrialResult {
        name: cfg.name.clone(),
        seed: cfg.seed,
        verdict: Verdict::NotConverged,
        history: Vec::new(),
        controls: Vec::new(),
        delta_v: 0.0,
        delta_v_trapezoid: 0.0,
        fuel_mass: 0.0,
        max_accel: 0.0,
        v0: f64::NAN,
        v_final: f64::NAN,
    };
    if let Err(e) = run_inner(cfg, &mut result) {
        result.verdict = Verdict::Error { message: e.to_string() };
    }
    if !result.controls.is_empty() {
        let (dv, dm) = fuel_mass(&result.controls, cfg.spacecraft.isp_s, cfg.spacecraft.mass_kg).unwrap_or((f64::NAN, f64::NAN));
        result.delta_v = dv;
        result.fuel_mass = dm;
        result.delta_v_trapezoid = delta_v_trapezoid(&result.controls);
        result.max_accel = result.controls.iter().map(ControlSegment::magnitude).fold(0.0, f64::max);
    }
    result
}

fn run_inner(cfg: &ScenarioConfig, out: &mut TrialResult) -> Result<()> {
    cfg.validate()?;
    let norm = cfg.normalization();
    let body = cfg.imaging_body();
    let substeps = cfg.control_substeps;
    let mut noise = cfg.noise;
    for q in noise.q_diag.iter_mut() {
        *q /= substeps as f64;
    }
    let lp = Loop {
        norm,
        beta: srp_beta(&cfg.body)?.nondim,
        ctrl: cfg.controller()?,
        cp: cfg.constraint_params(),
        // verdicts always use the cone, whatever the controller weights
        limits: cfg.constraints.params(&cfg.body, &norm, super::ControllerMode::Constrained),
        noise,
        opts: IntegratorOptions {
            dense: true,
            ..cfg.integrator
        },
    };

    let truth0 = cfg.initial_truth();
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, 0));
    let sigma_km = cfg.initial_estimate_sigma_m * 1e-3;
    let offset = if sigma_km > 0.0 {
        let n = Normal::new(0.0, sigma_km).map_err(|e| Error::Config(e.to_string()))?;
        Vector3::from_fn(|_, _| n.sample(&mut rng))
    } else {
        Vector3::zeros()
    };
    let est0 = HillState::dimensional(truth0.r + offset, truth0.v);
    let p0 = Matrix6::from_diagonal(&Vector6::from_column_slice(&cfg.p0_diag));
    let mut fs = FilterState::from_dimensional(&est0, &p0, 0.0, &norm)?;
    let mut truth = truth0.to_normalized(&norm);

    if let Some(reason) = detect_divergence(&truth, &lp.limits, &norm) {
        out.verdict = Verdict::Diverged { reason, t_hr: 0.0 };
        return Ok(());
    }
    out.v0 = lp.truth_v(&truth)?;

    let n_steps = cfg.n_steps();
    let interval_s = cfg.measurement_interval_s();
    let dt = norm.time_to_norm(interval_s);
    let h = dt / substeps as f64;
    let mut last_meas: Option<(Vector3<f64>, f64)> = None;
    let mut last_points = 0;

    for k in 0..=n_steps {
        let t = k as f64 * dt;
        let c = lp.control_at(&fs).map_err(|e| Error::Filter(format!("controller at step {k}: {e}")))?;
        let last = k == n_steps;
        out.history.push(record(&lp, t, &truth, &fs, &c, last, last_meas, last_points));
        if last {
            break;
        }
        for j in 0..substeps {
            let t0 = t + h * j as f64;
            let u = if j == 0 { c.u } else { lp.control_at(&fs)?.u };
            let traj = propagate(&truth, (t0, t0 + h), move |_, _| u, lp.beta, &lp.opts)?;
            for (ti, s) in traj.times.iter().zip(&traj.states) {
                if let Some(reason) = detect_divergence(s, &lp.limits, &norm) {
                    out.verdict = Verdict::Diverged {
                        reason,
                        t_hr: norm.time_to_seconds(*ti) / 3600.0,
                    };
                    return Ok(());
                }
            }
            truth = traj.last().ok_or_else(|| Error::Filter("empty truth arc".into()))?.1;
            fs = predict(&fs, &u, h, lp.beta, &lp.noise, &norm, &cfg.integrator)?;
            out.controls.push(ControlSegment {
                t0_s: norm.time_to_seconds(t0),
                dt_s: interval_s / substeps as f64,
                u_m_s2: (u * norm.unit_accel() * 1e3).into(),
            });
        }

        let t_s = (k + 1) as f64 * interval_s;
        let image_t = if cfg.shape.rotating() { t_s } else { 0.0 };
        let m = measure(&truth.to_dimensional(&norm), &body, image_t, stream_seed(cfg.seed, k as u64 + 1), &cfg.opnav)?;
        last_points = m.n_points();
        last_meas = None;
        if let Measurement::Valid(m) = m {
            let (next, _) = update(&fs, &m.z_hill, &m.r_hill, &lp.noise, &norm)?;
            fs = next;
            last_meas = Some((m.z_hill, crate::ekf::bound_3sigma(&m.r_hill)));
        }
    }

    out.v_final = lp.truth_v(&truth)?;
    out.verdict = if success_check(false, out.v0, out.v_final, &cfg.success) {
        Verdict::Success
    } else {
        Verdict::NotConverged
    };
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn record(
    lp: &Loop,
    t: f64,
    truth: &HillState,
    fs: &FilterState,
    c: &ControlOutput,
    last: bool,
    meas: Option<(Vector3<f64>, f64)>,
    n_points: usize,
) -> StepRecord {
    let norm = &lp.norm;
    let td = truth.to_dimensional(norm);
    let ed = fs.estimate().to_dimensional(norm);
    let u = if last { Vector3::zeros() } else { c.u * norm.unit_accel() * 1e3 };
    StepRecord {
        t_hr: norm.time_to_seconds(t) / 3600.0,
        truth_r_km: td.r.into(),
        truth_v_km_s: td.v.into(),
        est_r_km: ed.r.into(),
        est_v_km_s: ed.v.into(),
        meas_km: meas.map(|m| m.0.into()),
        meas_bound_km: meas.map(|m| m.1),
        n_points,
        err_norm_km: (ed.r - td.r).norm(),
        bound_km: error_bound(fs, norm),
        u_m_s2: u.into(),
        v: c.v,
        v_hat: c.v_hat,
        g: c.g.into(),
        p: c.p.into(),
        angle_deg: cone_angle_deg(&td.r),
        saturated: c.saturated && !last,
    }
}
