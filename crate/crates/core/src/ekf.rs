//! Extended Kalman filter on the normalized Hill state with position-only
//! measurements.

use nalgebra::{Matrix3, Matrix6, SMatrix, SVector, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::{gravity_gradient, propagate, HillState, IntegratorOptions, Normalization, Trajectory, Units};
use crate::error::{domain, Error, Result};

pub type Vector6 = SVector<f64, 6>;

/// Estimate, covariance and epoch, all normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub x_hat: Vector6,
    pub p: Matrix6<f64>,
    pub t: f64,
}

impl FilterState {
    pub fn new(x_hat: Vector6, p: Matrix6<f64>, t: f64) -> Result<Self> {
        if x_hat.iter().chain(p.iter()).any(|v| !v.is_finite()) {
            return domain("filter state must be finite");
        }
        Ok(Self {
            x_hat,
            p: symmetrize(&p),
            t,
        })
    }

    /// From a dimensional estimate and a covariance in km^2 and (km/s)^2.
    pub fn from_dimensional(state: &HillState, p_dim: &Matrix6<f64>, t: f64, norm: &Normalization) -> Result<Self> {
        let s = state.to_normalized(norm);
        let x = Vector6::from_column_slice(&s.as_array());
        let m = scaling(norm);
        Self::new(x, m * p_dim * m, t)
    }

    pub fn estimate(&self) -> HillState {
        HillState::normalized(
            Vector3::new(self.x_hat[0], self.x_hat[1], self.x_hat[2]),
            Vector3::new(self.x_hat[3], self.x_hat[4], self.x_hat[5]),
        )
    }

    /// Covariance in km^2 and (km/s)^2.
    pub fn p_dimensional(&self, norm: &Normalization) -> Matrix6<f64> {
        let m = scaling(norm).try_inverse().expect("diagonal scaling");
        m * self.p * m
    }
}

/// Dimensional-to-normalized diagonal scaling.
fn scaling(norm: &Normalization) -> Matrix6<f64> {
    let l = 1.0 / norm.unit_length;
    let v = 1.0 / norm.unit_velocity();
    Matrix6::from_diagonal(&Vector6::from_column_slice(&[l, l, l, v, v, v]))
}

fn symmetrize<const N: usize>(p: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (p + p.transpose()) * 0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Process noise diagonal, km^2 then (km/s)^2, added once per prediction.
    pub q_diag: [f64; 6],
    /// Optional minimum measurement variance on each axis, km^2.
    pub r_floor: Option<f64>,
    /// Longest covariance sub-step, seconds.
    pub max_substep_s: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            q_diag: [1e-3, 1e-3, 1e-3, 1e-6, 1e-6, 1e-6],
            r_floor: None,
            max_substep_s: 60.0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q_diag.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
            return Err(Error::Config("process noise must be non-negative".into()));
        }
        if let Some(f) = self.r_floor {
            if !(f.is_finite() && f >= 0.0) {
                return Err(Error::Config("measurement floor must be non-negative".into()));
            }
        }
        if !(self.max_substep_s > 0.0) {
            return Err(Error::Config("covariance sub-step must be positive".into()));
        }
        Ok(())
    }

    /// Process noise in normalized units.
    pub fn q_normalized(&self, norm: &Normalization) -> Matrix6<f64> {
        let m = scaling(norm);
        m * Matrix6::from_diagonal(&Vector6::from_column_slice(&self.q_diag)) * m
    }
}

/// Continuous-time Jacobian of the normalized Hill equations.
pub fn jacobian_a(r: &Vector3<f64>) -> Result<Matrix6<f64>> {
    let g = gravity_gradient(r)?;
    let mut a = Matrix6::zeros();
    a.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
    a.fixed_view_mut::<3, 3>(3, 0).copy_from(&g);
    a[(3, 4)] = 2.0;
    a[(4, 3)] = -2.0;
    Ok(a)
}

/// Discrete transition `I + A dt` about a normalized state.
///
/// The Hill Jacobian does not depend on SRP, so `beta` only documents the model.
pub fn jacobian_f(state: &HillState, _beta: f64, dt: f64) -> Result<Matrix6<f64>> {
    if state.units != Units::Normalized {
        return domain("jacobian_f expects a normalized state");
    }
    Ok(Matrix6::identity() + jacobian_a(&state.r)? * dt)
}

/// `F P F^T + Q`, symmetrized.
pub fn covariance_step(p: &Matrix6<f64>, f: &Matrix6<f64>, q: &Matrix6<f64>) -> Matrix6<f64> {
    symmetrize(&(f * p * f.transpose() + q))
}

/// State at time `t` along a dense trajectory, linear between samples.
fn sample(traj: &Trajectory, t: f64) -> HillState {
    let i = traj.times.partition_point(|&ti| ti <= t).clamp(1, traj.times.len() - 1);
    let (t0, t1) = (traj.times[i - 1], traj.times[i]);
    let w = if t1 > t0 { ((t - t0) / (t1 - t0)).clamp(0.0, 1.0) } else { 0.0 };
    let (a, b) = (traj.states[i - 1], traj.states[i]);
    HillState::normalized(a.r + (b.r - a.r) * w, a.v + (b.v - a.v) * w)
}

/// Time update over `dt` (normalized) with a constant control `u` (normalized).
///
/// The estimate follows the full nonlinear dynamics; the covariance is carried
/// through sub-steps no longer than `noise.max_substep_s`, then `Q` is added.
#[allow(clippy::too_many_arguments)]
pub fn predict(
    fs: &FilterState,
    u: &Vector3<f64>,
    dt: f64,
    beta: f64,
    noise: &NoiseConfig,
    norm: &Normalization,
    opts: &IntegratorOptions,
) -> Result<FilterState> {
    if !(dt > 0.0) {
        return domain("prediction interval must be positive");
    }
    let dense = IntegratorOptions { dense: true, ..*opts };
    let uu = *u;
    let traj = propagate(&fs.estimate(), (fs.t, fs.t + dt), move |_, _| uu, beta, &dense)
        .map_err(|e| Error::Filter(format!("prediction failed: {e}")))?;
    let (_, end) = traj.last().ok_or_else(|| Error::Filter("empty prediction".into()))?;

    let max_sub = norm.time_to_norm(noise.max_substep_s);
    let n = (dt / max_sub).ceil().max(1.0) as usize;
    let h = dt / n as f64;
    let mut phi = Matrix6::identity();
    for k in 0..n {
        let s = sample(&traj, fs.t + h * k as f64);
        let f = Matrix6::identity() + jacobian_a(&s.r).map_err(|e| Error::Filter(e.to_string()))? * h;
        phi = f * phi;
    }
    let p = covariance_step(&fs.p, &phi, &noise.q_normalized(norm));
    FilterState::new(Vector6::from_column_slice(&end.as_array()), p, fs.t + dt)
}

/// Result of a measurement update.
#[derive(Debug, Clone, PartialEq)]
pub enum UpdateOutcome {
    Applied { innovation: Vector3<f64> },
    Skipped { reason: String },
}

/// Position update with `z_km` (spacecraft minus body, Hill frame) and its
/// covariance in km^2. Joseph form, `H = [I 0]`.
pub fn update(
    fs: &FilterState,
    z_km: &Vector3<f64>,
    r_km2: &Matrix3<f64>,
    noise: &NoiseConfig,
    norm: &Normalization,
) -> Result<(FilterState, UpdateOutcome)> {
    if z_km.iter().chain(r_km2.iter()).any(|v| !v.is_finite()) {
        return Ok((*fs, UpdateOutcome::Skipped { reason: "non-finite measurement".into() }));
    }
    let l = norm.unit_length;
    let z = z_km / l;
    let mut r = symmetrize(r_km2) / (l * l);
    if let Some(floor) = noise.r_floor {
        let f = floor / (l * l);
        for i in 0..3 {
            r[(i, i)] = r[(i, i)].max(f);
        }
    }
    let mut h = SMatrix::<f64, 3, 6>::zeros();
    h.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
    let y = z - h * fs.x_hat;
    let s = symmetrize(&(h * fs.p * h.transpose() + r));
    let s_inv = match s.cholesky() {
        Some(c) => c.inverse(),
        None => {
            return Ok((*fs, UpdateOutcome::Skipped { reason: "innovation covariance not positive definite".into() }));
        }
    };
    let k = fs.p * h.transpose() * s_inv;
    let ikh = Matrix6::identity() - k * h;
    let p = ikh * fs.p * ikh.transpose() + k * r * k.transpose();
    let out = FilterState::new(fs.x_hat + k * y, p, fs.t)?;
    Ok((out, UpdateOutcome::Applied { innovation: y * l }))
}

/// `3 sqrt(lambda_max)` of a 3x3 covariance.
pub fn bound_3sigma(p_r: &Matrix3<f64>) -> f64 {
    3.0 * SymmetricEigen::new(symmetrize(p_r)).eigenvalues.max().max(0.0).sqrt()
}

/// Position error bound of the filter, km.
pub fn error_bound(fs: &FilterState, norm: &Normalization) -> f64 {
    let pr: Matrix3<f64> = fs.p.fixed_view::<3, 3>(0, 0).into_owned();
    bound_3sigma(&pr) * norm.unit_length
}
