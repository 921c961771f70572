//! Augmented normalized Hill three-body dynamics.
//!
//! Everything that integrates runs in normalized units: lengths in
//! `(mu/mu_sun)^(1/3) * R`, times in `1/N` with `N = sqrt(mu_sun / R^3)`.
//! In these units the body's gravitational parameter is exactly one.
//! Scenario input and output stays in km, mm/s and hours and is converted
//! through [`Normalization`].

mod milankovitch;
mod propagate;

pub use milankovitch::{
    cart_to_milankovitch, control_influence, fto_lambda_for_radius, fto_state,
    hill_perturbation, milankovitch_rates, milankovitch_to_cart, MilankovitchState,
};
pub use propagate::{
    propagate, propagate_model, ForceModel, FreeSpace, HillForces, Integrator, IntegratorOptions,
    Trajectory,
};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Physical description of the small body, the Sun and the spacecraft area-to-mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyParams {
    /// Body gravitational parameter, km^3/s^2.
    pub mu: f64,
    /// Solar gravitational parameter, km^3/s^2.
    pub mu_sun: f64,
    /// Solar flux constant, kg km^3 / (s^2 m^2).
    pub g1: f64,
    /// Spacecraft mass-to-area ratio, kg/m^2.
    pub mass_to_area: f64,
    /// Sun to body distance, km.
    pub sun_distance: f64,
    /// Mean (volume-equivalent) radius, km.
    pub radius: f64,
    /// Triaxial shape ratios `a >= b >= c > 0`, scaled so that the
    /// volume-equivalent radius is `radius`.
    pub shape_ratios: [f64; 3],
    /// Spin axis in the Hill frame (unit norm).
    pub rotation_axis: [f64; 3],
    /// Synodic rotation period, s.
    pub rotation_period: f64,
}

impl BodyParams {
    /// Bennu-like body: dynamical parameters and spin of 101955 Bennu, spherical shape.
    pub fn bennu() -> Self {
        Self {
            mu: 4.8904e-9,
            mu_sun: 1.327e11,
            g1: 1.0e8,
            mass_to_area: 33.0,
            sun_distance: 1.720e8,
            radius: 0.241,
            shape_ratios: [1.0, 1.0, 1.0],
            rotation_axis: [0.0, 0.0, -1.0],
            rotation_period: 4.296057 * 3600.0,
        }
    }

    /// Bennu parameters with the measured triaxial ratios.
    pub fn bennu_triaxial() -> Self {
        Self {
            shape_ratios: [1.1051, 1.0769, 1.0],
            ..Self::bennu()
        }
    }

    pub fn with_shape(mut self, ratios: [f64; 3]) -> Self {
        self.shape_ratios = ratios;
        self
    }

    pub fn rotation_axis(&self) -> Vector3<f64> {
        Vector3::from(self.rotation_axis)
    }

    /// Principal semi-axes in km: `radius / (abc)^(1/3) * [a, b, c]`.
    pub fn semi_axes(&self) -> Vector3<f64> {
        let [a, b, c] = self.shape_ratios;
        let scale = self.radius / (a * b * c).cbrt();
        Vector3::new(a, b, c) * scale
    }

    pub fn is_sphere(&self) -> bool {
        let [a, b, c] = self.shape_ratios;
        a == b && b == c
    }

    pub fn validate(&self) -> Result<()> {
        let scalars = [
            ("mu", self.mu),
            ("mu_sun", self.mu_sun),
            ("g1", self.g1),
            ("mass_to_area", self.mass_to_area),
            ("sun_distance", self.sun_distance),
            ("radius", self.radius),
            ("rotation_period", self.rotation_period),
        ];
        for (name, value) in scalars {
            if !(value.is_finite() && value > 0.0) {
                return domain(format!("{name} must be positive and finite, got {value}"));
            }
        }
        let [a, b, c] = self.shape_ratios;
        if !(c > 0.0 && a >= b && b >= c && a.is_finite()) {
            return domain(format!(
                "shape ratios must satisfy a >= b >= c > 0, got {:?}",
                self.shape_ratios
            ));
        }
        let axis_norm = self.rotation_axis().norm();
        if (axis_norm - 1.0).abs() > 1e-12 {
            return domain(format!("rotation axis must be unit length, |axis| = {axis_norm}"));
        }
        Ok(())
    }
}

/// Unit system of the Hill problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    /// km per normalized length unit.
    pub unit_length: f64,
    /// seconds per normalized time unit.
    pub unit_time: f64,
}

impl Normalization {
    pub fn new(params: &BodyParams) -> Self {
        let unit_length = (params.mu / params.mu_sun).cbrt() * params.sun_distance;
        let mean_motion = (params.mu_sun / params.sun_distance.powi(3)).sqrt();
        Self {
            unit_length,
            unit_time: 1.0 / mean_motion,
        }
    }

    /// km/s per normalized velocity unit.
    pub fn unit_velocity(&self) -> f64 {
        self.unit_length / self.unit_time
    }

    /// km/s^2 per normalized acceleration unit.
    pub fn unit_accel(&self) -> f64 {
        self.unit_length / (self.unit_time * self.unit_time)
    }

    /// Rotation rate of the Hill frame, rad/s.
    pub fn mean_motion(&self) -> f64 {
        1.0 / self.unit_time
    }

    pub fn length_to_norm(&self, km: f64) -> f64 {
        km / self.unit_length
    }

    pub fn length_to_km(&self, x: f64) -> f64 {
        x * self.unit_length
    }

    pub fn time_to_norm(&self, seconds: f64) -> f64 {
        seconds / self.unit_time
    }

    pub fn time_to_seconds(&self, t: f64) -> f64 {
        t * self.unit_time
    }

    pub fn velocity_to_norm(&self, km_s: f64) -> f64 {
        km_s / self.unit_velocity()
    }

    pub fn velocity_to_km_s(&self, v: f64) -> f64 {
        v * self.unit_velocity()
    }

    /// Normalized acceleration to m/s^2.
    pub fn accel_to_m_s2(&self, a: f64) -> f64 {
        a * self.unit_accel() * 1e3
    }

    pub fn accel_from_m_s2(&self, a: f64) -> f64 {
        a * 1e-3 / self.unit_accel()
    }
}

/// Tag for the unit system a [`HillState`] is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Units {
    Normalized,
    /// km and km/s.
    Dimensional,
}

/// Position and velocity in the rotating Hill frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HillState {
    pub r: Vector3<f64>,
    pub v: Vector3<f64>,
    pub units: Units,
}

impl HillState {
    pub fn normalized(r: Vector3<f64>, v: Vector3<f64>) -> Self {
        Self {
            r,
            v,
            units: Units::Normalized,
        }
    }

    pub fn dimensional(r_km: Vector3<f64>, v_km_s: Vector3<f64>) -> Self {
        Self {
            r: r_km,
            v: v_km_s,
            units: Units::Dimensional,
        }
    }

    pub fn to_normalized(&self, n: &Normalization) -> Self {
        match self.units {
            Units::Normalized => *self,
            Units::Dimensional => Self::normalized(
                self.r / n.unit_length,
                self.v / n.unit_velocity(),
            ),
        }
    }

    pub fn to_dimensional(&self, n: &Normalization) -> Self {
        match self.units {
            Units::Dimensional => *self,
            Units::Normalized => Self::dimensional(
                self.r * n.unit_length,
                self.v * n.unit_velocity(),
            ),
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.r.x, self.r.y, self.r.z, self.v.x, self.v.y, self.v.z,
        ]
    }
}

/// SRP acceleration in both unit systems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrpBeta {
    pub nondim: f64,
    /// km/s^2
    pub dim: f64,
}

/// Constant SRP acceleration along the Sun-to-body line.
pub fn srp_beta(params: &BodyParams) -> Result<SrpBeta> {
    let positive = [
        params.mu,
        params.mu_sun,
        params.mass_to_area,
        params.sun_distance,
    ];
    if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || !(params.g1 >= 0.0) {
        return domain("SRP parameters must be positive");
    }
    let nondim = params.g1
        / (params.mass_to_area * params.mu_sun.powf(2.0 / 3.0) * params.mu.cbrt());
    let dim = params.g1 / (params.mass_to_area * params.sun_distance.powi(2));
    Ok(SrpBeta { nondim, dim })
}

/// Right-hand side of the normalized Hill equations with SRP and control.
pub fn anh3bp_accel(state: &HillState, beta: f64, u: &Vector3<f64>) -> Result<Vector3<f64>> {
    if state.units != Units::Normalized {
        return domain("anh3bp_accel expects a normalized state");
    }
    accel_unchecked(&state.r, &state.v, beta, u)
}

#[inline]
pub(crate) fn accel_unchecked(
    r: &Vector3<f64>,
    v: &Vector3<f64>,
    beta: f64,
    u: &Vector3<f64>,
) -> Result<Vector3<f64>> {
    let rn = r.norm();
    if !(rn > 0.0) {
        return Err(Error::Singular("position at the body center".into()));
    }
    let k = 1.0 / (rn * rn * rn);
    Ok(Vector3::new(
        2.0 * v.y + 3.0 * r.x - r.x * k + beta + u.x,
        -2.0 * v.x - r.y * k + u.y,
        -r.z - r.z * k + u.z,
    ))
}

/// Continuous-time Jacobian blocks of the Hill equations with respect to position.
pub fn gravity_gradient(r: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let rn = r.norm();
    if !(rn > 0.0) {
        return Err(Error::Singular("position at the body center".into()));
    }
    let r3 = rn.powi(3);
    let r5 = rn.powi(5);
    let mut g = -Matrix3::identity() / r3 + (r * r.transpose()) * (3.0 / r5);
    g[(0, 0)] += 3.0;
    g[(2, 2)] -= 1.0;
    Ok(g)
}

/// Largest bounded semi-major axis under constant SRP, km.
pub fn a_max(params: &BodyParams) -> Result<f64> {
    if [params.mu, params.mass_to_area, params.g1, params.sun_distance]
        .iter()
        .any(|v| !(v.is_finite() && *v > 0.0))
    {
        return domain("a_max parameters must be positive");
    }
    Ok(3f64.sqrt() / 4.0 * (params.mu * params.mass_to_area / params.g1).sqrt() * params.sun_distance)
}

/// Comparison of the worst-case J2 acceleration with point-mass gravity and SRP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct J2Report {
    pub j2: f64,
    /// km/s^2
    pub a_j2_max: f64,
    /// km/s^2
    pub beta_dim: f64,
    /// km/s^2, point-mass gravity at `d_sat`
    pub a_g: f64,
    pub ratio_to_gravity: f64,
    pub ratio_to_srp: f64,
}

/// Uniform-density triaxial ellipsoid J2 and its polar acceleration at `d_sat` km.
pub fn j2_feasibility_report(params: &BodyParams, d_sat: f64) -> Result<J2Report> {
    params.validate()?;
    if !(d_sat > params.radius) {
        return domain("d_sat must exceed the body radius");
    }
    let axes = semi_axes_sq(params);
    // I_z - (I_x + I_y)/2 over M, with I = M/5 (sum of the two other squared axes)
    let inertia_diff = (axes.x + axes.y - 2.0 * axes.z) / 10.0;
    let r_ref = params.radius;
    let j2 = inertia_diff / (r_ref * r_ref);
    let a_j2_max = 3.0 * j2 * params.mu * r_ref * r_ref / d_sat.powi(4);
    let beta_dim = srp_beta(params)?.dim;
    let a_g = params.mu / (d_sat * d_sat);
    Ok(J2Report {
        j2,
        a_j2_max,
        beta_dim,
        a_g,
        ratio_to_gravity: a_j2_max / a_g,
        ratio_to_srp: a_j2_max / beta_dim,
    })
}

fn semi_axes_sq(params: &BodyParams) -> Vector3<f64> {
    params.semi_axes().map(|a| a * a)
}

/// Cross-product matrix `[v]x`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}
