use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::control::{ConstraintParams, ControllerConfig, Slow, OPEN_ORBIT_ECC_CAP};
use crate::dynamics::{cart_to_milankovitch, BodyParams, HillState, IntegratorOptions, Normalization};
use crate::ekf::NoiseConfig;
use crate::error::{Error, Result};
use crate::opnav::OpNavConfig;

/// Body figure used for imaging. Dynamics always treat the body as a point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeSpec {
    Sphere,
    Ellipsoid { ratios: [f64; 3], rotating: bool },
}

impl ShapeSpec {
    pub fn ratios(&self) -> [f64; 3] {
        match self {
            ShapeSpec::Sphere => [1.0; 3],
            ShapeSpec::Ellipsoid { ratios, .. } => *ratios,
        }
    }

    pub fn rotating(&self) -> bool {
        matches!(self, ShapeSpec::Ellipsoid { rotating: true, .. })
    }
}

/// Desired slow elements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSpec {
    /// Circular orbit of radius `radius_km` whose normal makes
    /// `cone_clearance_deg` with the y-z plane, tilted toward +x. The normal's
    /// y-z part points at `yz_azimuth_deg` from +z toward -y, or along the
    /// initial orbit normal's y-z part when absent.
    InclinedCircular {
        radius_km: f64,
        cone_clearance_deg: f64,
        #[serde(default)]
        yz_azimuth_deg: Option<f64>,
    },
    /// Circular terminator orbit, normal along `sign * x`.
    Terminator { radius_km: f64, sign: f64 },
    /// Explicit normalized `h` and `e`.
    Elements { h: [f64; 3], e: [f64; 3] },
}

impl TargetSpec {
    /// Normalized slow target for an initial (normalized) state.
    pub fn slow(&self, initial: &HillState, norm: &Normalization) -> Result<Slow> {
        let bad = |m: &str| Err(Error::Config(format!("target: {m}")));
        match *self {
            TargetSpec::InclinedCircular {
                radius_km,
                cone_clearance_deg,
                yz_azimuth_deg,
            } => {
                if !(radius_km > 0.0 && cone_clearance_deg.abs() < 90.0) {
                    return bad("need radius > 0 and |clearance| < 90 deg");
                }
                let yz = match yz_azimuth_deg {
                    Some(az) => {
                        let az = az.to_radians();
                        Vector3::new(0.0, -az.sin(), az.cos())
                    }
                    None => {
                        let h0 = cart_to_milankovitch(initial, 1.0)?.h;
                        let yz = Vector3::new(0.0, h0.y, h0.z);
                        if yz.norm() > 1e-12 {
                            yz.normalize()
                        } else {
                            Vector3::z()
                        }
                    }
                };
                let c = cone_clearance_deg.to_radians();
                let h_hat = Vector3::x() * c.sin() + yz * c.cos();
                let h = h_hat * norm.length_to_norm(radius_km).sqrt();
                Ok(Slow::from_column_slice(&[h.x, h.y, h.z, 0.0, 0.0, 0.0]))
            }
            TargetSpec::Terminator { radius_km, sign } => {
                if !(radius_km > 0.0 && (sign == 1.0 || sign == -1.0)) {
                    return bad("need radius > 0 and sign = +1 or -1");
                }
                let h = sign * norm.length_to_norm(radius_km).sqrt();
                Ok(Slow::from_column_slice(&[h, 0.0, 0.0, 0.0, 0.0, 0.0]))
            }
            TargetSpec::Elements { h, e } => {
                let hv = Vector3::from(h);
                if !(hv.norm() > 0.0 && Vector3::from(e).norm() < 1.0) {
                    return bad("need |h| > 0 and |e| < 1");
                }
                Ok(Slow::from_column_slice(&[h[0], h[1], h[2], e[0], e[1], e[2]]))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerMode {
    Constrained,
    /// Cone weight forced to zero.
    Unconstrained,
}

/// Path constraints in scenario units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstraintSpec {
    /// Minimum radius in body radii.
    pub r_min_radii: f64,
    /// Maximum radius in body radii.
    pub r_max_radii: f64,
    pub cone_half_angle_deg: f64,
    pub weights: [f64; 3],
    pub sharpness: [f64; 3],
    pub epsilon: f64,
    pub exponent_ceiling: f64,
    pub ecc_cap: f64,
}

impl Default for ConstraintSpec {
    fn default() -> Self {
        Self {
            r_min_radii: 2.0,
            r_max_radii: 25.0,
            cone_half_angle_deg: 30.0,
            weights: [1.0, 1.0, 10.0],
            sharpness: [1.0; 3],
            epsilon: 0.0,
            exponent_ceiling: 50.0,
            ecc_cap: OPEN_ORBIT_ECC_CAP,
        }
    }
}

impl ConstraintSpec {
    pub fn r_min_km(&self, body: &BodyParams) -> f64 {
        self.r_min_radii * body.radius
    }

    pub fn r_max_km(&self, body: &BodyParams) -> f64 {
        self.r_max_radii * body.radius
    }

    /// Normalized controller constraints.
    pub fn params(&self, body: &BodyParams, norm: &Normalization, mode: ControllerMode) -> ConstraintParams {
        let cp = ConstraintParams {
            r_min: norm.length_to_norm(self.r_min_km(body)),
            r_max: norm.length_to_norm(self.r_max_km(body)),
            alpha: self.cone_half_angle_deg.to_radians(),
            weights: self.weights,
            sharpness: self.sharpness,
            epsilon: self.epsilon,
            exponent_ceiling: self.exponent_ceiling,
            ecc_cap: self.ecc_cap,
        };
        match mode {
            ControllerMode::Constrained => cp,
            ControllerMode::Unconstrained => cp.unconstrained(),
        }
    }
}

/// Verdict threshold on the terminal Lyapunov value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuccessCriterion {
    pub fraction: f64,
    /// Normalized `V` below which a run counts as converged regardless of `V(0)`.
    pub v_floor: f64,
}

impl Default for SuccessCriterion {
    fn default() -> Self {
        Self {
            fraction: 0.1,
            v_floor: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Spacecraft {
    pub mass_kg: f64,
    pub isp_s: f64,
}

impl Default for Spacecraft {
    fn default() -> Self {
        Self {
            mass_kg: 600.0,
            isp_s: 3000.0,
        }
    }
}

/// A closed-loop scenario, in km, mm/s, m/s^2, hours and days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default = "BodyParams::bennu")]
    pub body: BodyParams,
    #[serde(default = "sphere")]
    pub shape: ShapeSpec,
    pub initial_position_km: [f64; 3],
    pub initial_velocity_mm_s: [f64; 3],
    /// Per-axis standard deviation of the initial position estimate error, m.
    #[serde(default = "default_sigma_m")]
    pub initial_estimate_sigma_m: f64,
    /// Initial covariance diagonal, km^2 then (km/s)^2.
    #[serde(default = "default_p0")]
    pub p0_diag: [f64; 6],
    pub target: TargetSpec,
    /// Diagonal Lyapunov gain, normalized units.
    pub gains: [f64; 6],
    #[serde(default)]
    pub constraints: ConstraintSpec,
    #[serde(default = "constrained")]
    pub controller_mode: ControllerMode,
    #[serde(default = "default_u_max")]
    pub u_max_m_s2: f64,
    #[serde(default = "default_interval")]
    pub measurement_interval_h: f64,
    /// Control evaluations per measurement interval.
    #[serde(default = "one")]
    pub control_substeps: usize,
    pub duration_days: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub opnav: OpNavConfig,
    #[serde(default)]
    pub integrator: IntegratorOptions,
    #[serde(default)]
    pub success: SuccessCriterion,
    #[serde(default)]
    pub spacecraft: Spacecraft,
}

fn sphere() -> ShapeSpec {
    ShapeSpec::Sphere
}
fn default_sigma_m() -> f64 {
    30.0
}
fn default_p0() -> [f64; 6] {
    [3.2761, 3.2761, 3.2761, 8.544e-17, 8.544e-17, 8.544e-17]
}
fn constrained() -> ControllerMode {
    ControllerMode::Constrained
}
fn default_u_max() -> f64 {
    1e-5
}
fn default_interval() -> f64 {
    1.5
}
fn one() -> usize {
    1
}

impl ScenarioConfig {
    /// Flyby past the dark side toward a circular orbit inclined 31 deg from the cone axis.
    pub fn stationkeeping() -> Self {
        Self {
            name: "stationkeeping".into(),
            body: BodyParams::bennu(),
            shape: ShapeSpec::Sphere,
            initial_position_km: [1.0214, 0.0, -2.0429],
            initial_velocity_mm_s: [40.493, 40.493, 40.493],
            initial_estimate_sigma_m: default_sigma_m(),
            p0_diag: default_p0(),
            target: TargetSpec::InclinedCircular {
                radius_km: 2.0429,
                cone_clearance_deg: 31.0,
                yz_azimuth_deg: Some(0.0),
            },
            gains: [1e-2, 1e-3, 1e-3, 1e-4, 1e-3, 1e-4],
            constraints: ConstraintSpec::default(),
            controller_mode: ControllerMode::Constrained,
            u_max_m_s2: default_u_max(),
            measurement_interval_h: default_interval(),
            control_substeps: 1,
            duration_days: 3.0,
            seed: 0,
            noise: NoiseConfig::default(),
            opnav: OpNavConfig::default(),
            integrator: IntegratorOptions::default(),
            success: SuccessCriterion::default(),
            spacecraft: Spacecraft::default(),
        }
    }

    /// Inbound from 4.6 km and circularization on a terminator orbit.
    pub fn approach() -> Self {
        Self {
            name: "approach".into(),
            initial_position_km: [0.0, 0.0, -4.5964],
            initial_velocity_mm_s: [-4.8927, 0.0, 2.4464],
            target: TargetSpec::Terminator {
                radius_km: 2.0429,
                sign: 1.0,
            },
            gains: [1e-3, 1e-3, 1e-3, 1e-3, 1e-7, 1e-7],
            constraints: ConstraintSpec {
                weights: [1.0, 1.0, 100.0],
                ..ConstraintSpec::default()
            },
            duration_days: 5.0,
            ..Self::stationkeeping()
        }
    }

    /// Built-in scenario by name.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "stationkeeping" => Some(Self::stationkeeping()),
            "approach" => Some(Self::approach()),
            _ => None,
        }
    }

    pub fn with_mode(mut self, mode: ControllerMode) -> Self {
        self.controller_mode = mode;
        self
    }

    pub fn with_shape(mut self, shape: ShapeSpec) -> Self {
        self.shape = shape;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Body with the imaging shape applied.
    pub fn imaging_body(&self) -> BodyParams {
        self.body.clone().with_shape(self.shape.ratios())
    }

    pub fn normalization(&self) -> Normalization {
        Normalization::new(&self.body)
    }

    pub fn initial_truth(&self) -> HillState {
        HillState::dimensional(
            Vector3::from(self.initial_position_km),
            Vector3::from(self.initial_velocity_mm_s) * 1e-6,
        )
    }

    pub fn constraint_params(&self) -> ConstraintParams {
        self.constraints
            .params(&self.body, &self.normalization(), self.controller_mode)
    }

    pub fn controller(&self) -> Result<ControllerConfig> {
        let norm = self.normalization();
        let target = self.target.slow(&self.initial_truth().to_normalized(&norm), &norm)?;
        let cfg = ControllerConfig::diagonal(self.gains, target, norm.accel_from_m_s2(self.u_max_m_s2));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn measurement_interval_s(&self) -> f64 {
        self.measurement_interval_h * 3600.0
    }

    /// Number of measurement intervals covering the duration.
    pub fn n_steps(&self) -> usize {
        (self.duration_days * 24.0 / self.measurement_interval_h).round().max(1.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if !(self.duration_days > 0.0 && self.duration_days.is_finite()) {
            return cfg(format!("duration must be positive, got {}", self.duration_days));
        }
        if !(self.measurement_interval_h > 0.0 && self.measurement_interval_h.is_finite()) {
            return cfg(format!("measurement interval must be positive, got {}", self.measurement_interval_h));
        }
        if self.control_substeps == 0 {
            return cfg("control_substeps must be at least 1".into());
        }
        self.imaging_body().validate().map_err(|e| Error::Config(e.to_string()))?;
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.initial_position_km) || !finite(&self.initial_velocity_mm_s) {
            return cfg("initial state must be finite".into());
        }
        if !(self.initial_estimate_sigma_m >= 0.0 && self.initial_estimate_sigma_m.is_finite()) {
            return cfg("initial estimate sigma must be non-negative".into());
        }
        if self.p0_diag.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return cfg("P0 diagonal must be non-negative".into());
        }
        if !(self.u_max_m_s2 > 0.0) {
            return cfg("u_max must be positive".into());
        }
        if !(self.success.fraction >= 0.0 && self.success.v_floor >= 0.0) {
            return cfg("success thresholds must be non-negative".into());
        }
        if !(self.spacecraft.mass_kg > 0.0 && self.spacecraft.isp_s > 0.0) {
            return cfg("spacecraft mass and Isp must be positive".into());
        }
        self.noise.validate()?;
        self.opnav.intrinsics.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.constraint_params().validate()?;
        self.controller()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for cfg in [ScenarioConfig::stationkeeping(), ScenarioConfig::approach()] {
            cfg.validate().unwrap();
            assert_eq!(ScenarioConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        }
        assert_eq!(ScenarioConfig::stationkeeping().n_steps(), 48);
        assert_eq!(ScenarioConfig::approach().n_steps(), 80);
    }

    #[test]
    fn minimal_json_takes_defaults() {
        let text = r#"{"name":"x","initial_position_km":[0,0,-3],"initial_velocity_mm_s":[30,0,0],
            "target":{"kind":"terminator","radius_km":2.0,"sign":1},"gains":[1e-3,1e-3,1e-3,1e-3,1e-3,1e-3],
            "duration_days":1}"#;
        let cfg = ScenarioConfig::from_json(text).unwrap();
        assert_eq!(cfg.measurement_interval_h, 1.5);
        assert_eq!(cfg.initial_estimate_sigma_m, 30.0);
        assert_eq!(cfg.constraints.weights, [1.0, 1.0, 10.0]);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut c = ScenarioConfig::stationkeeping();
        c.duration_days = 0.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = ScenarioConfig::stationkeeping();
        c.measurement_interval_h = -1.0;
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::stationkeeping();
        c.gains[2] = 0.0;
        assert!(c.validate().is_err());
        assert!(ScenarioConfig::from_json("{\"name\":1}").is_err());
        assert!(ScenarioConfig::from_json(&ScenarioConfig::approach().to_json().replace("\"seed\"", "\"sed\"")).is_err());
    }

    #[test]
    fn inclined_target_clears_the_cone_axis() {
        let cfg = ScenarioConfig::stationkeeping();
        let t = cfg.controller().unwrap().target;
        let h = Vector3::new(t[0], t[1], t[2]);
        assert!((h.x / h.norm() - 31f64.to_radians().sin()).abs() < 1e-12);
        let norm = cfg.normalization();
        assert!((norm.length_to_km(h.norm_squared()) - 2.0429).abs() < 1e-9);
        assert_eq!([t[3], t[4], t[5]], [0.0; 3]);
    }
}
