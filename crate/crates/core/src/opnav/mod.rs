//! Horizon-based optical navigation.
//!
//! Limb pixels become lines of sight, the ellipsoid is mapped to a unit
//! sphere by its shape matrix, the limb cone axis is found by linear least
//! squares and the range follows from the cone half-angle.

mod covariance;
mod sigma;

pub use covariance::{measurement_covariance, measurement_jacobian, DEFAULT_FD_STEP_PX};
pub use sigma::estimate_sigma_pix;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::{BodyParams, HillState, Units};
use crate::error::{domain, Error, Result};
use crate::imaging::{
    body_rotation, detect_edges, render, CameraIntrinsics, CameraPose, LimbPointSet, DEFAULT_ABS_MIN_GRADIENT,
    DEFAULT_REL_THRESHOLD,
};

/// Inverse calibration matrix plus the focal length used to complete the
/// line of sight `[w_x, w_y, l]`, `w = C^-1 [u, v, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseCameraMatrix {
    pub m: Matrix3<f64>,
    pub focal: f64,
}

impl InverseCameraMatrix {
    /// Unnormalized camera-frame direction through pixel `(u, v)`.
    #[inline]
    pub fn line_of_sight(&self, u: f64, v: f64) -> Vector3<f64> {
        let w = self.m * Vector3::new(u, v, 1.0);
        Vector3::new(w.x, w.y, self.focal)
    }
}

pub fn inverse_camera_matrix(intr: &CameraIntrinsics) -> Result<InverseCameraMatrix> {
    intr.validate()?;
    let (dx, dy, a) = (intr.dx, intr.dy, intr.alpha_skew);
    let (up, vp) = intr.principal_point();
    let m = Matrix3::new(
        1.0 / dx,
        -a / (dx * dy),
        (a * vp - dy * up) / (dx * dy),
        0.0,
        1.0 / dy,
        -vp / dy,
        0.0,
        0.0,
        1.0,
    );
    Ok(InverseCameraMatrix {
        m,
        focal: intr.focal_length(),
    })
}

/// `A = diag(1/a^2, 1/b^2, 1/c^2)` in the body principal frame and its square root `D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeMatrix {
    pub a: Matrix3<f64>,
    pub d: Matrix3<f64>,
    pub d_inv: Matrix3<f64>,
}

impl ShapeMatrix {
    pub fn from_semi_axes(axes: &Vector3<f64>) -> Result<Self> {
        if !axes.iter().all(|x| x.is_finite() && *x > 0.0) {
            return domain("semi-axes must be positive");
        }
        let d = Matrix3::from_diagonal(&axes.map(|x| 1.0 / x));
        Ok(Self {
            a: d * d,
            d,
            d_inv: Matrix3::from_diagonal(axes),
        })
    }

    pub fn for_body(body: &BodyParams) -> Result<Self> {
        Self::from_semi_axes(&body.semi_axes())
    }
}

/// Limb directions mapped to the unit-sphere space, body frame.
pub(crate) fn transformed_directions(
    limb: &LimbPointSet,
    c_inv: &InverseCameraMatrix,
    body_from_cam: &Matrix3<f64>,
    shape: &ShapeMatrix,
) -> Vec<Vector3<f64>> {
    let m = shape.d * body_from_cam;
    limb.points
        .iter()
        .map(|p| (m * c_inv.line_of_sight(p[0], p[1])).normalize())
        .collect()
}

/// Least-squares `n` from `s_i^T n = 1`.
pub(crate) fn solve_cone(dirs: &[Vector3<f64>]) -> Result<(Matrix3<f64>, Vector3<f64>, Vector3<f64>)> {
    if dirs.len() < 3 {
        return Err(Error::DegenerateLimb(format!("{} limb points, need at least 3", dirs.len())));
    }
    let mut m = Matrix3::zeros();
    let mut b = Vector3::zeros();
    for s in dirs {
        m += s * s.transpose();
        b += s;
    }
    let eig = SymmetricEigen::new(m).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(hi > 0.0) || lo <= 1e-14 * hi {
        return Err(Error::DegenerateLimb("rank-deficient limb normal equations".into()));
    }
    let n = m
        .cholesky()
        .ok_or_else(|| Error::DegenerateLimb("limb normal equations not positive definite".into()))?
        .solve(&b);
    Ok((m, b, n))
}

/// Body-center position relative to the camera, in the camera frame, from
/// the cone vector `n` in the unit-sphere space.
pub(crate) fn position_from_cone(
    n: &Vector3<f64>,
    cam_from_body: &Matrix3<f64>,
    shape: &ShapeMatrix,
) -> Result<Vector3<f64>> {
    let nn = n.norm_squared();
    if !(nn > 1.0) {
        return Err(Error::InfeasibleGeometry(format!("n^T n = {nn} <= 1")));
    }
    let p_prime = -n / (nn - 1.0).sqrt();
    let p_body = shape.d_inv * p_prime;
    Ok(-(cam_from_body * p_body))
}

/// Horizon-based position fix: body center relative to the spacecraft in the camera frame, km.
///
/// `cam_from_body` rotates body-frame vectors into the camera frame.
pub fn cra_position(
    limb: &LimbPointSet,
    c_inv: &InverseCameraMatrix,
    cam_from_body: &Matrix3<f64>,
    shape: &ShapeMatrix,
) -> Result<Vector3<f64>> {
    let dirs = transformed_directions(limb, c_inv, &cam_from_body.transpose(), shape);
    let (_, _, n) = solve_cone(&dirs)?;
    position_from_cone(&n, cam_from_body, shape)
}

/// Settings of the image-to-measurement pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpNavConfig {
    pub intrinsics: CameraIntrinsics,
    /// Normalized image noise standard deviation.
    pub noise_sigma: f64,
    pub rel_threshold: f64,
    pub abs_min_gradient: f64,
    /// Fewer detected limb points than this makes the measurement invalid.
    pub min_points: usize,
    /// Lower bound on sigma_pix and fallback when its fit fails, px.
    pub sigma_pix_floor: f64,
    pub fd_step_px: f64,
}

impl Default for OpNavConfig {
    fn default() -> Self {
        Self {
            intrinsics: CameraIntrinsics::default(),
            noise_sigma: 0.01,
            rel_threshold: DEFAULT_REL_THRESHOLD,
            abs_min_gradient: DEFAULT_ABS_MIN_GRADIENT,
            min_points: 10,
            sigma_pix_floor: 0.1,
            fd_step_px: DEFAULT_FD_STEP_PX,
        }
    }
}

/// Valid horizon measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpNavMeasurement {
    /// Body center relative to the spacecraft, camera frame, km.
    pub z: Vector3<f64>,
    /// Covariance of `z`, km^2.
    pub r: Matrix3<f64>,
    /// Spacecraft relative to the body center, Hill frame, km.
    pub z_hill: Vector3<f64>,
    /// Covariance of `z_hill`, km^2.
    pub r_hill: Matrix3<f64>,
    pub sigma_pix: f64,
    pub n_points: usize,
}

impl OpNavMeasurement {
    /// `3 sqrt(lambda_max(R))`, km.
    pub fn bound_3sigma(&self) -> f64 {
        3.0 * SymmetricEigen::new(self.r).eigenvalues.max().max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Measurement {
    Valid(OpNavMeasurement),
    Invalid { n_points: usize, reason: String },
}

impl Measurement {
    pub fn valid(&self) -> Option<&OpNavMeasurement> {
        match self {
            Measurement::Valid(m) => Some(m),
            Measurement::Invalid { .. } => None,
        }
    }

    pub fn n_points(&self) -> usize {
        match self {
            Measurement::Valid(m) => m.n_points,
            Measurement::Invalid { n_points, .. } => *n_points,
        }
    }
}

/// Measurement from an already-extracted limb for a known pose.
pub fn measure_limb(
    limb: &LimbPointSet,
    body: &BodyParams,
    pose: &CameraPose,
    t: f64,
    cfg: &OpNavConfig,
) -> Measurement {
    let invalid = |reason: String| Measurement::Invalid {
        n_points: limb.len(),
        reason,
    };
    if limb.len() < cfg.min_points.max(3) {
        return invalid(format!("{} limb points below minimum {}", limb.len(), cfg.min_points));
    }
    let run = || -> Result<OpNavMeasurement> {
        let c_inv = inverse_camera_matrix(&cfg.intrinsics)?;
        let shape = ShapeMatrix::for_body(body)?;
        let cam_from_hill = pose.camera_from_hill();
        let cam_from_body = cam_from_hill * body_rotation(body, t)?.matrix();
        let z = cra_position(limb, &c_inv, &cam_from_body, &shape)?;
        let sigma_pix = estimate_sigma_pix(limb).unwrap_or(0.0).max(cfg.sigma_pix_floor);
        let r = measurement_covariance(limb, &c_inv, &cam_from_body, &shape, sigma_pix, cfg.fd_step_px)?;
        let hill_from_cam = cam_from_hill.transpose();
        let z_hill = -(hill_from_cam * z);
        let r_hill = hill_from_cam * r * cam_from_hill;
        let r_hill = (r_hill + r_hill.transpose()) * 0.5;
        Ok(OpNavMeasurement {
            z,
            r,
            z_hill,
            r_hill,
            sigma_pix,
            n_points: limb.len(),
        })
    };
    match run() {
        Ok(m) if m.z.iter().all(|x| x.is_finite()) && m.r.iter().all(|x| x.is_finite()) => Measurement::Valid(m),
        Ok(_) => invalid("non-finite measurement".into()),
        Err(e) => invalid(e.to_string()),
    }
}

/// Nadir image from the true state, limb extraction and position fix.
///
/// `state` is dimensional (km, km/s). Returns `Invalid` rather than an error
/// when the image does not support a fix.
pub fn measure(state: &HillState, body: &BodyParams, t: f64, noise_seed: u64, cfg: &OpNavConfig) -> Result<Measurement> {
    if state.units != Units::Dimensional {
        return domain("measure expects a dimensional state");
    }
    let pose = CameraPose::nadir(state.r)?;
    let img = render(body, &pose, &cfg.intrinsics, t, cfg.noise_sigma, noise_seed)?;
    let limb = detect_edges(&img, cfg.rel_threshold, cfg.abs_min_gradient);
    Ok(measure_limb(&limb, body, &pose, t, cfg))
}
