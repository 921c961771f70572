#![allow(dead_code)]

use nalgebra::{Matrix3, Vector3};
use proxnav::imaging::{CameraIntrinsics, LimbPointSet};
use rand::Rng;

/// Camera-from-body rotation with the boresight on the body center and the
/// given roll about it.
pub fn look_at(position_body: &Vector3<f64>, roll: f64) -> Matrix3<f64> {
    let z = -position_body.normalize();
    let helper = if z.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let x0 = helper.cross(&z).normalize();
    let y0 = z.cross(&x0);
    let x = x0 * roll.cos() + y0 * roll.sin();
    let y = z.cross(&x);
    Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()])
}

/// Exact sub-pixel limb of an ellipsoid with semi-axes `axes` seen from
/// `position_body`, sampled over `span` radians of the limb starting at `start`.
pub fn analytic_limb(
    axes: &Vector3<f64>,
    position_body: &Vector3<f64>,
    cam_from_body: &Matrix3<f64>,
    intr: &CameraIntrinsics,
    n: usize,
    start: f64,
    span: f64,
) -> LimbPointSet {
    // in the space where the body is a unit sphere the limb is a circular cone
    let p = position_body.component_div(axes);
    let rho = p.norm();
    let axis = -p / rho;
    let half = (1.0 / rho).asin();
    let helper = if axis.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e1 = helper.cross(&axis).normalize();
    let e2 = axis.cross(&e1);
    let l = intr.focal_length();
    let (up, vp) = intr.principal_point();
    let points = (0..n)
        .map(|k| {
            let phi = start + span * k as f64 / n.max(2) as f64;
            let s_bar = axis * half.cos() + (e1 * phi.cos() + e2 * phi.sin()) * half.sin();
            let s = cam_from_body * s_bar.component_mul(axes);
            [up + l * s.x / s.z, vp + l * s.y / s.z]
        })
        .collect();
    LimbPointSet { points }
}

pub fn random_unit<R: Rng>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// View direction, -90 full moon, 0 side-on, +90 dark side; position in km.
pub fn view_position(angle_deg: f64, range: f64) -> Vector3<f64> {
    let t = angle_deg.to_radians();
    Vector3::new(t.sin(), 0.0, -t.cos()) * range
}
