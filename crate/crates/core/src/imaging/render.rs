use nalgebra::{Rotation3, Unit, Vector3};

use super::{add_noise, CameraIntrinsics, CameraPose, GrayImage};
use crate::dynamics::BodyParams;
use crate::error::{Error, Result};
use crate::opnav::inverse_camera_matrix;

/// Unit vector from the body toward the Sun in the Hill frame.
pub fn sun_direction() -> Vector3<f64> {
    -Vector3::x()
}

/// Body-to-Hill rotation after spinning `t` seconds about the rotation axis.
pub fn body_rotation(params: &BodyParams, t: f64) -> Result<Rotation3<f64>> {
    if !(params.rotation_period > 0.0) {
        return Err(Error::Domain("rotation period must be positive".into()));
    }
    let axis = params.rotation_axis();
    if !(axis.norm() > 0.0) {
        return Err(Error::Domain("rotation axis must be non-zero".into()));
    }
    let theta = (t / params.rotation_period).fract() * std::f64::consts::TAU;
    Ok(Rotation3::from_axis_angle(&Unit::new_normalize(axis), theta))
}

/// Ray-cast Lambertian image of the body, no noise.
pub fn render_noiseless(
    body: &BodyParams,
    pose: &CameraPose,
    intrinsics: &CameraIntrinsics,
    t: f64,
) -> Result<GrayImage> {
    intrinsics.validate()?;
    let axes = body.semi_axes();
    let inv_axes = axes.map(|a| 1.0 / a);
    let rot = body_rotation(body, t)?;
    let body_from_hill = rot.inverse();

    let origin = body_from_hill * pose.position;
    let q = origin.component_mul(&inv_axes);
    let qq = q.norm_squared();
    if qq <= 1.0 {
        return Err(Error::Geometry("camera is inside the body".into()));
    }
    let sun = body_from_hill * sun_direction();

    let c_inv = inverse_camera_matrix(intrinsics)?;
    let l = intrinsics.focal_length();
    let hill_from_cam = pose.camera_from_hill().transpose();
    let m = body_from_hill.matrix() * hill_from_cam;
    // ray direction in the body frame, affine in (u, v)
    let base = m * Vector3::new(c_inv.m[(0, 2)], c_inv.m[(1, 2)], l);
    let du = m * Vector3::new(c_inv.m[(0, 0)], 0.0, 0.0);
    let dv = m * Vector3::new(c_inv.m[(0, 1)], c_inv.m[(1, 1)], 0.0);

    let n = intrinsics.size;
    let mut img = GrayImage::new(n, n);
    for row in 0..n {
        let row_dir = base + dv * row as f64;
        let out = &mut img.data[row * n..(row + 1) * n];
        for (col, px) in out.iter_mut().enumerate() {
            let d = row_dir + du * col as f64;
            let p = d.component_mul(&inv_axes);
            let pp = p.norm_squared();
            let qp = q.dot(&p);
            let disc = qp * qp - pp * (qq - 1.0);
            if disc < 0.0 {
                continue;
            }
            let t_hit = (-qp - disc.sqrt()) / pp;
            if t_hit <= 0.0 {
                continue;
            }
            let x = origin + d * t_hit;
            let normal = x.component_mul(&inv_axes).component_mul(&inv_axes);
            let shade = normal.dot(&sun) / normal.norm();
            if shade > 0.0 {
                *px = shade.min(1.0);
            }
        }
    }
    Ok(img)
}

/// Ray-cast image with additive Gaussian noise of standard deviation
/// `noise_sigma`, clamped to `[0, 1]`.
pub fn render(
    body: &BodyParams,
    pose: &CameraPose,
    intrinsics: &CameraIntrinsics,
    t: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<GrayImage> {
    let img = render_noiseless(body, pose, intrinsics, t)?;
    add_noise(&img, noise_sigma, seed)
}
