use nalgebra::{DMatrix, Matrix3, Vector3};

use super::{position_from_cone, solve_cone, transformed_directions, InverseCameraMatrix, ShapeMatrix};
use crate::error::{domain, Error, Result};
use crate::imaging::LimbPointSet;

pub const DEFAULT_FD_STEP_PX: f64 = 0.01;

/// Jacobian of [`super::cra_position`] with respect to the stacked pixel
/// coordinates `[u_1, v_1, u_2, v_2, ...]`, central differences.
///
/// Moving one pixel changes a single term of the 3x3 normal equations, so
/// each column is a rank-two update solved in residual form against the
/// unperturbed cone vector.
pub fn measurement_jacobian(
    limb: &LimbPointSet,
    c_inv: &InverseCameraMatrix,
    cam_from_body: &Matrix3<f64>,
    shape: &ShapeMatrix,
    step_px: f64,
) -> Result<DMatrix<f64>> {
    if !(step_px > 0.0) {
        return domain("finite-difference step must be positive");
    }
    let body_from_cam = cam_from_body.transpose();
    let dirs = transformed_directions(limb, c_inv, &body_from_cam, shape);
    let (m, b, n0) = solve_cone(&dirs)?;
    let map = shape.d * body_from_cam;
    let mut jac = DMatrix::zeros(3, 2 * limb.len());
    for (i, p) in limb.points.iter().enumerate() {
        let s = dirs[i];
        for axis in 0..2 {
            let eval = |delta: f64| -> Result<Vector3<f64>> {
                let mut q = *p;
                q[axis] += delta;
                let s2 = (map * c_inv.line_of_sight(q[0], q[1])).normalize();
                let dm = s2 * s2.transpose() - s * s.transpose();
                let mi = m + dm;
                let resid = (b + (s2 - s)) - mi * n0;
                let dn = mi
                    .cholesky()
                    .ok_or_else(|| Error::DegenerateLimb("perturbed normal equations singular".into()))?
                    .solve(&resid);
                position_from_cone(&(n0 + dn), cam_from_body, shape)
            };
            let col = (eval(step_px)? - eval(-step_px)?) / (2.0 * step_px);
            jac.fixed_view_mut::<3, 1>(0, 2 * i + axis).copy_from(&col);
        }
    }
    Ok(jac)
}

/// First-order covariance `J (sigma_pix^2 I) J^T` of the position fix, km^2.
pub fn measurement_covariance(
    limb: &LimbPointSet,
    c_inv: &InverseCameraMatrix,
    cam_from_body: &Matrix3<f64>,
    shape: &ShapeMatrix,
    sigma_pix: f64,
    step_px: f64,
) -> Result<Matrix3<f64>> {
    if !(sigma_pix >= 0.0) {
        return domain("sigma_pix must be non-negative");
    }
    let j = measurement_jacobian(limb, c_inv, cam_from_body, shape, step_px)?;
    let jjt = &j * j.transpose();
    let r = Matrix3::from_fn(|r, c| jjt[(r, c)]) * (sigma_pix * sigma_pix);
    Ok((r + r.transpose()) * 0.5)
}
