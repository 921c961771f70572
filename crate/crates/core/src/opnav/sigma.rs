use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::imaging::LimbPointSet;

/// Limb localization scatter in pixels.
///
/// Points are taken in polar form about their centroid, an ellipse is fitted
/// by linear least squares on the conic with `a + c = 1`, each radius is
/// divided by the fitted-ellipse radius in the same direction, and the
/// standard deviation of that ratio is rescaled by the mean fitted radius.
pub fn estimate_sigma_pix(limb: &LimbPointSet) -> Result<f64> {
    let n = limb.len();
    if n < 5 {
        return Err(Error::DegenerateLimb(format!("{n} points, need 5 for an ellipse fit")));
    }
    let (mut cx, mut cy) = (0.0, 0.0);
    for p in &limb.points {
        cx += p[0];
        cy += p[1];
    }
    cx /= n as f64;
    cy /= n as f64;
    let scale = (limb
        .points
        .iter()
        .map(|p| (p[0] - cx).powi(2) + (p[1] - cy).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    if !(scale > 0.0) {
        return Err(Error::DegenerateLimb("all limb points coincide".into()));
    }
    let pts: Vec<(f64, f64)> = limb
        .points
        .iter()
        .map(|p| ((p[0] - cx) / scale, (p[1] - cy) / scale))
        .collect();

    // a (x^2 - y^2) + b xy + d x + e y + f = -y^2
    let mut ata = SMatrix::<f64, 5, 5>::zeros();
    let mut atb = SVector::<f64, 5>::zeros();
    for &(x, y) in &pts {
        let row = SVector::<f64, 5>::from([x * x - y * y, x * y, x, y, 1.0]);
        ata += row * row.transpose();
        atb += row * (-y * y);
    }
    let theta = ata
        .lu()
        .solve(&atb)
        .ok_or_else(|| Error::DegenerateLimb("singular conic fit".into()))?;
    let (a, b, d, e, f) = (theta[0], theta[1], theta[2], theta[3], theta[4]);
    let c = 1.0 - a;
    if !(b * b - 4.0 * a * c < 0.0) {
        return Err(Error::DegenerateLimb("fitted conic is not an ellipse".into()));
    }

    let mut ratios = Vec::with_capacity(n);
    let mut radii = Vec::with_capacity(n);
    for &(x, y) in &pts {
        let rho = x.hypot(y);
        if rho == 0.0 {
            continue;
        }
        let (ct, st) = (x / rho, y / rho);
        let qa = a * ct * ct + b * ct * st + c * st * st;
        let qb = d * ct + e * st;
        let disc = qb * qb - 4.0 * qa * f;
        if disc < 0.0 || qa == 0.0 {
            return Err(Error::DegenerateLimb("polar origin outside the fitted ellipse".into()));
        }
        let sq = disc.sqrt();
        let t1 = (-qb + sq) / (2.0 * qa);
        let t2 = (-qb - sq) / (2.0 * qa);
        let re = match (t1 > 0.0, t2 > 0.0) {
            (true, false) => t1,
            (false, true) => t2,
            _ => return Err(Error::DegenerateLimb("polar origin outside the fitted ellipse".into())),
        };
        ratios.push(rho / re);
        radii.push(re);
    }
    let m = ratios.len();
    if m < 5 {
        return Err(Error::DegenerateLimb("too few usable limb radii".into()));
    }
    let mean = ratios.iter().sum::<f64>() / m as f64;
    let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    let mean_radius = radii.iter().sum::<f64>() / m as f64 * scale;
    Ok(var.sqrt() * mean_radius)
}
