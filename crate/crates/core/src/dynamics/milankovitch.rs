use nalgebra::{SMatrix, SVector, Vector3};

use super::{skew, srp_beta, BodyParams, HillState, Normalization};
use crate::error::{domain, Error, Result};

/// Angular momentum, eccentricity vector and true longitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MilankovitchState {
    pub h: Vector3<f64>,
    pub e: Vector3<f64>,
    /// True longitude, rad, in (-pi, pi].
    pub l: f64,
}

impl MilankovitchState {
    /// `[h; e]`, the slow part targeted by the controller.
    pub fn slow(&self) -> SVector<f64, 6> {
        SVector::<f64, 6>::from_column_slice(&[
            self.h.x, self.h.y, self.h.z, self.e.x, self.e.y, self.e.z,
        ])
    }

    pub fn from_slow(slow: &SVector<f64, 6>, l: f64) -> Self {
        Self {
            h: Vector3::new(slow[0], slow[1], slow[2]),
            e: Vector3::new(slow[3], slow[4], slow[5]),
            l,
        }
    }

    pub fn as_vector(&self) -> SVector<f64, 7> {
        SVector::<f64, 7>::from_column_slice(&[
            self.h.x, self.h.y, self.h.z, self.e.x, self.e.y, self.e.z, self.l,
        ])
    }
}

/// Equinoctial reference directions for the orbit plane with normal `h_hat`,
/// referenced to the Hill z axis.
fn equinoctial_frame(h_hat: &Vector3<f64>) -> Result<(Vector3<f64>, Vector3<f64>)> {
    let denom = 1.0 + h_hat.z;
    if denom.abs() < 1e-14 {
        return Err(Error::Singular(
            "orbit normal anti-parallel to Hill z; true longitude undefined".into(),
        ));
    }
    let p = h_hat.x / denom;
    let q = -h_hat.y / denom;
    let s = 1.0 + p * p + q * q;
    let f = Vector3::new(1.0 - p * p + q * q, 2.0 * p * q, -2.0 * p) / s;
    let g = Vector3::new(2.0 * p * q, 1.0 + p * p - q * q, 2.0 * q) / s;
    Ok((f, g))
}

/// Cartesian position/velocity to Milankovitch elements.
///
/// Works in whatever consistent units `state` and `mu` share.
pub fn cart_to_milankovitch(state: &HillState, mu: f64) -> Result<MilankovitchState> {
    let (r, v) = (state.r, state.v);
    let h = r.cross(&v);
    let hn = h.norm();
    let rn = r.norm();
    if !(rn > 0.0) {
        return Err(Error::Singular("position at the body center".into()));
    }
    if hn <= 1e-14 * rn * v.norm() {
        return Err(Error::DegenerateOrbit("rectilinear orbit, |h| = 0".into()));
    }
    let e = v.cross(&h) / mu - r / rn;
    let (f, g) = equinoctial_frame(&(h / hn))?;
    let l = r.dot(&g).atan2(r.dot(&f));
    Ok(MilankovitchState { h, e, l })
}

/// Inverse of [`cart_to_milankovitch`]. Returns `(r, v)`.
pub fn milankovitch_to_cart(m: &MilankovitchState, mu: f64) -> Result<(Vector3<f64>, Vector3<f64>)> {
    let hn = m.h.norm();
    if !(hn > 0.0) {
        return Err(Error::DegenerateOrbit("|h| = 0".into()));
    }
    let h_hat = m.h / hn;
    let (f, g) = equinoctial_frame(&h_hat)?;
    let r_hat = f * m.l.cos() + g * m.l.sin();
    let denom = 1.0 + m.e.dot(&r_hat);
    if !(denom > 0.0) {
        return Err(Error::DegenerateOrbit(
            "true longitude lies on an unbound branch of the conic".into(),
        ));
    }
    let r = r_hat * (hn * hn / mu / denom);
    let v = h_hat.cross(&(m.e + r_hat)) * (mu / hn);
    Ok((r, v))
}

/// Control influence matrix of the Milankovitch equations, rows `[h; e; L]`.
pub fn control_influence(
    r: &Vector3<f64>,
    v: &Vector3<f64>,
    mu: f64,
) -> Result<SMatrix<f64, 7, 3>> {
    let h = r.cross(v);
    let hn = h.norm();
    let denom = hn * (hn + h.z);
    if !(denom.abs() > 1e-300) || hn == 0.0 {
        return Err(Error::Singular("h + z.h vanishes in the true-longitude rate".into()));
    }
    let rt = skew(r);
    let eb = (skew(v) * rt - skew(&h)) / mu;
    let lrow = h.transpose() * (r.z / denom);
    let mut b = SMatrix::<f64, 7, 3>::zeros();
    b.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
    b.fixed_view_mut::<3, 3>(3, 0).copy_from(&eb);
    b.fixed_view_mut::<1, 3>(6, 0).copy_from(&lrow);
    Ok(b)
}

/// Element rates `f0 + B a_d` with the Hill-frame rotation terms.
///
/// `a_d` is every non-Keplerian acceleration (SRP, solar terms, control).
pub fn milankovitch_rates(
    state: &MilankovitchState,
    r: &Vector3<f64>,
    v: &Vector3<f64>,
    a_d: &Vector3<f64>,
    omega: f64,
    mu: f64,
) -> Result<SVector<f64, 7>> {
    let b = control_influence(r, v, mu)?;
    let (h, e) = (state.h, state.e);
    let rn2 = r.norm_squared();
    let f0 = SVector::<f64, 7>::from_column_slice(&[
        -omega * h.x,
        omega * h.y,
        0.0,
        -omega * e.x,
        omega * e.y,
        0.0,
        h.norm() / rn2,
    ]);
    Ok(f0 + b * a_d)
}

/// Non-Keplerian part of the normalized Hill equations: Coriolis, solar tide
/// with centrifugal term, and SRP. With this as `a_d` and `omega = 0` the
/// element rates reproduce the Cartesian equations exactly.
pub fn hill_perturbation(r: &Vector3<f64>, v: &Vector3<f64>, beta: f64) -> Vector3<f64> {
    Vector3::new(2.0 * v.y + 3.0 * r.x + beta, -2.0 * v.x, -r.z)
}

/// Frozen-terminator parameter for a given orbit radius (km):
/// `tan(Lambda) = 3/2 beta sqrt(a)` in normalized units.
pub fn fto_lambda_for_radius(params: &BodyParams, radius_km: f64) -> Result<f64> {
    if !(radius_km > 0.0) {
        return domain("radius must be positive");
    }
    let n = Normalization::new(params);
    let beta = srp_beta(params)?.nondim;
    let a = n.length_to_norm(radius_km);
    Ok((1.5 * beta * a.sqrt()).atan())
}

/// Frozen terminator orbit at periapsis, normalized units.
///
/// `h` is along `sign * x`, `e` along `y x h_hat` with magnitude `cos(lambda)`,
/// and `semi_major_km` sets the orbit size.
pub fn fto_state(
    params: &BodyParams,
    lambda: f64,
    sign: f64,
    semi_major_km: f64,
) -> Result<HillState> {
    if !(lambda > 0.0 && lambda <= std::f64::consts::FRAC_PI_2 + 1e-15) {
        return domain(format!("lambda must lie in (0, pi/2], got {lambda}"));
    }
    if sign != 1.0 && sign != -1.0 {
        return domain("sign must be +1 or -1");
    }
    if !(semi_major_km > 0.0) {
        return domain("semi-major axis must be positive");
    }
    let n = Normalization::new(params);
    let a = n.length_to_norm(semi_major_km);
    let h_hat = Vector3::x() * sign;
    let e_dir = Vector3::y().cross(&h_hat);
    let ecc = if (lambda - std::f64::consts::FRAC_PI_2).abs() < 1e-15 {
        0.0
    } else {
        lambda.cos()
    };
    // e = 0 has no periapsis; use the e-direction limit as the node-line reference
    let r_hat = e_dir;
    let rp = a * (1.0 - ecc);
    let vp = ((1.0 + ecc) / (a * (1.0 - ecc))).sqrt();
    Ok(HillState::normalized(r_hat * rp, h_hat.cross(&r_hat) * vp))
}
