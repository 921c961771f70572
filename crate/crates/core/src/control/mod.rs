//! Lyapunov feedback on Milankovitch slow elements with exponential
//! penalties for the minimum radius, the maximum radius and the dark-side cone.

use nalgebra::{Matrix3, Matrix6, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::{control_influence, BodyParams, Normalization};
use crate::error::{domain, Error, Result};

pub type Slow = SVector<f64, 6>;

/// Default eccentricity cap of the apoapsis constraint inside the controller.
pub const OPEN_ORBIT_ECC_CAP: f64 = 0.9;

/// Path-constraint geometry and penalty shaping.
///
/// `r_min` and `r_max` are in the length unit of the elements passed to
/// [`constraints_g`]; the closed loop uses normalized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintParams {
    pub r_min: f64,
    pub r_max: f64,
    /// Keep-out cone half-angle, rad.
    pub alpha: f64,
    pub weights: [f64; 3],
    pub sharpness: [f64; 3],
    /// Activation offset added to every constraint before the penalty.
    pub epsilon: f64,
    /// Ceiling on `k g` inside the exponential.
    pub exponent_ceiling: f64,
    /// Largest eccentricity used in the controller's apoapsis constraint.
    #[serde(default = "default_ecc_cap")]
    pub ecc_cap: f64,
}

fn default_ecc_cap() -> f64 {
    OPEN_ORBIT_ECC_CAP
}

impl ConstraintParams {
    /// `r_min = 2 R`, `r_max = 25 R`, 30 deg cone, unit weights and sharpness
    /// except the cone weight.
    pub fn for_body(body: &BodyParams, norm: &Normalization, cone_weight: f64) -> Self {
        Self {
            r_min: norm.length_to_norm(2.0 * body.radius),
            r_max: norm.length_to_norm(25.0 * body.radius),
            alpha: 30f64.to_radians(),
            weights: [1.0, 1.0, cone_weight],
            sharpness: [1.0, 1.0, 1.0],
            epsilon: 0.0,
            exponent_ceiling: 50.0,
            ecc_cap: OPEN_ORBIT_ECC_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_min < self.r_max && self.r_max.is_finite()) {
            return Err(Error::Config("need 0 < r_min < r_max".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config("cone half-angle must lie in (0, pi/2)".into()));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config("penalty weights must be non-negative".into()));
        }
        if self.sharpness.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(Error::Config("penalty sharpness must be positive".into()));
        }
        if !(self.epsilon.is_finite() && self.exponent_ceiling > 0.0) {
            return Err(Error::Config("bad penalty offset or ceiling".into()));
        }
        if !(self.ecc_cap > 0.0 && self.ecc_cap < 1.0) {
            return Err(Error::Config("eccentricity cap must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Same constraints with the cone penalty switched off.
    pub fn unconstrained(&self) -> Self {
        let mut c = *self;
        c.weights[2] = 0.0;
        c
    }
}

/// `(h, e)` from the slow vector.
fn split(x: &Slow) -> (Vector3<f64>, Vector3<f64>) {
    (Vector3::new(x[0], x[1], x[2]), Vector3::new(x[3], x[4], x[5]))
}

fn g_with_ecc(x: &Slow, cp: &ConstraintParams, mu: f64, ecc_apo: f64) -> Result<Vector3<f64>> {
    let (h, e) = split(x);
    let hn = h.norm();
    if !(hn > 0.0) {
        return domain("|h| must be positive");
    }
    let ecc = e.norm();
    let p = hn * hn / mu;
    let g1 = cp.r_min * cp.r_min - p / (1.0 + ecc);
    let g2 = p / (1.0 - ecc_apo) - cp.r_max * cp.r_max;
    let g3 = (std::f64::consts::FRAC_PI_2 + cp.alpha).cos() - h.x / hn;
    Ok(Vector3::new(g1, g2, g3))
}

/// Constraint values, negative when satisfied:
/// `g1 = r_min^2 - p/(1+e)`, `g2 = p/(1-e) - r_max^2`,
/// `g3 = cos(pi/2 + alpha) - h_x/|h|` with `p = h^2/mu`.
pub fn constraints_g(x: &Slow, cp: &ConstraintParams, mu: f64) -> Result<Vector3<f64>> {
    let ecc = split(x).1.norm();
    if !(ecc < 1.0) {
        return domain(format!("apoapsis constraint undefined for e = {ecc}"));
    }
    g_with_ecc(x, cp, mu, ecc)
}

/// [`constraints_g`] with the apoapsis eccentricity capped at `cp.ecc_cap`,
/// so open and near-open orbits get a large finite `g2` instead of an error.
pub fn constraints_g_capped(x: &Slow, cp: &ConstraintParams, mu: f64) -> Result<Vector3<f64>> {
    let ecc = split(x).1.norm();
    g_with_ecc(x, cp, mu, ecc.min(cp.ecc_cap))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    FiniteDifference,
    Analytic,
}

/// Central-difference step for slow element `j`.
fn fd_step(x: &Slow, j: usize, rel: f64) -> f64 {
    let block = if j < 3 { split(x).0.norm() } else { split(x).1.norm() };
    rel * x[j].abs().max(block).max(1e-6)
}

fn fd_gradients(
    x: &Slow,
    rel: f64,
    g: impl Fn(&Slow) -> Result<Vector3<f64>>,
) -> Result<SMatrix<f64, 3, 6>> {
    let mut out = SMatrix::<f64, 3, 6>::zeros();
    for j in 0..6 {
        let h = fd_step(x, j, rel);
        let mut xp = *x;
        let mut xm = *x;
        xp[j] += h;
        xm[j] -= h;
        out.set_column(j, &((g(&xp)? - g(&xm)?) / (2.0 * h)));
    }
    Ok(out)
}

/// Default relative step of the finite-difference gradients.
pub const FD_REL_STEP: f64 = 1e-7;

/// Rows are `dg_i / d[h; e]`.
pub fn constraint_gradients(
    x: &Slow,
    cp: &ConstraintParams,
    mu: f64,
    mode: GradientMode,
) -> Result<SMatrix<f64, 3, 6>> {
    match mode {
        GradientMode::FiniteDifference => constraint_gradients_with_step(x, cp, mu, FD_REL_STEP),
        GradientMode::Analytic => analytic_gradients(x, cp, mu),
    }
}

/// Finite-difference gradients with a caller-chosen relative step.
pub fn constraint_gradients_with_step(x: &Slow, cp: &ConstraintParams, mu: f64, rel_step: f64) -> Result<SMatrix<f64, 3, 6>> {
    if !(rel_step > 0.0) {
        return domain("relative step must be positive");
    }
    constraints_g(x, cp, mu)?;
    fd_gradients(x, rel_step, |y| constraints_g(y, cp, mu))
}

/// Finite-difference gradients of [`constraints_g_capped`], used by the controller.
pub fn constraint_gradients_capped(x: &Slow, cp: &ConstraintParams, mu: f64) -> Result<SMatrix<f64, 3, 6>> {
    fd_gradients(x, FD_REL_STEP, |y| constraints_g_capped(y, cp, mu))
}

/// Closed-form partials in the printed form. They are not the derivatives of
/// [`constraints_g`]; kept for comparison only.
pub fn analytic_gradients(x: &Slow, cp: &ConstraintParams, mu: f64) -> Result<SMatrix<f64, 3, 6>> {
    constraints_g(x, cp, mu)?;
    let (h, e) = split(x);
    let (hn, ecc) = (h.norm(), e.norm());
    if !(ecc > 0.0) {
        return domain("printed eccentricity partials are singular at e = 0");
    }
    let h2 = hn * hn;
    let radial = |a: f64, b: f64, c: f64| -(2.0 * a + b * b + c * c) / mu / (1.0 - ecc);
    let ecc_term = |ei: f64| -ei * h2 / (mu * ecc * (ecc - 1.0).powi(2));
    let row12 = [
        radial(h.x, h.y, h.z),
        radial(h.y, h.x, h.z),
        radial(h.z, h.y, h.x),
        ecc_term(e.x),
        ecc_term(e.y),
        ecc_term(e.z),
    ];
    let h15 = hn.powf(1.5);
    let row3 = [
        (h.y * h.y + h.z * h.z) / h15,
        -h.x * h.y / h15,
        -h.x * h.z / h15,
        0.0,
        0.0,
        0.0,
    ];
    let mut out = SMatrix::<f64, 3, 6>::zeros();
    for j in 0..6 {
        out[(0, j)] = row12[j];
        out[(1, j)] = row12[j];
        out[(2, j)] = row3[j];
    }
    Ok(out)
}

/// Largest analytic-minus-FD discrepancy per constraint over `states`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientComparison {
    pub n_states: usize,
    pub max_abs: [f64; 3],
    pub max_rel: [f64; 3],
}

pub fn compare_gradients(states: &[Slow], cp: &ConstraintParams, mu: f64) -> Result<GradientComparison> {
    let mut max_abs = [0.0f64; 3];
    let mut max_rel = [0.0f64; 3];
    for x in states {
        let fd = constraint_gradients(x, cp, mu, GradientMode::FiniteDifference)?;
        let an = constraint_gradients(x, cp, mu, GradientMode::Analytic)?;
        for i in 0..3 {
            let d = (an.row(i) - fd.row(i)).norm();
            max_abs[i] = max_abs[i].max(d);
            max_rel[i] = max_rel[i].max(d / fd.row(i).norm().max(1e-300));
        }
    }
    Ok(GradientComparison {
        n_states: states.len(),
        max_abs,
        max_rel,
    })
}

/// `exp(k g)` with the exponent clamped at `ceiling`.
pub fn penalty(g: f64, k: f64, ceiling: f64) -> f64 {
    (k * g).min(ceiling).exp()
}

/// Gain, target and saturation of the controller, normalized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub k: Matrix6<f64>,
    pub target: Slow,
    /// Thrust-acceleration ceiling, normalized.
    pub u_max: f64,
    pub mu: f64,
}

impl ControllerConfig {
    pub fn diagonal(gains: [f64; 6], target: Slow, u_max: f64) -> Self {
        Self {
            k: Matrix6::from_diagonal(&Slow::from_column_slice(&gains)),
            target,
            u_max,
            mu: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if (self.k - self.k.transpose()).abs().max() > 1e-12 * self.k.abs().max() {
            return Err(Error::Config("gain matrix must be symmetric".into()));
        }
        if self.k.cholesky().is_none() {
            return Err(Error::Config("gain matrix must be positive definite".into()));
        }
        if !(self.u_max > 0.0 && self.mu > 0.0) {
            return Err(Error::Config("u_max and mu must be positive".into()));
        }
        Ok(())
    }
}

/// Controller output and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    /// Hill-frame acceleration, normalized.
    pub u: Vector3<f64>,
    pub v: f64,
    pub v_hat: f64,
    pub g: Vector3<f64>,
    pub p: Vector3<f64>,
    pub saturated: bool,
    /// The damped pseudo-inverse replaced the plain one.
    pub damped: bool,
}

/// `(V, V_hat, [V_P1, V_P2, V_P3])`.
pub fn lyapunov_values(x: &Slow, cfg: &ControllerConfig, cp: &ConstraintParams) -> Result<(f64, f64, [f64; 3])> {
    let dx = x - cfg.target;
    let v = (dx.transpose() * cfg.k * dx)[(0, 0)];
    let g = constraints_g_capped(x, cp, cfg.mu)?;
    let mut vp = [0.0; 3];
    for i in 0..3 {
        vp[i] = cp.weights[i] * v * penalty(g[i] + cp.epsilon, cp.sharpness[i], cp.exponent_ceiling);
    }
    Ok((v, v + vp.iter().sum::<f64>(), vp))
}

/// Condition number above which the damped pseudo-inverse is used.
pub const MAX_CONDITION: f64 = 1e12;

/// Constrained Lyapunov control at slow state `x` with Cartesian `(r, v)`,
/// all normalized.
pub fn control(
    x: &Slow,
    cfg: &ControllerConfig,
    cp: &ConstraintParams,
    r: &Vector3<f64>,
    vel: &Vector3<f64>,
) -> Result<ControlOutput> {
    let b7 = control_influence(r, vel, cfg.mu)?;
    let b: SMatrix<f64, 6, 3> = b7.fixed_rows::<6>(0).into_owned();
    let dx = x - cfg.target;
    let kdx = cfg.k * dx;
    let v = dx.dot(&kdx);
    let g = constraints_g_capped(x, cp, cfg.mu)?;
    let grads = constraint_gradients_capped(x, cp, cfg.mu)?;

    let mut p = Vector3::zeros();
    let mut scale = 1.0;
    let mut slope = SMatrix::<f64, 1, 6>::zeros();
    for i in 0..3 {
        let (w, k) = (cp.weights[i], cp.sharpness[i]);
        p[i] = penalty(g[i] + cp.epsilon, k, cp.exponent_ceiling);
        scale += w * p[i];
        // dP/dg vanishes where the exponent is clamped
        let dp = if k * (g[i] + cp.epsilon) < cp.exponent_ceiling { k * p[i] } else { 0.0 };
        slope += grads.row(i) * (w * dp);
    }
    let v_hat = v * scale;

    let l = (cfg.k * (2.0 * scale) + kdx * slope) * b;

    let ltl = l.transpose() * l;
    let rhs = l.transpose() * dx;
    let eig = nalgebra::SymmetricEigen::new(ltl).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    let damped = !(lo > 0.0 && hi / lo <= MAX_CONDITION);
    let mut u = if damped {
        let lambda = 1e-9 * ltl.trace();
        let m = ltl + Matrix3::identity() * lambda.max(f64::MIN_POSITIVE);
        -m.lu().solve(&rhs).ok_or_else(|| Error::Singular("damped control system singular".into()))?
    } else {
        -ltl.cholesky().ok_or_else(|| Error::Singular("L^T L not positive definite".into()))?.solve(&rhs)
    };
    if !u.iter().all(|c| c.is_finite()) {
        return Err(Error::Singular("non-finite control".into()));
    }
    let n = u.norm();
    let saturated = n > cfg.u_max;
    if saturated {
        u *= cfg.u_max / n;
    }
    Ok(ControlOutput {
        u,
        v,
        v_hat,
        g,
        p,
        saturated,
        damped,
    })
}
