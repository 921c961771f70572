use nalgebra::{SVector, Vector3};
use serde::{Deserialize, Serialize};

use super::{accel_unchecked, HillState, Units};
use crate::error::{Error, Result};

type State6 = SVector<f64, 6>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Integrator {
    /// Classic fixed-step fourth-order Runge-Kutta, step in normalized time.
    Rk4 { step: f64 },
    /// Dormand-Prince 5(4) with step-size control.
    DormandPrince { rtol: f64, atol: f64, max_step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub integrator: Integrator,
    /// Keep every integrator step in the output, not only the endpoints.
    pub dense: bool,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        // ~1/1000 of a 3-day orbit at the Bennu scale, in normalized time
        Self {
            integrator: Integrator::Rk4 { step: 4.0e-5 },
            dense: false,
        }
    }
}

/// Time-stamped states, normalized units.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<HillState>,
}

impl Trajectory {
    pub fn last(&self) -> Option<(f64, HillState)> {
        Some((*self.times.last()?, *self.states.last()?))
    }
}

fn pack(s: &HillState) -> State6 {
    State6::from_column_slice(&s.as_array())
}

fn unpack(x: &State6) -> HillState {
    HillState::normalized(Vector3::new(x[0], x[1], x[2]), Vector3::new(x[3], x[4], x[5]))
}

/// Force model integrated by [`propagate_model`].
pub trait ForceModel {
    fn accel(&self, r: &Vector3<f64>, v: &Vector3<f64>, u: &Vector3<f64>) -> Result<Vector3<f64>>;
}

/// Normalized Hill equations with constant SRP `beta`.
#[derive(Debug, Clone, Copy)]
pub struct HillForces {
    pub beta: f64,
}

impl ForceModel for HillForces {
    fn accel(&self, r: &Vector3<f64>, v: &Vector3<f64>, u: &Vector3<f64>) -> Result<Vector3<f64>> {
        accel_unchecked(r, v, self.beta, u)
    }
}

/// No forces other than the control input.
#[derive(Debug, Clone, Copy)]
pub struct FreeSpace;

impl ForceModel for FreeSpace {
    fn accel(&self, _r: &Vector3<f64>, _v: &Vector3<f64>, u: &Vector3<f64>) -> Result<Vector3<f64>> {
        Ok(*u)
    }
}

fn deriv<F, M>(t: f64, x: &State6, model: &M, control: &F) -> Result<State6>
where
    F: Fn(f64, &HillState) -> Vector3<f64>,
    M: ForceModel,
{
    let s = unpack(x);
    let u = control(t, &s);
    let a = model.accel(&s.r, &s.v, &u)?;
    Ok(State6::from_column_slice(&[
        x[3], x[4], x[5], a.x, a.y, a.z,
    ]))
}

fn check(t: f64, x: &State6) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Propagation {
            t,
            reason: "non-finite state".into(),
        })
    }
}

/// Integrate the normalized Hill equations from `t_span.0` to `t_span.1`.
///
/// `control` returns the normalized control acceleration at `(t, state)`.
pub fn propagate<F>(
    state: &HillState,
    t_span: (f64, f64),
    control: F,
    beta: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory>
where
    F: Fn(f64, &HillState) -> Vector3<f64>,
{
    propagate_model(state, t_span, control, &HillForces { beta }, opts)
}

/// [`propagate`] with an arbitrary force model.
pub fn propagate_model<F, M>(
    state: &HillState,
    t_span: (f64, f64),
    control: F,
    model: &M,
    opts: &IntegratorOptions,
) -> Result<Trajectory>
where
    F: Fn(f64, &HillState) -> Vector3<f64>,
    M: ForceModel,
{
    if state.units != Units::Normalized {
        return Err(Error::Domain("propagate expects a normalized state".into()));
    }
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite()) {
        return Err(Error::Domain("time span must be finite".into()));
    }
    let mut out = Trajectory {
        times: vec![t0],
        states: vec![*state],
    };
    if t1 == t0 {
        return Ok(out);
    }
    let dir = (t1 - t0).signum();
    let mut x = pack(state);
    let mut t = t0;
    check(t, &x)?;
    match opts.integrator {
        Integrator::Rk4 { step } => {
            if !(step > 0.0) {
                return Err(Error::Domain("RK4 step must be positive".into()));
            }
            let n = ((t1 - t0).abs() / step).ceil().max(1.0) as usize;
            let h = (t1 - t0) / n as f64;
            for i in 0..n {
                let wrap = |e: Error| match e {
                    Error::Singular(reason) => Error::Propagation { t, reason },
                    other => other,
                };
                let k1 = deriv(t, &x, model, &control).map_err(wrap)?;
                let k2 = deriv(t + h / 2.0, &(x + k1 * (h / 2.0)), model, &control).map_err(wrap)?;
                let k3 = deriv(t + h / 2.0, &(x + k2 * (h / 2.0)), model, &control).map_err(wrap)?;
                let k4 = deriv(t + h, &(x + k3 * h), model, &control).map_err(wrap)?;
                let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
                check(t, &next)?;
                x = next;
                t = if i + 1 == n { t1 } else { t0 + h * (i + 1) as f64 };
                if opts.dense || i + 1 == n {
                    out.times.push(t);
                    out.states.push(unpack(&x));
                }
            }
        }
        Integrator::DormandPrince { rtol, atol, max_step } => {
            dormand_prince(&mut x, &mut t, t1, dir, rtol, atol, max_step, model, &control, opts.dense, &mut out)?;
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn dormand_prince<F, M>(
    x: &mut State6,
    t: &mut f64,
    t1: f64,
    dir: f64,
    rtol: f64,
    atol: f64,
    max_step: f64,
    model: &M,
    control: &F,
    dense: bool,
    out: &mut Trajectory,
) -> Result<()>
where
    F: Fn(f64, &HillState) -> Vector3<f64>,
    M: ForceModel,
{
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0,
    ];
    if !(rtol > 0.0 && atol > 0.0 && max_step > 0.0) {
        return Err(Error::Domain("adaptive tolerances must be positive".into()));
    }
    let mut h = (max_step.min((t1 - *t).abs() / 100.0)).max(1e-12) * dir;
    let mut steps = 0usize;
    while (t1 - *t) * dir > 0.0 {
        if (*t + h - t1) * dir > 0.0 {
            h = t1 - *t;
        }
        let mut k = [State6::zeros(); 7];
        for i in 0..7 {
            let mut xi = *x;
            for (j, kj) in k.iter().enumerate().take(i) {
                xi += kj * (A[i][j] * h);
            }
            k[i] = deriv(*t + C[i] * h, &xi, model, control).map_err(|e| Error::Propagation {
                t: *t,
                reason: e.to_string(),
            })?;
        }
        let mut x5 = *x;
        let mut x4 = *x;
        for i in 0..7 {
            x5 += k[i] * (B5[i] * h);
            x4 += k[i] * (B4[i] * h);
        }
        let err = (x5 - x4)
            .iter()
            .zip(x.iter().zip(x5.iter()))
            .map(|(d, (a, b))| (d / (atol + rtol * a.abs().max(b.abs()))).powi(2))
            .sum::<f64>()
            / 6.0;
        let err = err.sqrt();
        if err <= 1.0 {
            check(*t, &x5)?;
            *t += h;
            *x = x5;
            if dense || (t1 - *t) * dir <= 0.0 {
                out.times.push(*t);
                out.states.push(unpack(x));
            }
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * factor).abs().min(max_step) * dir;
        steps += 1;
        if steps > 10_000_000 || h.abs() < 1e-16 {
            return Err(Error::Propagation {
                t: *t,
                reason: "step size underflow".into(),
            });
        }
    }
    Ok(())
}
