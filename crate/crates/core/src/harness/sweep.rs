//! Open-loop horizon measurement sweeps.
//!
//! The camera sits at `(sin a, 0, -cos a) * range` in the Hill frame and looks
//! at the body center. With the Sun along `-x`, `a = 0` is side-on
//! (half-lit), `a = -90` is fully lit and `a = +90` is back-lit.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::closed_loop::stream_seed;
use crate::dynamics::{
    fto_lambda_for_radius, fto_state, propagate, BodyParams, HillState, IntegratorOptions, Normalization,
};
use crate::error::{domain, Result};
use crate::opnav::{measure, Measurement, OpNavConfig};

/// One open-loop measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub case: usize,
    /// Range in km for distance sweeps, view angle in degrees for angle sweeps.
    pub param: f64,
    pub range_km: f64,
    pub valid: bool,
    pub n_points: usize,
    pub err_km: Option<f64>,
    pub bound_km: Option<f64>,
    pub sigma_pix: Option<f64>,
    pub reason: Option<String>,
}

impl SweepRow {
    fn from_measurement(case: usize, param: f64, truth: &Vector3<f64>, m: Result<Measurement>) -> Self {
        let mut row = Self {
            case,
            param,
            range_km: truth.norm(),
            valid: false,
            n_points: 0,
            err_km: None,
            bound_km: None,
            sigma_pix: None,
            reason: None,
        };
        match m {
            Ok(Measurement::Valid(v)) => {
                row.valid = true;
                row.n_points = v.n_points;
                row.err_km = Some((v.z_hill - truth).norm());
                row.bound_km = Some(v.bound_3sigma());
                row.sigma_pix = Some(v.sigma_pix);
            }
            Ok(Measurement::Invalid { n_points, reason }) => {
                row.n_points = n_points;
                row.reason = Some(reason);
            }
            Err(e) => row.reason = Some(e.to_string()),
        }
        row
    }

    pub fn inside_bound(&self) -> Option<bool> {
        Some(self.err_km? <= self.bound_km?)
    }
}

pub fn view_position(angle_deg: f64, range_km: f64) -> Vector3<f64> {
    let a = angle_deg.to_radians();
    Vector3::new(a.sin(), 0.0, -a.cos()) * range_km
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn measure_at(body: &BodyParams, cfg: &OpNavConfig, case: usize, param: f64, pos: Vector3<f64>, seed: u64) -> SweepRow {
    let state = HillState::dimensional(pos, Vector3::zeros());
    let m = measure(&state, body, 0.0, stream_seed(seed, case as u64), cfg);
    SweepRow::from_measurement(case, param, &pos, m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSweep {
    pub rows: Vec<SweepRow>,
    /// Smallest sampled range where the 3-sigma bound reaches 10% of the range.
    pub crossing_km: Option<f64>,
}

/// Side-on measurements at `n_cases` ranges evenly spaced on `[lo_km, hi_km]`.
pub fn sweep_distance(
    body: &BodyParams,
    cfg: &OpNavConfig,
    lo_km: f64,
    hi_km: f64,
    n_cases: usize,
    seed: u64,
) -> Result<DistanceSweep> {
    if !(lo_km > 0.0 && hi_km >= lo_km) || n_cases == 0 {
        return domain("distance sweep needs 0 < lo <= hi and at least one case");
    }
    body.validate()?;
    let rows: Vec<SweepRow> = linspace(lo_km, hi_km, n_cases)
        .into_par_iter()
        .enumerate()
        .map(|(i, r)| measure_at(body, cfg, i, r, view_position(0.0, r), seed))
        .collect();
    let crossing_km = rows
        .iter()
        .filter(|r| r.bound_km.is_some_and(|b| b >= 0.1 * r.range_km))
        .map(|r| r.range_km)
        .reduce(f64::min);
    Ok(DistanceSweep { rows, crossing_km })
}

/// Measurements at a fixed range for `n_cases` view angles on `[lo_deg, hi_deg]`.
pub fn sweep_angle(
    body: &BodyParams,
    cfg: &OpNavConfig,
    range_km: f64,
    lo_deg: f64,
    hi_deg: f64,
    n_cases: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if !(range_km > 0.0 && hi_deg >= lo_deg) || n_cases == 0 {
        return domain("angle sweep needs a positive range, lo <= hi and at least one case");
    }
    body.validate()?;
    Ok(linspace(lo_deg, hi_deg, n_cases)
        .into_par_iter()
        .enumerate()
        .map(|(i, a)| measure_at(body, cfg, i, a, view_position(a, range_km), seed))
        .collect())
}

/// Median of `value(row)` over valid rows, grouped into `bin_km` wide range bins.
/// Returns `(bin center, median, count)` for non-empty bins.
pub fn binned_median(rows: &[SweepRow], bin_km: f64, value: impl Fn(&SweepRow) -> Option<f64>) -> Vec<(f64, f64, usize)> {
    let mut bins: std::collections::BTreeMap<i64, Vec<f64>> = Default::default();
    for r in rows {
        if let Some(v) = value(r) {
            bins.entry((r.range_km / bin_km).floor() as i64).or_default().push(v);
        }
    }
    bins.into_iter()
        .map(|(k, mut v)| {
            v.sort_by(f64::total_cmp);
            let n = v.len();
            let med = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
            ((k as f64 + 0.5) * bin_km, med, n)
        })
        .collect()
}

/// Fraction of valid rows whose error is inside the 3-sigma bound.
pub fn inside_fraction(rows: &[SweepRow]) -> Option<f64> {
    let flags: Vec<bool> = rows.iter().filter_map(SweepRow::inside_bound).collect();
    (!flags.is_empty()).then(|| flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64)
}

/// Measurement along one natural revolution of a frozen terminator orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtoPoint {
    pub t_hr: f64,
    pub row: SweepRow,
}

/// Measures at `n_epochs` evenly spaced times over one period of the frozen
/// terminator orbit with semi-major axis `radius_km`. A rotating body is
/// imaged at its true attitude for each epoch.
pub fn fto_validation(
    body: &BodyParams,
    rotating: bool,
    radius_km: f64,
    n_epochs: usize,
    cfg: &OpNavConfig,
    seed: u64,
) -> Result<Vec<FtoPoint>> {
    if n_epochs == 0 {
        return domain("need at least one epoch");
    }
    let norm = Normalization::new(body);
    let lambda = fto_lambda_for_radius(body, radius_km)?;
    let s0 = fto_state(body, lambda, 1.0, radius_km)?;
    let a = norm.length_to_norm(radius_km);
    let period = std::f64::consts::TAU * a.powf(1.5);
    let beta = crate::dynamics::srp_beta(body)?.nondim;
    let mut states = vec![(0.0, s0)];
    let dt = period / n_epochs as f64;
    let opts = IntegratorOptions::default();
    for k in 1..n_epochs {
        let (t0, s) = states[k - 1];
        let traj = propagate(&s, (t0, t0 + dt), |_, _| Vector3::zeros(), beta, &opts)?;
        let last = *traj.states.last().expect("propagation returns the end state");
        states.push((t0 + dt, last));
    }
    Ok(states
        .into_par_iter()
        .enumerate()
        .map(|(i, (t, s))| {
            let t_s = norm.time_to_seconds(t);
            let d = s.to_dimensional(&norm);
            let image_t = if rotating { t_s } else { 0.0 };
            let m = measure(&d, body, image_t, stream_seed(seed, i as u64), cfg);
            FtoPoint {
                t_hr: t_s / 3600.0,
                row: SweepRow::from_measurement(i, t_s / 3600.0, &d.r, m),
            }
        })
        .collect())
}
