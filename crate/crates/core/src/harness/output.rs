//! CSV tables, SVG plots and run manifests.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::campaign::{CampaignStats, Histogram, QuantileCurves};
use super::closed_loop::{StepRecord, TrialResult};
use super::scenario::ScenarioConfig;
use super::sweep::{binned_median, inside_fraction, DistanceSweep, FtoPoint, SweepRow};
use crate::error::{Error, Result};

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn table<W: Write>(w: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(header).map_err(csv_err)?;
    for r in rows {
        wr.write_record(&r).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub const HISTORY_HEADER: [&str; 37] = [
    "t_hr", "truth_x_km", "truth_y_km", "truth_z_km", "truth_vx_km_s", "truth_vy_km_s", "truth_vz_km_s",
    "est_x_km", "est_y_km", "est_z_km", "est_vx_km_s", "est_vy_km_s", "est_vz_km_s", "meas_x_km", "meas_y_km",
    "meas_z_km", "meas_bound_km", "n_points", "err_norm_km", "bound_km", "ux_mps2", "uy_mps2", "uz_mps2",
    "u_mps2", "V", "Vhat", "g1", "g2", "g3", "P1", "P2", "P3", "angle_deg", "valid", "saturated",
    "r_km", "inside_envelope",
];

/// Per-epoch history of one closed-loop run.
pub fn write_history_csv<W: Write>(history: &[StepRecord], w: W) -> Result<()> {
    let rows = history.iter().map(|s| {
        let mut r = vec![num(s.t_hr)];
        r.extend(s.truth_r_km.iter().chain(&s.truth_v_km_s).chain(&s.est_r_km).chain(&s.est_v_km_s).map(|x| num(*x)));
        match s.meas_km {
            Some(m) => r.extend(m.iter().map(|x| num(*x))),
            None => r.extend(std::iter::repeat_n(String::new(), 3)),
        }
        r.push(opt(s.meas_bound_km));
        r.push(s.n_points.to_string());
        r.push(num(s.err_norm_km));
        r.push(num(s.bound_km));
        r.extend(s.u_m_s2.iter().map(|x| num(*x)));
        r.push(num(nalgebra::Vector3::from(s.u_m_s2).norm()));
        r.push(num(s.v));
        r.push(num(s.v_hat));
        r.extend(s.g.iter().chain(&s.p).map(|x| num(*x)));
        r.push(num(s.angle_deg));
        r.push(s.valid().to_string());
        r.push(s.saturated.to_string());
        r.push(num(nalgebra::Vector3::from(s.truth_r_km).norm()));
        r.push(s.inside_envelope().to_string());
        r
    });
    table(w, &HISTORY_HEADER, rows)
}

pub fn write_campaign_csv<W: Write>(stats: &CampaignStats, w: W) -> Result<()> {
    let rows = stats.trials.iter().map(|t| {
        vec![
            t.trial_id.to_string(),
            t.seed.to_string(),
            t.verdict.clone(),
            num(t.delta_v_mps),
            num(t.fuel_kg),
            num(t.max_accel_mps2),
            t.envelope_inside.to_string(),
            t.envelope_total.to_string(),
        ]
    });
    table(
        w,
        &["trial_id", "seed", "verdict", "delta_v_mps", "fuel_kg", "max_accel_mps2", "envelope_inside", "envelope_total"],
        rows,
    )
}

pub fn write_quantiles_csv<W: Write>(q: &QuantileCurves, w: W) -> Result<()> {
    let rows = (0..q.t_hr.len()).map(|k| {
        let mut r = vec![num(q.t_hr[k]), q.n_trials[k].to_string()];
        r.extend(q.err_km[k].iter().chain(&q.bound_km[k]).map(|x| num(*x)));
        r
    });
    table(
        w,
        &["t_hr", "n_trials", "err_p10_km", "err_p50_km", "err_p90_km", "bound_p10_km", "bound_p50_km", "bound_p90_km"],
        rows,
    )
}

/// `param_name` labels the swept column, e.g. `range_km` or `angle_deg`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], param_name: &str, w: W) -> Result<()> {
    let body = rows.iter().map(|r| {
        vec![
            r.case.to_string(),
            num(r.param),
            num(r.range_km),
            if r.valid { "valid".into() } else { "Invalid".into() },
            r.n_points.to_string(),
            opt(r.err_km),
            opt(r.bound_km),
            opt(r.sigma_pix),
            r.reason.clone().unwrap_or_default(),
        ]
    });
    table(
        w,
        &["case", param_name, "true_range_km", "status", "n_points", "err_km", "bound_km", "sigma_pix", "reason"],
        body,
    )
}

pub fn write_fto_csv<W: Write>(points: &[FtoPoint], w: W) -> Result<()> {
    let body = points.iter().map(|p| {
        let r = &p.row;
        vec![
            num(p.t_hr),
            num(r.range_km),
            r.valid.to_string(),
            r.n_points.to_string(),
            opt(r.err_km),
            opt(r.bound_km),
            opt(r.err_km.map(|e| e / r.range_km)),
            r.inside_bound().map(|b| b.to_string()).unwrap_or_default(),
        ]
    });
    table(
        w,
        &["t_hr", "range_km", "valid", "n_points", "err_km", "bound_km", "err_over_range", "inside_3sigma"],
        body,
    )
}

/// One polyline of an [`svg_line_plot`].
pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub points: Vec<(f64, f64)>,
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const M: f64 = 60.0;

fn bounds(series: &[Series], hlines: &[f64]) -> (f64, f64, f64, f64) {
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    for &h in hlines {
        y0 = y0.min(h);
        y1 = y1.max(h);
    }
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 <= 0.0 {
        y1 = y0 + 1.0;
    }
    (x0, x1, y0, y1)
}

fn frame(title: &str, xlabel: &str, ylabel: &str, b: (f64, f64, f64, f64)) -> String {
    let (x0, x1, y0, y1) = b;
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>
<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>
"#,
        W / 2.0,
        esc(title),
        W / 2.0,
        H - 10.0,
        esc(xlabel),
        H / 2.0,
        H / 2.0,
        esc(ylabel),
        W - 2.0 * M,
        H - 2.0 * M,
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            M + f * (W - 2.0 * M),
            H - M + 16.0,
            tick(x0 + f * (x1 - x0))
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            M - 4.0,
            H - M - f * (H - 2.0 * M) + 4.0,
            tick(y0 + f * (y1 - y0))
        );
    }
    s
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line plot with optional dashed horizontal reference lines.
pub fn svg_line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series], hlines: &[f64]) -> String {
    let b = bounds(series, hlines);
    let (x0, x1, y0, y1) = b;
    let px = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let py = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let mut s = frame(title, xlabel, ylabel, b);
    for &h in hlines {
        let _ = writeln!(
            s,
            r#"<line x1="{M}" x2="{}" y1="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="4 3"/>"#,
            W - M,
            py(h),
            py(h)
        );
    }
    for (i, ser) in series.iter().enumerate() {
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            ser.color,
            pts.join(" ")
        );
        let ly = M + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" x2="{}" y1="{ly}" y2="{ly}" stroke="{}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            W - M - 150.0,
            W - M - 130.0,
            ser.color,
            W - M - 125.0,
            ly + 4.0,
            esc(ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn svg_histogram(title: &str, xlabel: &str, h: &Histogram) -> String {
    let top = h.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let (x0, x1) = (h.edges.first().copied().unwrap_or(0.0), h.edges.last().copied().unwrap_or(1.0));
    let b = (x0, x1, 0.0, top);
    let px = |x: f64| M + (x - x0) / (x1 - x0).max(f64::MIN_POSITIVE) * (W - 2.0 * M);
    let mut s = frame(title, xlabel, "count", b);
    for (i, &c) in h.counts.iter().enumerate() {
        let hgt = c as f64 / top * (H - 2.0 * M);
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="steelblue" stroke="white"/>"#,
            px(h.edges[i]),
            H - M - hgt,
            px(h.edges[i + 1]) - px(h.edges[i]),
            hgt
        );
    }
    s.push_str("</svg>\n");
    s
}

/// SHA-256 of the scenario's canonical JSON.
pub fn config_hash(cfg: &ScenarioConfig) -> Result<String> {
    let json = serde_json::to_string(cfg)?;
    Ok(hex::encode(Sha256::digest(json.as_bytes())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub scenario: Option<String>,
    pub config_sha256: Option<String>,
    pub seed: Option<u64>,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            tool: "proxnav".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            scenario: None,
            config_sha256: None,
            seed: None,
            files: Vec::new(),
        }
    }

    pub fn with_config(mut self, cfg: &ScenarioConfig) -> Result<Self> {
        self.scenario = Some(cfg.name.clone());
        self.config_sha256 = Some(config_hash(cfg)?);
        self.seed = Some(cfg.seed);
        Ok(self)
    }
}

/// Creates files inside one run directory and records their names.
pub struct RunDir {
    root: PathBuf,
    pub manifest: Manifest,
}

impl RunDir {
    pub fn create(root: impl AsRef<Path>, manifest: Manifest) -> Result<Self> {
        fs::create_dir_all(root.as_ref())?;
        Ok(Self {
            root: root.as_ref().to_path_buf(),
            manifest,
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write_with(&mut self, name: &str, f: impl FnOnce(&mut fs::File) -> Result<()>) -> Result<PathBuf> {
        let p = self.root.join(name);
        let mut file = fs::File::create(&p)?;
        f(&mut file)?;
        file.flush()?;
        self.manifest.files.push(name.to_string());
        Ok(p)
    }

    pub fn write_str(&mut self, name: &str, content: &str) -> Result<PathBuf> {
        self.write_with(name, |f| Ok(f.write_all(content.as_bytes())?))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let s = serde_json::to_string_pretty(value)?;
        self.write_str(name, &(s + "\n"))
    }

    /// Writes `manifest.json` last.
    pub fn finish(mut self) -> Result<PathBuf> {
        self.manifest.files.push("manifest.json".into());
        let s = serde_json::to_string_pretty(&self.manifest)? + "\n";
        let p = self.root.join("manifest.json");
        fs::write(&p, s)?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummaryFile {
    pub name: String,
    pub seed: u64,
    pub verdict: String,
    pub success: bool,
    pub delta_v_mps: f64,
    pub delta_v_trapezoid_mps: f64,
    pub fuel_kg: f64,
    pub max_accel_mps2: f64,
    pub v0: f64,
    pub v_final: f64,
    pub envelope_inside: usize,
    pub envelope_total: usize,
    pub min_angle_deg: f64,
}

impl TrialSummaryFile {
    pub fn new(r: &TrialResult) -> Self {
        let (inside, total) = r.envelope_counts();
        Self {
            name: r.name.clone(),
            seed: r.seed,
            verdict: r.verdict.label(),
            success: r.verdict.is_success(),
            delta_v_mps: r.delta_v,
            delta_v_trapezoid_mps: r.delta_v_trapezoid,
            fuel_kg: r.fuel_mass,
            max_accel_mps2: r.max_accel,
            v0: r.v0,
            v_final: r.v_final,
            envelope_inside: inside,
            envelope_total: total,
            min_angle_deg: r.history.iter().map(|s| s.angle_deg).fold(f64::INFINITY, f64::min),
        }
    }
}

/// history.csv, summary.json, scenario.json and the plots of one run.
pub fn write_trial_outputs(dir: impl AsRef<Path>, cfg: &ScenarioConfig, r: &TrialResult, command: &str) -> Result<PathBuf> {
    let mut d = RunDir::create(dir, Manifest::new(command).with_config(cfg)?)?;
    d.write_json("scenario.json", cfg)?;
    d.write_with("history.csv", |f| write_history_csv(&r.history, f))?;
    d.write_json("summary.json", &TrialSummaryFile::new(r))?;
    let t = |f: &dyn Fn(&StepRecord) -> f64| r.history.iter().map(|s| (s.t_hr, f(s))).collect::<Vec<_>>();
    d.write_str(
        "error.svg",
        &svg_line_plot(
            "Position error and filter bound",
            "time [h]",
            "km",
            &[
                Series { label: "|est - truth|", color: "crimson", points: t(&|s| s.err_norm_km) },
                Series { label: "EKF 3-sigma", color: "navy", points: t(&|s| s.bound_km) },
            ],
            &[],
        ),
    )?;
    d.write_str(
        "angle.svg",
        &svg_line_plot(
            "Angle from the Sun line",
            "time [h]",
            "deg",
            &[Series { label: "angle", color: "darkgreen", points: t(&|s| s.angle_deg) }],
            &[cfg.constraints.cone_half_angle_deg],
        ),
    )?;
    for (name, i, j) in [("xy", 0, 1), ("xz", 0, 2), ("yz", 1, 2)] {
        let proj = |f: &dyn Fn(&StepRecord) -> [f64; 3]| r.history.iter().map(|s| (f(s)[i], f(s)[j])).collect::<Vec<_>>();
        d.write_str(
            &format!("trajectory_{name}.svg"),
            &svg_line_plot(
                &format!("Trajectory, {name} projection"),
                &format!("{} [km]", &name[..1]),
                &format!("{} [km]", &name[1..]),
                &[
                    Series { label: "truth", color: "black", points: proj(&|s| s.truth_r_km) },
                    Series { label: "estimate", color: "orange", points: proj(&|s| s.est_r_km) },
                ],
                &[],
            ),
        )?;
    }
    d.finish()
}

/// campaign.csv, quantiles.csv, stats.json and plots of a Monte Carlo campaign.
pub fn write_campaign_outputs(dir: impl AsRef<Path>, cfg: &ScenarioConfig, s: &CampaignStats, command: &str) -> Result<PathBuf> {
    let mut m = Manifest::new(command).with_config(cfg)?;
    m.seed = Some(s.base_seed);
    let mut d = RunDir::create(dir, m)?;
    d.write_json("scenario.json", cfg)?;
    d.write_with("campaign.csv", |f| write_campaign_csv(s, f))?;
    d.write_with("quantiles.csv", |f| write_quantiles_csv(&s.quantiles, f))?;
    d.write_json("stats.json", s)?;
    d.write_str("delta_v_hist.svg", &svg_histogram("Delta-v per trial", "delta-v [m/s]", &s.delta_v_histogram))?;
    let q = &s.quantiles;
    let curve = |v: &[[f64; 3]], k: usize| q.t_hr.iter().zip(v).map(|(t, x)| (*t, x[k])).collect::<Vec<_>>();
    d.write_str(
        "error_quantiles.svg",
        &svg_line_plot(
            "Position error and bound across trials",
            "time [h]",
            "km",
            &[
                Series { label: "error p50", color: "crimson", points: curve(&q.err_km, 1) },
                Series { label: "error p90", color: "salmon", points: curve(&q.err_km, 2) },
                Series { label: "bound p50", color: "navy", points: curve(&q.bound_km, 1) },
            ],
            &[],
        ),
    )?;
    d.finish()
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSweepSummary {
    pub n_cases: usize,
    pub n_valid: usize,
    pub crossing_km: Option<f64>,
    pub inside_fraction: Option<f64>,
    /// `(bin center, median bound, count)` over 5 km bins.
    pub median_bound_5km: Vec<(f64, f64, usize)>,
    pub median_err_5km: Vec<(f64, f64, usize)>,
}

impl DistanceSweepSummary {
    pub fn new(s: &DistanceSweep) -> Self {
        Self {
            n_cases: s.rows.len(),
            n_valid: s.rows.iter().filter(|r| r.valid).count(),
            crossing_km: s.crossing_km,
            inside_fraction: inside_fraction(&s.rows),
            median_bound_5km: binned_median(&s.rows, 5.0, |r| r.bound_km),
            median_err_5km: binned_median(&s.rows, 5.0, |r| r.err_km),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleSweepSummary {
    pub n_cases: usize,
    pub n_invalid: usize,
    pub invalid_min_deg: Option<f64>,
    pub invalid_max_deg: Option<f64>,
    /// Largest angle with a valid measurement.
    pub valid_max_deg: Option<f64>,
    pub inside_fraction: Option<f64>,
}

impl AngleSweepSummary {
    pub fn new(rows: &[SweepRow]) -> Self {
        let inv: Vec<f64> = rows.iter().filter(|r| !r.valid).map(|r| r.param).collect();
        Self {
            n_cases: rows.len(),
            n_invalid: inv.len(),
            invalid_min_deg: inv.iter().copied().reduce(f64::min),
            invalid_max_deg: inv.iter().copied().reduce(f64::max),
            valid_max_deg: rows.iter().filter(|r| r.valid).map(|r| r.param).reduce(f64::max),
            inside_fraction: inside_fraction(rows),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtoSummary {
    pub n_epochs: usize,
    pub n_valid: usize,
    pub max_err_over_range: Option<f64>,
    pub inside_fraction: Option<f64>,
}

impl FtoSummary {
    pub fn new(points: &[FtoPoint]) -> Self {
        let rows: Vec<SweepRow> = points.iter().map(|p| p.row.clone()).collect();
        Self {
            n_epochs: rows.len(),
            n_valid: rows.iter().filter(|r| r.valid).count(),
            max_err_over_range: rows.iter().filter_map(|r| Some(r.err_km? / r.range_km)).reduce(f64::max),
            inside_fraction: inside_fraction(&rows),
        }
    }
}

fn sweep_plot(title: &str, xlabel: &str, rows: &[SweepRow], extra: Option<Series>) -> String {
    let pts = |f: &dyn Fn(&SweepRow) -> Option<f64>| rows.iter().filter_map(|r| Some((r.param, f(r)?))).collect::<Vec<_>>();
    let mut series = vec![
        Series { label: "error", color: "crimson", points: pts(&|r| r.err_km) },
        Series { label: "3-sigma bound", color: "navy", points: pts(&|r| r.bound_km) },
    ];
    series.extend(extra);
    svg_line_plot(title, xlabel, "km", &series, &[])
}

pub fn write_distance_sweep_outputs(dir: impl AsRef<Path>, s: &DistanceSweep, seed: u64, command: &str) -> Result<PathBuf> {
    let mut m = Manifest::new(command);
    m.seed = Some(seed);
    let mut d = RunDir::create(dir, m)?;
    d.write_with("sweep_distance.csv", |f| write_sweep_csv(&s.rows, "range_km", f))?;
    d.write_json("summary.json", &DistanceSweepSummary::new(s))?;
    let ten = Series {
        label: "10% of range",
        color: "gray",
        points: s.rows.iter().map(|r| (r.param, 0.1 * r.range_km)).collect(),
    };
    d.write_str("sweep_distance.svg", &sweep_plot("Error and bound vs range", "range [km]", &s.rows, Some(ten)))?;
    d.finish()
}

pub fn write_angle_sweep_outputs(dir: impl AsRef<Path>, rows: &[SweepRow], seed: u64, command: &str) -> Result<PathBuf> {
    let mut m = Manifest::new(command);
    m.seed = Some(seed);
    let mut d = RunDir::create(dir, m)?;
    d.write_with("sweep_angle.csv", |f| write_sweep_csv(rows, "angle_deg", f))?;
    d.write_json("summary.json", &AngleSweepSummary::new(rows))?;
    d.write_str("sweep_angle.svg", &sweep_plot("Error and bound vs view angle", "angle from side-on [deg]", rows, None))?;
    d.finish()
}

pub fn write_fto_outputs(dir: impl AsRef<Path>, points: &[FtoPoint], seed: u64, command: &str) -> Result<PathBuf> {
    let mut m = Manifest::new(command);
    m.seed = Some(seed);
    let mut d = RunDir::create(dir, m)?;
    d.write_with("fto.csv", |f| write_fto_csv(points, f))?;
    d.write_json("summary.json", &FtoSummary::new(points))?;
    let rows: Vec<SweepRow> = points.iter().map(|p| p.row.clone()).collect();
    d.write_str("fto.svg", &sweep_plot("Error and bound along one revolution", "time [h]", &rows, None))?;
    d.finish()
}

fn scalar(v: &serde_json::Value) -> Option<String> {
    use serde_json::Value;
    match v {
        Value::Null => Some("-".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        Value::Object(o) if o.values().all(|x| x.is_number()) && !o.is_empty() => Some(
            o.iter().map(|(k, x)| format!("{k}: {x}")).collect::<Vec<_>>().join(", "),
        ),
        _ => None,
    }
}

/// Markdown digest of a run directory: its manifest and the scalar fields of
/// `summary.json` or `stats.json`.
pub fn report_markdown(dir: impl AsRef<Path>) -> Result<String> {
    let dir = dir.as_ref();
    let read = |name: &str| -> Result<Option<serde_json::Value>> {
        let p = dir.join(name);
        if !p.exists() {
            return Ok(None);
        }
        Ok(Some(serde_json::from_str(&fs::read_to_string(p)?)?))
    };
    let manifest = read("manifest.json")?.ok_or_else(|| Error::Io(format!("{} has no manifest.json", dir.display())))?;
    let mut s = String::new();
    let cmd = manifest.get("command").and_then(|v| v.as_str()).unwrap_or("?");
    let _ = writeln!(s, "# proxnav {cmd}\n");
    for key in ["scenario", "seed", "config_sha256", "version"] {
        if let Some(v) = manifest.get(key).and_then(scalar) {
            let _ = writeln!(s, "- {key}: {v}");
        }
    }
    for name in ["summary.json", "stats.json"] {
        if let Some(serde_json::Value::Object(o)) = read(name)? {
            let _ = writeln!(s, "\n## {name}\n\n| field | value |\n|---|---|");
            for (k, v) in &o {
                if let Some(x) = scalar(v) {
                    let _ = writeln!(s, "| {k} | {x} |");
                }
            }
        }
    }
    if let Some(files) = manifest.get("files").and_then(|v| v.as_array()) {
        let _ = writeln!(s, "\n## files\n");
        for f in files.iter().filter_map(|f| f.as_str()) {
            let _ = writeln!(s, "- {f}");
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_is_well_formed_for_empty_and_flat_data() {
        let s = svg_line_plot("t", "x", "y", &[Series { label: "a<b", color: "red", points: vec![] }], &[]);
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("a&lt;b"));
        let s = svg_line_plot("t", "x", "y", &[Series { label: "a", color: "red", points: vec![(1.0, 2.0), (1.0, 2.0)] }], &[30.0]);
        assert!(!s.contains("NaN") && !s.contains("inf"));
        let h = svg_histogram("h", "x", &Histogram::new(&[0.1, 0.2], 3));
        assert_eq!(h.matches("<rect").count(), 2 + 3);
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let a = ScenarioConfig::stationkeeping();
        let mut b = a.clone();
        assert_eq!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        b.seed += 1;
        assert_ne!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        assert_eq!(config_hash(&a).unwrap().len(), 64);
    }

    #[test]
    fn sweep_csv_marks_invalid_rows() {
        let rows = vec![SweepRow {
            case: 0,
            param: 80.0,
            range_km: 5.0,
            valid: false,
            n_points: 2,
            err_km: None,
            bound_km: None,
            sigma_pix: None,
            reason: Some("too few".into()),
        }];
        let mut buf = Vec::new();
        write_sweep_csv(&rows, "angle_deg", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "case,angle_deg,true_range_km,status,n_points,err_km,bound_km,sigma_pix,reason\n0,80,5,Invalid,2,,,,too few\n");
    }
}
