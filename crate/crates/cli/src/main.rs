use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;
use proxnav::dynamics::BodyParams;
use proxnav::harness::{
    fto_validation, report_markdown, run_closed_loop, run_monte_carlo, sweep_angle, sweep_distance,
    write_angle_sweep_outputs, write_campaign_outputs, write_distance_sweep_outputs, write_fto_outputs,
    write_trial_outputs, ControllerMode, Manifest, RunDir, ScenarioConfig, ShapeSpec,
};
use proxnav::imaging::{detect_edges, render, write_limb_csv, write_pgm, CameraPose};
use proxnav::opnav::{measure_limb, Measurement, OpNavConfig};
use proxnav::Error;

#[derive(Parser)]
#[command(name = "proxnav", version, about = "Closed-loop horizon navigation and constrained control near a small body")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render one image, extract its limb and solve for position.
    Render(RenderArgs),
    /// Open-loop measurement error and bound against range, side-on.
    SweepDistance(SweepDistanceArgs),
    /// Open-loop measurement error and bound against view angle.
    SweepAngle(SweepAngleArgs),
    /// Measurements along one revolution of a frozen terminator orbit.
    Fto(FtoArgs),
    /// One closed-loop trial.
    Run(RunArgs),
    /// Seeded Monte Carlo campaign of closed-loop trials.
    MonteCarlo(McArgs),
    /// Summarize a run directory as markdown.
    Report(ReportArgs),
    /// Print a built-in scenario as JSON.
    Scenario {
        #[arg(default_value = "stationkeeping")]
        preset: String,
    },
}

/// `x,y,z` as three finite numbers.
fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [a, b, c] if v.iter().all(|x| x.is_finite()) => Ok([a, b, c]),
        _ => Err(format!("expected three finite comma-separated numbers, got `{s}`")),
    }
}

#[derive(Args)]
struct ShapeArgs {
    /// Ellipsoid semi-axis ratios, e.g. 2.5,1,1.
    #[arg(long, value_parser = parse_triple)]
    ellipsoid: Option<[f64; 3]>,
    /// Spin the ellipsoid with the body's rotation period.
    #[arg(long, requires = "ellipsoid")]
    rotating: bool,
}

impl ShapeArgs {
    fn shape_spec(&self) -> Option<ShapeSpec> {
        self.ellipsoid.map(|ratios| ShapeSpec::Ellipsoid {
            ratios,
            rotating: self.rotating,
        })
    }

    fn body(&self) -> BodyParams {
        let b = BodyParams::bennu();
        match self.ellipsoid {
            Some(r) => b.with_shape(r),
            None => b,
        }
    }
}

#[derive(Args)]
struct RenderArgs {
    /// Spacecraft position in the Hill frame, km.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true, default_value = "0,0,-5")]
    position: [f64; 3],
    /// Image time, s (sets the body attitude).
    #[arg(long, default_value_t = 0.0)]
    time: f64,
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, default_value = "runs/render")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepDistanceArgs {
    #[arg(long, default_value_t = 100)]
    cases: usize,
    #[arg(long, default_value_t = 1.0)]
    min_km: f64,
    #[arg(long, default_value_t = 30.0)]
    max_km: f64,
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, default_value = "runs/sweep-distance")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepAngleArgs {
    #[arg(long, default_value_t = 100)]
    cases: usize,
    #[arg(long, default_value_t = 5.0)]
    range_km: f64,
    #[arg(long, default_value_t = -90.0, allow_negative_numbers = true)]
    min_deg: f64,
    #[arg(long, default_value_t = 90.0, allow_negative_numbers = true)]
    max_deg: f64,
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, default_value = "runs/sweep-angle")]
    out: PathBuf,
}

#[derive(Args)]
struct FtoArgs {
    #[arg(long, default_value_t = 2.0429)]
    radius_km: f64,
    #[arg(long, default_value_t = 48)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, default_value = "runs/fto")]
    out: PathBuf,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in scenario: stationkeeping or approach.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, conflicts_with = "unconstrained")]
    constrained: bool,
    #[arg(long)]
    unconstrained: bool,
    #[command(flatten)]
    shape: ShapeArgs,
}

impl ScenarioArgs {
    fn load(&self) -> Result<ScenarioConfig, CliError> {
        let mut cfg = match (&self.scenario, &self.preset) {
            (Some(p), _) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
                ScenarioConfig::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
            }
            (None, name) => {
                let name = name.as_deref().unwrap_or("stationkeeping");
                ScenarioConfig::preset(name).ok_or_else(|| CliError::Usage(format!("unknown preset `{name}`")))?
            }
        };
        if self.constrained {
            cfg = cfg.with_mode(ControllerMode::Constrained);
        }
        if self.unconstrained {
            cfg = cfg.with_mode(ControllerMode::Unconstrained);
        }
        if let Some(s) = self.shape.shape_spec() {
            cfg = cfg.with_shape(s);
        }
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "runs/run")]
    out: PathBuf,
}

#[derive(Args)]
struct McArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Base seed; trial seeds derive from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "runs/monte-carlo")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory written by another subcommand.
    dir: PathBuf,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn opnav_cfg(noise: f64) -> OpNavConfig {
    OpNavConfig {
        noise_sigma: noise,
        ..OpNavConfig::default()
    }
}

fn cmd_render(a: &RenderArgs) -> Result<(), CliError> {
    let body = a.shape.body();
    let cfg = opnav_cfg(a.noise);
    let pos = Vector3::from(a.position);
    let pose = CameraPose::nadir(pos)?;
    let img = render(&body, &pose, &cfg.intrinsics, a.time, cfg.noise_sigma, a.seed)?;
    let limb = detect_edges(&img, cfg.rel_threshold, cfg.abs_min_gradient);
    let m = measure_limb(&limb, &body, &pose, a.time, &cfg);
    let mut manifest = Manifest::new("render");
    manifest.seed = Some(a.seed);
    let mut d = RunDir::create(&a.out, manifest)?;
    d.write_with("image.pgm", |f| write_pgm(&img, f))?;
    d.write_with("limb.csv", |f| write_limb_csv(&limb, f))?;
    let summary = match &m {
        Measurement::Valid(v) => serde_json::json!({
            "valid": true,
            "n_points": v.n_points,
            "position_km": pos.as_slice(),
            "measured_km": v.z_hill.as_slice(),
            "err_km": (v.z_hill - pos).norm(),
            "bound_km": v.bound_3sigma(),
            "sigma_pix": v.sigma_pix,
        }),
        Measurement::Invalid { n_points, reason } => serde_json::json!({
            "valid": false,
            "n_points": n_points,
            "position_km": pos.as_slice(),
            "reason": reason,
        }),
    };
    d.write_json("summary.json", &summary)?;
    d.finish()?;
    println!("{}", serde_json::to_string(&summary).map_err(|e| CliError::Runtime(e.to_string()))?);
    Ok(())
}

fn cmd_sweep_distance(a: &SweepDistanceArgs) -> Result<(), CliError> {
    let s = sweep_distance(&a.shape.body(), &opnav_cfg(a.noise), a.min_km, a.max_km, a.cases, a.seed)?;
    write_distance_sweep_outputs(&a.out, &s, a.seed, "sweep-distance")?;
    let valid = s.rows.iter().filter(|r| r.valid).count();
    match s.crossing_km {
        Some(c) => println!("{valid}/{} valid; bound reaches 10% of range at {c:.2} km", s.rows.len()),
        None => println!("{valid}/{} valid; bound stays below 10% of range", s.rows.len()),
    }
    Ok(())
}

fn cmd_sweep_angle(a: &SweepAngleArgs) -> Result<(), CliError> {
    let rows = sweep_angle(&a.shape.body(), &opnav_cfg(a.noise), a.range_km, a.min_deg, a.max_deg, a.cases, a.seed)?;
    write_angle_sweep_outputs(&a.out, &rows, a.seed, "sweep-angle")?;
    let invalid: Vec<f64> = rows.iter().filter(|r| !r.valid).map(|r| r.param).collect();
    match (invalid.first(), invalid.last()) {
        (Some(lo), Some(hi)) => println!("{} of {} invalid, from {lo:.1} to {hi:.1} deg", invalid.len(), rows.len()),
        _ => println!("all {} measurements valid", rows.len()),
    }
    Ok(())
}

fn cmd_fto(a: &FtoArgs) -> Result<(), CliError> {
    let pts = fto_validation(&a.shape.body(), a.shape.rotating, a.radius_km, a.epochs, &opnav_cfg(a.noise), a.seed)?;
    write_fto_outputs(&a.out, &pts, a.seed, "fto")?;
    let s = proxnav::harness::FtoSummary::new(&pts);
    println!(
        "{}/{} valid; worst error {:.2}% of range; inside 3-sigma {:.1}%",
        s.n_valid,
        s.n_epochs,
        100.0 * s.max_err_over_range.unwrap_or(f64::NAN),
        100.0 * s.inside_fraction.unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_run(a: &RunArgs) -> Result<(), CliError> {
    let mut cfg = a.scenario.load()?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let r = run_closed_loop(&cfg);
    write_trial_outputs(&a.out, &cfg, &r, "run")?;
    println!(
        "{}: {} | delta-v {:.4} m/s | fuel {:.3e} kg | max accel {:.3e} m/s^2",
        cfg.name,
        r.verdict.label(),
        r.delta_v,
        r.fuel_mass,
        r.max_accel
    );
    Ok(())
}

fn cmd_monte_carlo(a: &McArgs) -> Result<(), CliError> {
    let cfg = a.scenario.load()?;
    if a.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let s = run_monte_carlo(&cfg, a.trials, a.seed, a.threads)?;
    write_campaign_outputs(&a.out, &cfg, &s, "monte-carlo")?;
    println!(
        "{}: {}/{} success ({:.1}%), envelope fraction {:.3}",
        cfg.name,
        s.n_success,
        s.n_trials,
        100.0 * s.success_rate,
        s.envelope_fraction
    );
    for (v, n) in &s.verdict_counts {
        println!("  {v}: {n}");
    }
    Ok(())
}

fn cmd_report(dir: &Path) -> Result<(), CliError> {
    if !dir.join("manifest.json").exists() {
        return Err(CliError::Usage(format!("{} is not a run directory", dir.display())));
    }
    let md = report_markdown(dir)?;
    std::fs::write(dir.join("report.md"), &md).map_err(|e| CliError::Runtime(e.to_string()))?;
    emit(&md);
    Ok(())
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Render(a) => cmd_render(a),
        Cmd::SweepDistance(a) => cmd_sweep_distance(a),
        Cmd::SweepAngle(a) => cmd_sweep_angle(a),
        Cmd::Fto(a) => cmd_fto(a),
        Cmd::Run(a) => cmd_run(a),
        Cmd::MonteCarlo(a) => cmd_monte_carlo(a),
        Cmd::Report(a) => cmd_report(&a.dir),
        Cmd::Scenario { preset } => ScenarioConfig::preset(preset)
            .map(|c| emit(&(c.to_json() + "\n")))
            .ok_or_else(|| CliError::Usage(format!("unknown preset `{preset}`"))),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
