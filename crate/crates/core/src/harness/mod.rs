//! Scenarios, the closed navigation and control loop, Monte Carlo campaigns,
//! OpNav sweeps and file output.

mod campaign;
mod closed_loop;
mod output;
mod scenario;
mod sweep;

pub use closed_loop::{
    cone_angle_deg, delta_v_trapezoid, detect_divergence, fuel_mass, run_closed_loop, stream_seed, success_check,
    ControlSegment, DivergenceReason, StepRecord, TrialResult, Verdict, G0,
};
pub use scenario::{ConstraintSpec, ControllerMode, ScenarioConfig, ShapeSpec, Spacecraft, SuccessCriterion, TargetSpec};
pub use campaign::{
    aggregate, quantile, run_monte_carlo, run_monte_carlo_with, trial_config, CampaignStats, Histogram, QuantileCurves,
    TrialSummary,
};
pub use output::{
    config_hash, report_markdown, svg_histogram, write_angle_sweep_outputs, write_distance_sweep_outputs,
    write_fto_outputs, AngleSweepSummary, DistanceSweepSummary, FtoSummary, svg_line_plot, write_campaign_csv, write_campaign_outputs, write_fto_csv,
    write_history_csv, write_quantiles_csv, write_sweep_csv, write_trial_outputs, Manifest, RunDir, Series,
    TrialSummaryFile, HISTORY_HEADER,
};
pub use sweep::{
    binned_median, fto_validation, inside_fraction, sweep_angle, sweep_distance, view_position, DistanceSweep, FtoPoint,
    SweepRow,
};
