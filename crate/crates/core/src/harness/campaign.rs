use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::closed_loop::{run_closed_loop, stream_seed, TrialResult};
use super::scenario::ScenarioConfig;
use crate::error::{Error, Result};

/// Per-trial line of a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial_id: usize,
    pub seed: u64,
    pub verdict: String,
    pub delta_v_mps: f64,
    pub fuel_kg: f64,
    pub max_accel_mps2: f64,
    pub envelope_inside: usize,
    pub envelope_total: usize,
}

impl TrialSummary {
    fn from_result(trial_id: usize, r: &TrialResult) -> Self {
        let (inside, total) = r.envelope_counts();
        Self {
            trial_id,
            seed: r.seed,
            verdict: r.verdict.label(),
            delta_v_mps: r.delta_v,
            fuel_kg: r.fuel_mass,
            max_accel_mps2: r.max_accel,
            envelope_inside: inside,
            envelope_total: total,
        }
    }
}

/// 10th, 50th and 90th percentiles across trials at each measurement epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuantileCurves {
    pub t_hr: Vec<f64>,
    pub n_trials: Vec<usize>,
    pub err_km: Vec<[f64; 3]>,
    pub bound_km: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// `n_bins` equal bins on `[0, max]` (upper edge inclusive).
    pub fn new(values: &[f64], n_bins: usize) -> Self {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let hi = finite.iter().copied().fold(0.0, f64::max);
        let hi = if hi > 0.0 { hi } else { 1.0 };
        let n = n_bins.max(1);
        let edges: Vec<f64> = (0..=n).map(|i| hi * i as f64 / n as f64).collect();
        let mut counts = vec![0; n];
        for v in finite {
            let i = ((v / hi) * n as f64).floor() as usize;
            counts[i.min(n - 1)] += 1;
        }
        Self { edges, counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignStats {
    pub name: String,
    pub base_seed: u64,
    pub n_trials: usize,
    pub n_success: usize,
    pub success_rate: f64,
    pub verdict_counts: BTreeMap<String, usize>,
    pub trials: Vec<TrialSummary>,
    /// Fraction of all recorded epochs whose truth error is inside the filter's 3-sigma bound.
    pub envelope_fraction: f64,
    pub quantiles: QuantileCurves,
    pub delta_v_histogram: Histogram,
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (i, f) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

fn quantiles3(mut v: Vec<f64>) -> [f64; 3] {
    v.sort_by(f64::total_cmp);
    [quantile(&v, 0.1), quantile(&v, 0.5), quantile(&v, 0.9)]
}

/// Configuration of trial `i`: same scenario, seed derived from `(base_seed, i)`.
pub fn trial_config(cfg: &ScenarioConfig, base_seed: u64, i: usize) -> ScenarioConfig {
    let mut c = cfg.clone();
    c.seed = stream_seed(base_seed, i as u64);
    c
}

/// Runs `n_trials` closed loops. `parallelism` bounds the worker count
/// (`None` uses the global pool). Results do not depend on it.
pub fn run_monte_carlo(
    cfg: &ScenarioConfig,
    n_trials: usize,
    base_seed: u64,
    parallelism: Option<usize>,
) -> Result<CampaignStats> {
    run_monte_carlo_with(cfg, n_trials, base_seed, parallelism, |_, _| {})
}

/// [`run_monte_carlo`] with a callback on every finished trial.
pub fn run_monte_carlo_with<F>(
    cfg: &ScenarioConfig,
    n_trials: usize,
    base_seed: u64,
    parallelism: Option<usize>,
    on_trial: F,
) -> Result<CampaignStats>
where
    F: Fn(usize, &TrialResult) + Sync,
{
    if n_trials == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    cfg.validate()?;
    let work = || -> Vec<TrialResult> {
        (0..n_trials)
            .into_par_iter()
            .map(|i| {
                let r = run_closed_loop(&trial_config(cfg, base_seed, i));
                on_trial(i, &r);
                r
            })
            .collect()
    };
    let results = match parallelism {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    Ok(aggregate(&cfg.name, base_seed, &results))
}

/// Campaign statistics from finished trials, in trial order.
pub fn aggregate(name: &str, base_seed: u64, results: &[TrialResult]) -> CampaignStats {
    let trials: Vec<TrialSummary> = results
        .iter()
        .enumerate()
        .map(|(i, r)| TrialSummary::from_result(i, r))
        .collect();
    let n_success = results.iter().filter(|r| r.verdict.is_success()).count();
    let mut verdict_counts = BTreeMap::new();
    for t in &trials {
        *verdict_counts.entry(t.verdict.clone()).or_insert(0) += 1;
    }
    let (inside, total) = trials
        .iter()
        .fold((0, 0), |(a, b), t| (a + t.envelope_inside, b + t.envelope_total));

    let longest = results.iter().map(|r| r.history.len()).max().unwrap_or(0);
    let mut q = QuantileCurves::default();
    for k in 0..longest {
        let at: Vec<_> = results.iter().filter_map(|r| r.history.get(k)).collect();
        q.t_hr.push(at[0].t_hr);
        q.n_trials.push(at.len());
        q.err_km.push(quantiles3(at.iter().map(|s| s.err_norm_km).collect()));
        q.bound_km.push(quantiles3(at.iter().map(|s| s.bound_km).collect()));
    }
    let dv: Vec<f64> = trials.iter().map(|t| t.delta_v_mps).collect();

    CampaignStats {
        name: name.to_string(),
        base_seed,
        n_trials: results.len(),
        n_success,
        success_rate: n_success as f64 / results.len().max(1) as f64,
        verdict_counts,
        trials,
        envelope_fraction: if total > 0 { inside as f64 / total as f64 } else { f64::NAN },
        quantiles: q,
        delta_v_histogram: Histogram::new(&dv, 10),
    }
}
