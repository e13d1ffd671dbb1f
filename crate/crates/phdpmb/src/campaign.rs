//! Seeded Monte Carlo runs and their aggregation.
//!
//! Run `r` draws its scenario from `seed::stream(base, &[r])` and gives the
//! smoother `seed::derive(base, &[r])`, so particle `p` of the run uses
//! `seed::derive(base, &[r, p])`. Results do not depend on the number of
//! worker threads.

use phdpmb_core::gaussian::Vector;
use phdpmb_core::metrics::{gospa, tgospa, GospaParams, GospaResult, TgospaParams, TgospaResult};
use phdpmb_core::models::{build_nominal_scenario, simulate_measurements, GroundTruth};
use phdpmb_core::phd::{run_forward, ForwardRecord};
use phdpmb_core::smoother::{backward_simulate, select_estimate, smoothed_means, trajectories_states_at};
use phdpmb_core::{seed, Trajectory};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{CampaignConfig, Distance, Estimator};
use crate::HarnessError;

/// Everything one run produces before evaluation.
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub truth: GroundTruth<4>,
    pub record: ForwardRecord<4, 2>,
    pub estimate: Vec<Trajectory<4>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub run: usize,
    /// Per step `1..=K`.
    pub phd: Vec<GospaResult>,
    pub hybrid: Vec<GospaResult>,
    /// Trajectory GOSPA of the smoother's estimate, every part divided by K.
    pub tgospa: TgospaResult,
    pub truth: Vec<Trajectory<4>>,
    pub estimate: Vec<Trajectory<4>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunFailure {
    pub run: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignResult {
    pub config: CampaignConfig,
    /// Successful runs in run order.
    pub runs: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
}

/// Seed of run `run`.
pub fn run_seed(base: u64, run: usize) -> u64 {
    seed::derive(base, &[run as u64])
}

/// Generates and processes one run: truth, measurements, forward filter,
/// backward simulation and the trajectory estimate.
pub fn simulate_run(config: &CampaignConfig, run: usize) -> Result<RunArtifacts, HarnessError> {
    let (truth, record) = simulate_forward(config, run)?;
    let estimate = smooth_record(config, &record, run_seed(config.seed, run))?;
    Ok(RunArtifacts { truth, record, estimate })
}

/// Truth, measurements and the forward pass of one run.
pub fn simulate_forward(
    config: &CampaignConfig,
    run: usize,
) -> Result<(GroundTruth<4>, ForwardRecord<4, 2>), HarnessError> {
    let scenario = config.scenario_config()?;
    let mut rng = seed::stream(config.seed, &[run as u64]);
    let truth = build_nominal_scenario(&scenario, &mut rng)?;
    let model = &scenario.model;
    let measurements = simulate_measurements(&truth, &model.measurement, &model.clutter, &mut rng)?;
    let record = run_forward(&measurements, model, &config.filter_config())?;
    Ok((truth, record))
}

/// Backward simulation and the configured trajectory estimate.
pub fn smooth_record(
    config: &CampaignConfig,
    record: &ForwardRecord<4, 2>,
    smoother_seed: u64,
) -> Result<Vec<Trajectory<4>>, HarnessError> {
    let model = config.system_model()?;
    let particles = backward_simulate(record, &model, &config.smoother_config(smoother_seed))?;
    let chosen = &particles[select_estimate(&particles)?];
    Ok(match config.smoother.estimator {
        Estimator::Sampled => chosen.trajectories.clone(),
        Estimator::SmoothedMean => smoothed_means(chosen, record, &model.motion)?,
    })
}

fn position(x: &Vector<4>) -> Vector<2> {
    Vector::<2>::new(x[0], x[2])
}

fn project<const D: usize>(ts: &[Trajectory<4>], f: fn(&Vector<4>) -> Vector<D>) -> Vec<Trajectory<D>> {
    ts.iter().map(|t| Trajectory { start: t.start, states: t.states.iter().map(f).collect() }).collect()
}

fn evaluate_in<const D: usize>(
    artifacts: &RunArtifacts,
    steps: usize,
    gospa_params: &GospaParams,
    tgospa_params: &TgospaParams,
    f: fn(&Vector<4>) -> Vector<D>,
) -> Result<(Vec<GospaResult>, Vec<GospaResult>, TgospaResult), HarnessError> {
    let truth = project(&artifacts.truth.trajectories, f);
    let estimate = project(&artifacts.estimate, f);
    let mut phd = Vec::with_capacity(steps);
    let mut hybrid = Vec::with_capacity(steps);
    for k in 1..=steps {
        let truth_k = trajectories_states_at(&truth, k);
        let phd_k: Vec<Vector<D>> = artifacts.record.steps[k - 1].estimates.iter().map(f).collect();
        phd.push(gospa(&phd_k, &truth_k, gospa_params)?);
        hybrid.push(gospa(&trajectories_states_at(&estimate, k), &truth_k, gospa_params)?);
    }
    let raw = tgospa(&estimate, &truth, tgospa_params, steps)?;
    let per_step = |v: f64| v / steps as f64;
    let tg = TgospaResult {
        total: per_step(raw.total),
        localization: per_step(raw.localization),
        missed: per_step(raw.missed),
        false_det: per_step(raw.false_det),
        switch: per_step(raw.switch),
    };
    Ok((phd, hybrid, tg))
}

/// GOSPA per step for the PHD and smoother estimates, and the smoother's
/// trajectory GOSPA.
pub fn evaluate_run(config: &CampaignConfig, run: usize, artifacts: RunArtifacts) -> Result<RunRecord, HarnessError> {
    let steps = artifacts.truth.steps;
    let (g, t) = (config.gospa_params(), config.tgospa_params());
    let (phd, hybrid, tgospa) = match config.metric.distance {
        Distance::Position => evaluate_in(&artifacts, steps, &g, &t, position)?,
        Distance::State => evaluate_in(&artifacts, steps, &g, &t, |x| *x)?,
    };
    Ok(RunRecord { run, phd, hybrid, tgospa, truth: artifacts.truth.trajectories, estimate: artifacts.estimate })
}

pub fn run_one(config: &CampaignConfig, run: usize) -> Result<RunRecord, HarnessError> {
    evaluate_run(config, run, simulate_run(config, run)?)
}

/// Runs every run of the campaign. A failing run is recorded and the others
/// continue; see [`CampaignResult::failed`].
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignResult, HarnessError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
    let outcomes: Vec<Result<RunRecord, HarnessError>> =
        pool.install(|| (0..config.runs).into_par_iter().map(|r| run_one(config, r)).collect());
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (run, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(record) => runs.push(record),
            Err(e) => failures.push(RunFailure { run, message: e.to_string() }),
        }
    }
    Ok(CampaignResult { config: config.clone(), runs, failures })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct GospaRow {
    pub total: f64,
    pub localization: f64,
    pub missed: f64,
    #[serde(rename = "false")]
    pub false_det: f64,
    /// Standard error of the per-run average total.
    pub total_stderr: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct TgospaRow {
    pub total: f64,
    pub localization: f64,
    pub missed: f64,
    #[serde(rename = "false")]
    pub false_det: f64,
    pub switch: f64,
    pub total_stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodRows {
    pub phd: GospaRow,
    pub hybrid: GospaRow,
}

/// Table rows averaged over successful runs (and, for GOSPA, over steps).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub variant: &'static str,
    pub seed: u64,
    pub runs: usize,
    pub successful_runs: usize,
    pub failed_runs: Vec<usize>,
    pub campaign_failed: bool,
    pub gospa: MethodRows,
    pub tgospa_hybrid: TgospaRow,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn stderr(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs.iter().copied());
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}

fn gospa_row<'a>(series: impl Iterator<Item = &'a Vec<GospaResult>> + Clone) -> GospaRow {
    let all = || series.clone().flatten();
    let per_run: Vec<f64> = series.clone().map(|s| mean(s.iter().map(|g| g.total))).collect();
    GospaRow {
        total: mean(all().map(|g| g.total)),
        localization: mean(all().map(|g| g.localization)),
        missed: mean(all().map(|g| g.missed)),
        false_det: mean(all().map(|g| g.false_det)),
        total_stderr: stderr(&per_run),
    }
}

impl CampaignResult {
    /// More than 10% of the runs failed.
    pub fn failed(&self) -> bool {
        self.runs.is_empty() || self.failures.len() * 10 > self.config.runs
    }

    pub fn summary(&self) -> Summary {
        let tg: Vec<&TgospaResult> = self.runs.iter().map(|r| &r.tgospa).collect();
        let totals: Vec<f64> = tg.iter().map(|t| t.total).collect();
        Summary {
            variant: self.config.variant.tag(),
            seed: self.config.seed,
            runs: self.config.runs,
            successful_runs: self.runs.len(),
            failed_runs: self.failures.iter().map(|f| f.run).collect(),
            campaign_failed: self.failed(),
            gospa: MethodRows {
                phd: gospa_row(self.runs.iter().map(|r| &r.phd)),
                hybrid: gospa_row(self.runs.iter().map(|r| &r.hybrid)),
            },
            tgospa_hybrid: TgospaRow {
                total: mean(totals.iter().copied()),
                localization: mean(tg.iter().map(|t| t.localization)),
                missed: mean(tg.iter().map(|t| t.missed)),
                false_det: mean(tg.iter().map(|t| t.false_det)),
                switch: mean(tg.iter().map(|t| t.switch)),
                total_stderr: stderr(&totals),
            },
        }
    }

    /// Average GOSPA of a method at each step, over successful runs.
    pub fn mean_curve(&self, hybrid: bool) -> Vec<GospaResult> {
        let steps = self.runs.first().map_or(0, |r| r.phd.len());
        (0..steps)
            .map(|k| {
                let at = |f: fn(&GospaResult) -> f64| {
                    mean(self.runs.iter().map(|r| f(if hybrid { &r.hybrid[k] } else { &r.phd[k] })))
                };
                GospaResult {
                    total: at(|g| g.total),
                    localization: at(|g| g.localization),
                    missed: at(|g| g.missed),
                    false_det: at(|g| g.false_det),
                }
            })
            .collect()
    }
}
