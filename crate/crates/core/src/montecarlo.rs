//! Monte Carlo campaigns: common-random-number trials, RMSE and NEES
//! aggregation, divergence bookkeeping and model-mismatch runs.

use std::hash::{Hash, Hasher};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::bounds::{self, BcrbOptions, BimSequence};
use crate::error::{Error, Result};
use crate::export::EstimateRow;
use crate::filters::{init_estimate, Filter, FilterKind, IekfOptions};
use crate::gmp::{Gmp1Params, SatBiasModel};
use crate::linalg;
use crate::rng::TrialStreams;
use crate::scenario::{Scenario, ScenarioConfig};
use crate::statespace::{self, ModelSpec, SystemModel, TruthOptions, TruthRun};

/// Position error beyond which a filter counts as diverged (m).
pub const DIVERGENCE_THRESHOLD: f64 = 1e4;

/// How divergent trials enter the RMSE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DivergencePolicy {
    /// Keep them, with errors capped at the divergence threshold after the event.
    #[default]
    Include,
    Exclude,
}

/// Truth bias parameters differing from those the filters assume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub truth_sat_bias: SatBiasModel,
    pub truth_coop_bias: Gmp1Params,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub scenario: ScenarioConfig,
    pub filters: Vec<FilterKind>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Keep every n-th epoch in exported logs.
    #[serde(default = "default_decimation")]
    pub decimation: usize,
    #[serde(default)]
    pub mismatch: Option<Mismatch>,
    #[serde(default)]
    pub divergence_policy: DivergencePolicy,
    #[serde(default)]
    pub iekf: IekfOptions,
}

fn default_trials() -> usize {
    100
}
fn default_decimation() -> usize {
    10
}

impl CampaignConfig {
    pub fn new(scenario: ScenarioConfig, filters: Vec<FilterKind>, trials: usize, seed: u64) -> Self {
        Self {
            scenario,
            filters,
            trials,
            seed,
            decimation: default_decimation(),
            mismatch: None,
            divergence_policy: DivergencePolicy::Include,
            iekf: IekfOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.filters.is_empty() {
            return Err(Error::config("filters", "at least one filter is required"));
        }
        if self.decimation == 0 {
            return Err(Error::config("decimation", "must be at least 1"));
        }
        if let Some(m) = &self.mismatch {
            m.truth_sat_bias
                .validate()
                .map_err(|e| Error::config("mismatch.truth_sat_bias", e.to_string()))?;
        }
        Ok(())
    }

    /// Bias processes that generate the truth.
    pub fn truth_spec(&self) -> ModelSpec {
        match &self.mismatch {
            Some(m) => ModelSpec::augmented(m.truth_sat_bias, m.truth_coop_bias),
            None => ModelSpec::from_config(&self.scenario),
        }
    }

    pub fn filter_spec(&self, kind: FilterKind) -> ModelSpec {
        let c = &self.scenario;
        match kind {
            FilterKind::Baseline => ModelSpec::baseline(c.sat_bias_model, c.coop_bias),
            _ => ModelSpec::augmented(c.sat_bias_model, c.coop_bias),
        }
    }
}

/// Per-epoch record of one filter over one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterTrace {
    pub kind: FilterKind,
    /// Sum over users of squared position error norms.
    pub sq_err: Vec<f64>,
    /// NEES of the stacked user positions.
    pub nees: Vec<f64>,
    pub diverged_at: Option<usize>,
    pub updated: Vec<bool>,
}

impl FilterTrace {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub filters: Vec<FilterTrace>,
    /// Hash of the observation log fed to every filter.
    pub observation_hash: u64,
}

/// Models shared by all trials of a campaign.
#[derive(Debug, Clone)]
pub struct CampaignSetup {
    pub scenario: Scenario,
    pub truth: SystemModel,
    pub models: Vec<(FilterKind, SystemModel)>,
}

impl CampaignSetup {
    pub fn new(cfg: &CampaignConfig) -> Result<Self> {
        cfg.validate()?;
        let scenario = Scenario::build(&cfg.scenario)?;
        let truth = SystemModel::new(&scenario, cfg.truth_spec())?;
        let models = cfg
            .filters
            .iter()
            .map(|&k| Ok((k, SystemModel::new(&scenario, cfg.filter_spec(k))?)))
            .collect::<Result<_>>()?;
        Ok(Self { scenario, truth, models })
    }

    pub fn n_users(&self) -> usize {
        self.truth.map.users.iter().filter(|s| s.position.is_some()).count()
    }
}

/// Hash of every observation tag and value bit pattern.
pub fn observation_hash(run: &TruthRun) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for o in &run.observations {
        o.kinds.hash(&mut h);
        for v in o.values.iter() {
            v.to_bits().hash(&mut h);
        }
    }
    h.finish()
}

fn position_nees(model: &SystemModel, cov: &DMatrix<f64>, err: &DVector<f64>) -> f64 {
    let idx = model.map.position_indices();
    let p = DMatrix::from_fn(idx.len(), idx.len(), |a, b| cov[(idx[a], idx[b])]);
    match linalg::cholesky(&p) {
        Ok(c) => err.dot(&c.solve(err)),
        Err(_) => f64::NAN,
    }
}

/// Runs one filter over a truth realization.
pub fn run_filter(
    setup: &CampaignSetup,
    kind: FilterKind,
    model: &SystemModel,
    run: &TruthRun,
    streams: &TrialStreams,
    iekf: IekfOptions,
) -> FilterTrace {
    run_filter_logged(setup, kind, model, run, streams, iekf, None)
}

/// [`run_filter`] that also records per-user estimates every `every` epochs.
pub fn run_filter_logged(
    setup: &CampaignSetup,
    kind: FilterKind,
    model: &SystemModel,
    run: &TruthRun,
    streams: &TrialStreams,
    iekf: IekfOptions,
    mut log: Option<(&mut Vec<EstimateRow>, usize)>,
) -> FilterTrace {
    let n = setup.scenario.n_epochs;
    let truth = &setup.truth;
    let users: Vec<usize> = (0..model.map.users.len()).filter(|&u| model.map.users[u].position.is_some()).collect();
    let cap = DIVERGENCE_THRESHOLD * DIVERGENCE_THRESHOLD * users.len() as f64;
    let mut trace = FilterTrace {
        kind,
        sq_err: Vec::with_capacity(n),
        nees: Vec::with_capacity(n),
        diverged_at: None,
        updated: Vec::with_capacity(n),
    };
    let mut filter = Filter::new(kind, model, init_estimate(model, truth, &run.states[0], streams));
    filter.iekf = iekf;
    for k in 0..n {
        if trace.diverged() {
            trace.sq_err.push(cap);
            trace.nees.push(f64::NAN);
            trace.updated.push(false);
            continue;
        }
        if k > 0 {
            filter.predict(&run.controls[k]);
        }
        let updated = filter.update(&run.observations[k], &setup.scenario.sats[k]);
        let mean = &filter.estimate.mean;
        let mut err = DVector::zeros(3 * users.len());
        for (a, &u) in users.iter().enumerate() {
            let e = model.position(mean, u) - truth.position(&run.states[k], u);
            err.fixed_rows_mut::<3>(3 * a).copy_from(&e);
        }
        let worst = (0..users.len()).map(|a| err.fixed_rows::<3>(3 * a).norm()).fold(0.0, f64::max);
        if updated.is_err() || !(worst <= DIVERGENCE_THRESHOLD) {
            trace.diverged_at = Some(k);
            trace.sq_err.push(cap);
            trace.nees.push(f64::NAN);
            trace.updated.push(false);
            continue;
        }
        if let Some((rows, every)) = log.as_mut() {
            if k % *every == 0 {
                let cov = &filter.estimate.cov;
                for (a, &u) in users.iter().enumerate() {
                    let p = model.position(mean, u);
                    let s = model.map.users[u].position.expect("user with position states");
                    rows.push(EstimateRow {
                        epoch: k,
                        user: setup.scenario.config.users[u].id.clone(),
                        est_x: p.x,
                        est_y: p.y,
                        est_z: p.z,
                        err_norm: err.fixed_rows::<3>(3 * a).norm(),
                        cov_trace_pos: (0..3).map(|i| cov[(s + i, s + i)]).sum(),
                    });
                }
            }
        }
        trace.sq_err.push(err.norm_squared());
        trace.nees.push(position_nees(model, &filter.estimate.cov, &err));
        trace.updated.push(updated.unwrap_or(false));
    }
    trace
}

/// One truth + observation realization fed identically to every filter.
pub fn run_trial(cfg: &CampaignConfig, setup: &CampaignSetup, trial: usize) -> Result<TrialResult> {
    let streams = TrialStreams::new(cfg.seed, trial as u64);
    let run = statespace::simulate_truth(&setup.scenario, &setup.truth, &streams, TruthOptions::full())?;
    let filters = setup
        .models
        .iter()
        .map(|(kind, model)| run_filter(setup, *kind, model, &run, &streams, cfg.iekf))
        .collect();
    Ok(TrialResult {
        trial,
        filters,
        observation_hash: observation_hash(&run),
    })
}

/// Per-epoch RMSE over users and trials for one filter.
pub fn aggregate_rmse(results: &[TrialResult], kind: FilterKind, n_users: usize, policy: DivergencePolicy) -> Vec<f64> {
    let traces: Vec<&FilterTrace> = results
        .iter()
        .filter_map(|r| r.filters.iter().find(|f| f.kind == kind))
        .filter(|t| policy == DivergencePolicy::Include || !t.diverged())
        .collect();
    let Some(first) = traces.first() else { return Vec::new() };
    let denom = (traces.len() * n_users.max(1)) as f64;
    (0..first.sq_err.len())
        .map(|k| (traces.iter().map(|t| t.sq_err[k]).sum::<f64>() / denom).sqrt())
        .collect()
}

/// Mean NEES per epoch over non-divergent trials.
pub fn aggregate_nees(results: &[TrialResult], kind: FilterKind) -> Vec<f64> {
    let traces: Vec<&FilterTrace> = results
        .iter()
        .filter_map(|r| r.filters.iter().find(|f| f.kind == kind))
        .filter(|t| !t.diverged())
        .collect();
    let Some(first) = traces.first() else { return Vec::new() };
    (0..first.nees.len())
        .map(|k| traces.iter().map(|t| t.nees[k]).sum::<f64>() / traces.len() as f64)
        .collect()
}

/// Two-sided 95% band of the trial-averaged NEES for state dimension `dim`.
pub fn nees_band(trials: usize, dim: usize) -> (f64, f64) {
    let dof = (trials * dim) as f64;
    let chi = ChiSquared::new(dof).expect("positive degrees of freedom");
    (chi.inverse_cdf(0.025) / trials as f64, chi.inverse_cdf(0.975) / trials as f64)
}

/// Aggregated outcome of a campaign.
#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub filters: Vec<FilterKind>,
    pub rmse: Vec<Vec<f64>>,
    pub nees: Vec<Vec<f64>>,
    pub divergent_trials: Vec<usize>,
    /// BCRB of the filter model along the noise-free truth.
    pub bcrb: BimSequence,
    /// BCRB of the truth model when it differs from the filter model.
    pub truth_bcrb: Option<BimSequence>,
    pub visible_sats: Vec<usize>,
    /// Epochs passing the update gate.
    pub gated: Vec<bool>,
    pub trials: Vec<TrialResult>,
    pub n_users: usize,
    pub runtime_s: f64,
}

impl CampaignResult {
    pub fn index(&self, kind: FilterKind) -> Option<usize> {
        self.filters.iter().position(|&k| k == kind)
    }

    pub fn rmse_of(&self, kind: FilterKind) -> Option<&[f64]> {
        self.index(kind).map(|i| self.rmse[i].as_slice())
    }

    pub fn divergence_rate(&self, kind: FilterKind) -> Option<f64> {
        self.index(kind).map(|i| self.divergent_trials[i] as f64 / self.trials.len() as f64)
    }

    pub fn gated_epochs(&self) -> Vec<usize> {
        (0..self.gated.len()).filter(|&k| self.gated[k]).collect()
    }

    /// Mean over gated epochs of RMSE divided by the filter-model PEB.
    pub fn mean_bound_ratio(&self, kind: FilterKind) -> Option<f64> {
        let rmse = self.rmse_of(kind)?;
        let g = self.gated_epochs();
        let sum: f64 = g.iter().map(|&k| rmse[k] / self.bcrb.peb[k]).sum();
        Some(sum / g.len() as f64)
    }

    /// Fraction of gated epochs whose trial-averaged NEES lies in the 95% band.
    pub fn nees_in_band(&self, kind: FilterKind) -> Option<f64> {
        let i = self.index(kind)?;
        let kept = self.trials.len() - self.divergent_trials[i];
        if kept == 0 {
            return Some(0.0);
        }
        let (lo, hi) = nees_band(kept, 3 * self.n_users);
        let g = self.gated_epochs();
        let inside = g.iter().filter(|&&k| (lo..=hi).contains(&self.nees[i][k])).count();
        Some(inside as f64 / g.len() as f64)
    }
}

/// Runs every trial and aggregates RMSE, NEES and the bounds.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignResult> {
    let start = Instant::now();
    let setup = CampaignSetup::new(cfg)?;
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, &setup, t))
        .collect::<Result<Vec<_>>>()?;
    let n_users = setup.n_users();
    let rmse = cfg
        .filters
        .iter()
        .map(|&k| aggregate_rmse(&trials, k, n_users, cfg.divergence_policy))
        .collect();
    let nees = cfg.filters.iter().map(|&k| aggregate_nees(&trials, k)).collect();
    let divergent_trials = cfg
        .filters
        .iter()
        .map(|&k| {
            trials
                .iter()
                .filter(|r| r.filters.iter().any(|f| f.kind == k && f.diverged()))
                .count()
        })
        .collect();
    let filter_model = SystemModel::new(&setup.scenario, ModelSpec::from_config(&cfg.scenario))?;
    let bcrb = bounds::bcrb(&setup.scenario, &filter_model, BcrbOptions::default())?;
    let truth_bcrb = match cfg.mismatch {
        Some(_) => Some(bounds::bcrb(&setup.scenario, &setup.truth, BcrbOptions::default())?),
        None => None,
    };
    let (_, obs) = bounds::nominal_truth(&setup.scenario, &filter_model)?;
    let gated = obs
        .iter()
        .map(|o| crate::filters::gate_update(o.visible_sats, o.anchors))
        .collect();
    Ok(CampaignResult {
        filters: cfg.filters.clone(),
        rmse,
        nees,
        divergent_trials,
        visible_sats: bcrb.visible_sats.clone(),
        bcrb,
        truth_bcrb,
        gated,
        trials,
        n_users,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Average-case truth against worst-case filters, with both bounds.
pub fn run_mismatch(cfg: &CampaignConfig) -> Result<CampaignResult> {
    if cfg.mismatch.is_none() {
        return Err(Error::config("mismatch", "a mismatch pair is required"));
    }
    run_campaign(cfg)
}
