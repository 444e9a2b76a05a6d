//! Recursive Bayesian Cramér-Rao bound and position error bound.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::gate_update;
use crate::linalg;
use crate::rng::TrialStreams;
use crate::scenario::Scenario;
use crate::statespace::{self, ModelSpec, ObservationSet, ProcessModel, SystemModel, TruthOptions};

/// A PEB below this fraction of the prior PEB counts as defined, i.e. the
/// observations rather than the prior determine the position.
pub const DEFINED_PEB_FRACTION: f64 = 0.1;

/// Options of a bound evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BcrbOptions {
    /// Skip the observation term on epochs that fail the ≥ 3 source rule.
    pub gate: bool,
    /// Keep every information matrix (memory heavy for long windows).
    pub keep_information: bool,
}

impl Default for BcrbOptions {
    fn default() -> Self {
        Self {
            gate: true,
            keep_information: false,
        }
    }
}

/// Bound time series of one model over a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct BimSequence {
    /// Mean position error bound per epoch (m).
    pub peb: Vec<f64>,
    /// Per-epoch, per-user position bound `tr(BCRB(p_i))` (m²); stations excluded.
    pub user_position_bound: Vec<Vec<f64>>,
    pub visible_sats: Vec<usize>,
    /// Whether the epoch contributed an observation term.
    pub updated: Vec<bool>,
    /// Information matrices, when requested.
    pub information: Vec<DMatrix<f64>>,
    /// Bound covariance `J⁻¹` at the last epoch.
    pub final_bound: DMatrix<f64>,
    /// PEB implied by the prior alone.
    pub prior_peb: f64,
}

impl BimSequence {
    pub fn is_defined(&self, k: usize) -> bool {
        self.peb[k] < DEFINED_PEB_FRACTION * self.prior_peb
    }
}

/// `J⁰ = (Σ⁰)⁻¹` with the prior of `model`.
pub fn bcrb_init(model: &SystemModel) -> DMatrix<f64> {
    DMatrix::from_diagonal(&model.prior.map(|v| 1.0 / v))
}

/// `Hᵀ R⁻¹ H` for diagonal `R`.
pub fn observation_information(h: &DMatrix<f64>, r: &[f64]) -> DMatrix<f64> {
    let mut w = h.clone();
    for (i, &v) in r.iter().enumerate() {
        w.row_mut(i).scale_mut(1.0 / v);
    }
    let mut out = h.transpose() * w;
    linalg::symmetrize(&mut out);
    out
}

/// `J = (Q + F J_prev⁻¹ Fᵀ)⁻¹ + info` with dense `F`, `Q`.
pub fn bcrb_step_dense(
    j_prev: &DMatrix<f64>,
    f: &DMatrix<f64>,
    q: &DMatrix<f64>,
    info: Option<&DMatrix<f64>>,
) -> Result<DMatrix<f64>> {
    let c = linalg::spd_inverse(j_prev).map_err(|e| Error::Numerical(format!("previous information singular: {e}")))?;
    let pred = f * c * f.transpose() + q;
    let mut j = linalg::spd_inverse(&pred).map_err(|e| Error::Numerical(format!("prediction term singular: {e}")))?;
    if let Some(i) = info {
        j += i;
    }
    linalg::symmetrize(&mut j);
    Ok(j)
}

/// Structured step; returns the new information matrix and its inverse.
pub fn bcrb_step(
    j_prev_inverse: &DMatrix<f64>,
    pm: &ProcessModel,
    info: Option<&DMatrix<f64>>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let pred = pm.propagate_covariance(j_prev_inverse);
    let mut j = linalg::spd_inverse(&pred).map_err(|e| Error::Numerical(format!("prediction term singular: {e}")))?;
    if let Some(i) = info {
        j += i;
    }
    linalg::symmetrize(&mut j);
    let c = linalg::spd_inverse(&j).map_err(|e| Error::Numerical(format!("information matrix singular: {e}")))?;
    Ok((j, c))
}

/// Per-user `tr(C[p_i, p_i])` for users with position states.
pub fn user_position_traces(model: &SystemModel, c: &DMatrix<f64>) -> Vec<f64> {
    model
        .map
        .users
        .iter()
        .filter_map(|s| s.position)
        .map(|p| (0..3).map(|a| c[(p + a, p + a)]).sum())
        .collect()
}

/// `sqrt(mean_i tr(BCRB(p_i)))`.
pub fn position_error_bound(model: &SystemModel, c: &DMatrix<f64>) -> f64 {
    let t = user_position_traces(model, c);
    (t.iter().sum::<f64>() / t.len().max(1) as f64).sqrt()
}

/// Noise-free truth of the scenario in the layout of `model`.
pub fn nominal_truth(scn: &Scenario, model: &SystemModel) -> Result<(Vec<DVector<f64>>, Vec<ObservationSet>)> {
    let truth = SystemModel::new(scn, ModelSpec::augmented(model.spec.sat_bias, model.spec.coop_bias))?;
    let run = statespace::simulate_truth(scn, &truth, &TrialStreams::new(0, 0), TruthOptions::noiseless())?;
    let states = run.states.iter().map(|x| model.project_from(&truth, x)).collect();
    Ok((states, run.observations))
}

/// BCRB of `model` along the noise-free truth.
pub fn bcrb(scn: &Scenario, model: &SystemModel, opts: BcrbOptions) -> Result<BimSequence> {
    let (states, observations) = nominal_truth(scn, model)?;
    bcrb_along(scn, model, &states, &observations, opts)
}

/// BCRB with Jacobians evaluated at the given states.
pub fn bcrb_along(
    scn: &Scenario,
    model: &SystemModel,
    states: &[DVector<f64>],
    observations: &[ObservationSet],
    opts: BcrbOptions,
) -> Result<BimSequence> {
    let n = states.len();
    let mut j = bcrb_init(model);
    let mut c = model.prior_covariance();
    let prior_peb = position_error_bound(model, &c);
    let mut out = BimSequence {
        peb: Vec::with_capacity(n),
        user_position_bound: Vec::with_capacity(n),
        visible_sats: Vec::with_capacity(n),
        updated: Vec::with_capacity(n),
        information: Vec::new(),
        final_bound: DMatrix::zeros(0, 0),
        prior_peb,
    };
    for k in 0..n {
        let obs = &observations[k];
        let use_obs = !obs.is_empty() && (!opts.gate || gate_update(obs.visible_sats, obs.anchors));
        let info = use_obs.then(|| {
            let h = model.jacobian(&states[k], &obs.kinds, &scn.sats[k]);
            observation_information(&h, &model.noise_variances(obs))
        });
        if k == 0 {
            if let Some(i) = &info {
                j += i;
                c = linalg::spd_inverse(&j)?;
            }
        } else {
            (j, c) = bcrb_step(&c, &model.process, info.as_ref())
                .map_err(|e| Error::Numerical(format!("epoch {k}: {e}")))?;
        }
        if opts.keep_information {
            out.information.push(j.clone());
        }
        out.peb.push(position_error_bound(model, &c));
        out.user_position_bound.push(user_position_traces(model, &c));
        out.visible_sats.push(obs.visible_sats);
        out.updated.push(use_obs);
    }
    out.final_bound = c;
    Ok(out)
}

/// BCRB with the observation information averaged over sampled truth
/// realizations instead of evaluated at the noise-free truth.
pub fn bcrb_monte_carlo(
    scn: &Scenario,
    model: &SystemModel,
    samples: usize,
    seed: u64,
    opts: BcrbOptions,
) -> Result<BimSequence> {
    if samples == 0 {
        return Err(Error::domain("need at least one sample"));
    }
    let truth = SystemModel::new(scn, ModelSpec::augmented(model.spec.sat_bias, model.spec.coop_bias))?;
    let runs = (0..samples)
        .map(|s| statespace::simulate_truth(scn, &truth, &TrialStreams::new(seed, s as u64), TruthOptions::full()))
        .collect::<Result<Vec<_>>>()?;
    let n = scn.n_epochs;
    let mut j = bcrb_init(model);
    let mut c = model.prior_covariance();
    let prior_peb = position_error_bound(model, &c);
    let mut out = BimSequence {
        peb: Vec::with_capacity(n),
        user_position_bound: Vec::with_capacity(n),
        visible_sats: Vec::with_capacity(n),
        updated: Vec::with_capacity(n),
        information: Vec::new(),
        final_bound: DMatrix::zeros(0, 0),
        prior_peb,
    };
    for k in 0..n {
        let first = &runs[0].observations[k];
        let use_obs = !first.is_empty() && (!opts.gate || gate_update(first.visible_sats, first.anchors));
        let info = use_obs.then(|| {
            let mut acc = DMatrix::zeros(model.dim(), model.dim());
            for r in &runs {
                let obs = &r.observations[k];
                let x = model.project_from(&truth, &r.states[k]);
                let h = model.jacobian(&x, &obs.kinds, &scn.sats[k]);
                acc += observation_information(&h, &model.noise_variances(obs));
            }
            acc / samples as f64
        });
        if k == 0 {
            if let Some(i) = &info {
                j += i;
                c = linalg::spd_inverse(&j)?;
            }
        } else {
            (j, c) = bcrb_step(&c, &model.process, info.as_ref())?;
        }
        if opts.keep_information {
            out.information.push(j.clone());
        }
        out.peb.push(position_error_bound(model, &c));
        out.user_position_bound.push(user_position_traces(model, &c));
        out.visible_sats.push(first.visible_sats);
        out.updated.push(use_obs);
    }
    out.final_bound = c;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_prior_information() {
        let mut cfg = ScenarioConfig::paper_defaults();
        cfg.duration = 2.0;
        let scn = Scenario::build(&cfg).unwrap();
        let m = SystemModel::new(&scn, ModelSpec::from_config(&cfg)).unwrap();
        let j0 = bcrb_init(&m);
        assert_eq!(j0[(0, 0)], 1e-6);
        assert_eq!(j0[(0, 1)], 0.0);
        assert!((position_error_bound(&m, &m.prior_covariance()) - 3f64.sqrt() * 1000.0).abs() < 1e-9);
    }

    #[test]
    fn no_observation_identity_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DMatrix::from_fn(4, 4, |_, _| rng.random::<f64>());
        let j = &a * a.transpose() + DMatrix::identity(4, 4);
        let next = bcrb_step_dense(&j, &DMatrix::identity(4, 4), &DMatrix::zeros(4, 4), None).unwrap();
        assert!(linalg::relative_difference(&next, &j) < 1e-12);
    }

    #[test]
    fn static_scalar_information_adds_up() {
        let (h, r, j0) = (2.0, 0.5, 0.1);
        let info = DMatrix::from_element(1, 1, h * h / r);
        let mut j = DMatrix::from_element(1, 1, j0);
        for _ in 0..10 {
            j = bcrb_step_dense(&j, &DMatrix::identity(1, 1), &DMatrix::zeros(1, 1), Some(&info)).unwrap();
        }
        assert!((j[(0, 0)] - (j0 + 10.0 * h * h / r)).abs() < 1e-10);
    }

    #[test]
    fn peb_of_diagonal_information() {
        let mut cfg = ScenarioConfig::single_user(crate::gmp::SatBiasKind::Gmp1);
        cfg.duration = 2.0;
        let scn = Scenario::build(&cfg).unwrap();
        let m = SystemModel::new(&scn, ModelSpec::from_config(&cfg)).unwrap();
        let j = 7.0;
        let c = DMatrix::from_diagonal(&DVector::from_element(m.dim(), 1.0 / j));
        assert!((position_error_bound(&m, &c) - (3.0 / j).sqrt()).abs() < 1e-12);
    }
}
