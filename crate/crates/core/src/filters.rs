//! Augmented EKF, iterated EKF, second-order EKF and the non-augmented
//! baseline, all with Joseph-form covariance updates.

use nalgebra::{DMatrix, DVector, Vector3};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{Entity, TrialStreams};
use crate::scenario::SatEpoch;
use crate::statespace::{ObservationSet, ProcessModel, SparseHessian, SparseRow, StateLabel, SystemModel};

/// Mean and covariance of a filter at one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterEstimate {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub epoch: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    /// EKF without bias states, biases treated as white noise.
    Baseline,
    Ekf,
    Iekf,
    Ekf2,
}

impl FilterKind {
    pub const ALL: [FilterKind; 4] = [FilterKind::Baseline, FilterKind::Ekf, FilterKind::Iekf, FilterKind::Ekf2];

    pub fn name(&self) -> &'static str {
        match self {
            FilterKind::Baseline => "baseline_ekf",
            FilterKind::Ekf => "ekf",
            FilterKind::Iekf => "iekf",
            FilterKind::Ekf2 => "ekf2",
        }
    }
}

/// IEKF stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IekfOptions {
    pub max_iter: usize,
    /// Threshold on the change of the stacked position estimate (m).
    pub tol: f64,
}

impl Default for IekfOptions {
    fn default() -> Self {
        Self { max_iter: 10, tol: 1e-4 }
    }
}

/// An update is attempted only with at least three ranging sources.
pub fn gate_update(visible_sats: usize, anchors: usize) -> bool {
    visible_sats + anchors >= 3
}

fn label_key(l: StateLabel) -> Option<(usize, usize)> {
    match l {
        StateLabel::Position { user, axis } => Some((user, axis)),
        StateLabel::Velocity { user, axis } => Some((user, 3 + axis)),
        StateLabel::Clock { user, derivative } => Some((user, 6 + derivative)),
        _ => None,
    }
}

/// Prior estimate: user states are truth plus a prior draw, biases start at zero.
///
/// The draw is keyed by state meaning, so filters with different layouts
/// start from the same user-state errors.
pub fn init_estimate(
    model: &SystemModel,
    truth_model: &SystemModel,
    truth_x0: &DVector<f64>,
    streams: &TrialStreams,
) -> FilterEstimate {
    let mut mean = model.project_from(truth_model, truth_x0);
    for (i, l) in model.map.labels().into_iter().enumerate() {
        match label_key(l) {
            Some((a, b)) => {
                let z: f64 = StandardNormal.sample(&mut streams.stream(Entity::FilterInit, a, b, 0));
                mean[i] += model.prior[i].sqrt() * z;
            }
            None => mean[i] = 0.0,
        }
    }
    FilterEstimate {
        mean,
        cov: model.prior_covariance(),
        epoch: 0,
    }
}

/// `x⁺ = F x + D o`, `P⁺ = F P Fᵀ + Q`.
pub fn kf_predict(est: &FilterEstimate, pm: &ProcessModel, controls: &[Vector3<f64>]) -> FilterEstimate {
    let mut cov = pm.propagate_covariance(&est.cov);
    linalg::symmetrize(&mut cov);
    FilterEstimate {
        mean: pm.propagate_mean(&est.mean, controls),
        cov,
        epoch: est.epoch + 1,
    }
}

/// `H P` for sparse `H`.
fn h_times(rows: &[SparseRow], p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = p.ncols();
    let mut out = DMatrix::zeros(rows.len(), n);
    for (r, row) in rows.iter().enumerate() {
        for (&i, &v) in row.idx.iter().zip(&row.val) {
            for c in 0..n {
                out[(r, c)] += v * p[(i, c)];
            }
        }
    }
    out
}

/// `(H P) Hᵀ` for sparse `H`.
fn times_ht(hp: &DMatrix<f64>, rows: &[SparseRow]) -> DMatrix<f64> {
    let m = rows.len();
    let mut out = DMatrix::zeros(hp.nrows(), m);
    for (s, row) in rows.iter().enumerate() {
        for r in 0..hp.nrows() {
            out[(r, s)] = row.idx.iter().zip(&row.val).map(|(&i, &v)| v * hp[(r, i)]).sum();
        }
    }
    out
}

fn dense_h(rows: &[SparseRow], n: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(rows.len(), n);
    for (r, row) in rows.iter().enumerate() {
        for (&i, &v) in row.idx.iter().zip(&row.val) {
            h[(r, i)] += v;
        }
    }
    h
}

/// Gain `K = P Hᵀ S⁻¹` from `HP` and `S`.
fn gain(hp: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let ch = linalg::cholesky(s).map_err(|_| Error::Numerical("innovation covariance not positive definite".into()))?;
    Ok(ch.solve(hp).transpose())
}

/// `(I − KH) P (I − KH)ᵀ + K N Kᵀ`, symmetrized.
fn joseph(p: &DMatrix<f64>, k: &DMatrix<f64>, rows: &[SparseRow], noise: &DMatrix<f64>) -> DMatrix<f64> {
    let n = p.nrows();
    let a = DMatrix::identity(n, n) - k * dense_h(rows, n);
    let mut out = &a * p * a.transpose() + k * noise * k.transpose();
    linalg::symmetrize(&mut out);
    out
}

fn check_observations(obs: &ObservationSet) -> Result<()> {
    if obs.is_empty() {
        return Err(Error::domain("update needs at least one observation"));
    }
    Ok(())
}

/// Extended Kalman filter update linearized at the predicted state.
pub fn ekf_update(
    est: &FilterEstimate,
    model: &SystemModel,
    obs: &ObservationSet,
    sats: &[SatEpoch],
) -> Result<FilterEstimate> {
    check_observations(obs)?;
    let (h, rows) = model.linearize(&est.mean, &obs.kinds, sats);
    let r = DMatrix::from_diagonal(&DVector::from_vec(model.noise_variances(obs)));
    let innovation = &obs.values - h;
    let hp = h_times(&rows, &est.cov);
    let s = times_ht(&hp, &rows) + &r;
    let k = gain(&hp, &s)?;
    Ok(FilterEstimate {
        mean: &est.mean + &k * innovation,
        cov: joseph(&est.cov, &k, &rows, &r),
        epoch: est.epoch,
    })
}

/// Iterated EKF update (Gauss-Newton relinearization).
///
/// Iteration `n` linearizes at `x_{n−1}` and uses the innovation
/// `z − h(x_{n−1}) − H_n (x_pred − x_{n−1})`; the first iteration is the EKF
/// update. Returns the estimate and the number of iterations used.
pub fn iekf_update(
    est: &FilterEstimate,
    model: &SystemModel,
    obs: &ObservationSet,
    sats: &[SatEpoch],
    opts: IekfOptions,
) -> Result<(FilterEstimate, usize)> {
    check_observations(obs)?;
    let r = DMatrix::from_diagonal(&DVector::from_vec(model.noise_variances(obs)));
    let pos = model.map.position_indices();
    let hp_cache;
    let mut x_prev = est.mean.clone();
    let mut iter = 0;
    loop {
        iter += 1;
        let (h, rows) = model.linearize(&x_prev, &obs.kinds, sats);
        let dx = &est.mean - &x_prev;
        let correction = DVector::from_iterator(rows.len(), rows.iter().map(|row| row.dot(&dx)));
        let innovation = &obs.values - h - correction;
        let hp = h_times(&rows, &est.cov);
        let s = times_ht(&hp, &rows) + &r;
        let k = gain(&hp, &s)?;
        let x_new = &est.mean + &k * innovation;
        let step = pos.iter().map(|&i| (x_new[i] - x_prev[i]).powi(2)).sum::<f64>().sqrt();
        if iter >= opts.max_iter.max(1) || step < opts.tol {
            hp_cache = (k, rows);
            x_prev = x_new;
            break;
        }
        x_prev = x_new;
    }
    let (k, rows) = hp_cache;
    Ok((
        FilterEstimate {
            mean: x_prev,
            cov: joseph(&est.cov, &k, &rows, &r),
            epoch: est.epoch,
        },
        iter,
    ))
}

/// `½ tr(N P)` for a sparse Hessian.
pub fn hessian_trace(n: &SparseHessian, p: &DMatrix<f64>) -> f64 {
    let mut t = 0.0;
    for (a, &i) in n.idx.iter().enumerate() {
        for (b, &j) in n.idx.iter().enumerate() {
            t += n.m[(a, b)] * p[(j, i)];
        }
    }
    0.5 * t
}

/// Second-order innovation term `S_lm = ½ tr(N_l P N_m P)`.
pub fn second_order_covariance(hessians: &[SparseHessian], p: &DMatrix<f64>) -> DMatrix<f64> {
    let m = hessians.len();
    // C_l = N_l P[V_l, :]
    let c: Vec<DMatrix<f64>> = hessians
        .iter()
        .map(|n| {
            if n.is_zero() {
                return DMatrix::zeros(0, 0);
            }
            let rows = DMatrix::from_fn(n.idx.len(), p.ncols(), |a, col| p[(n.idx[a], col)]);
            &n.m * rows
        })
        .collect();
    let mut s = DMatrix::zeros(m, m);
    for l in 0..m {
        if hessians[l].is_zero() {
            continue;
        }
        for k in l..m {
            if hessians[k].is_zero() {
                continue;
            }
            let (vl, vk) = (&hessians[l].idx, &hessians[k].idx);
            let mut t = 0.0;
            for (a, &ia) in vl.iter().enumerate() {
                for (b, &ib) in vk.iter().enumerate() {
                    t += c[l][(a, ib)] * c[k][(b, ia)];
                }
            }
            s[(l, k)] = 0.5 * t;
            s[(k, l)] = 0.5 * t;
        }
    }
    s
}

/// Second-order EKF update.
pub fn ekf2_update(
    est: &FilterEstimate,
    model: &SystemModel,
    obs: &ObservationSet,
    sats: &[SatEpoch],
) -> Result<FilterEstimate> {
    check_observations(obs)?;
    let (h, rows) = model.linearize(&est.mean, &obs.kinds, sats);
    let hess = model.hessians(&est.mean, &obs.kinds, sats);
    let r = DMatrix::from_diagonal(&DVector::from_vec(model.noise_variances(obs)));
    let bias = DVector::from_iterator(hess.len(), hess.iter().map(|n| hessian_trace(n, &est.cov)));
    let noise = r + second_order_covariance(&hess, &est.cov);
    let innovation = &obs.values - h - bias;
    let hp = h_times(&rows, &est.cov);
    let s = times_ht(&hp, &rows) + &noise;
    let k = gain(&hp, &s)?;
    Ok(FilterEstimate {
        mean: &est.mean + &k * innovation,
        cov: joseph(&est.cov, &k, &rows, &noise),
        epoch: est.epoch,
    })
}

/// Baseline EKF update: the model has no bias states and its noise
/// variances already include the stationary bias variances.
pub fn baseline_ekf_update(
    est: &FilterEstimate,
    model: &SystemModel,
    obs: &ObservationSet,
    sats: &[SatEpoch],
) -> Result<FilterEstimate> {
    if model.spec.sat_states || model.spec.link_states {
        return Err(Error::domain("baseline filter requires a model without bias states"));
    }
    ekf_update(est, model, obs, sats)
}

/// One filter instance of a given kind over a fixed model.
#[derive(Debug, Clone)]
pub struct Filter<'a> {
    pub kind: FilterKind,
    pub model: &'a SystemModel,
    pub iekf: IekfOptions,
    pub estimate: FilterEstimate,
}

impl<'a> Filter<'a> {
    pub fn new(kind: FilterKind, model: &'a SystemModel, estimate: FilterEstimate) -> Self {
        Self {
            kind,
            model,
            iekf: IekfOptions::default(),
            estimate,
        }
    }

    pub fn predict(&mut self, controls: &[Vector3<f64>]) {
        self.estimate = kf_predict(&self.estimate, &self.model.process, controls);
    }

    /// Applies the gated update; returns whether an update took place.
    pub fn update(&mut self, obs: &ObservationSet, sats: &[SatEpoch]) -> Result<bool> {
        if obs.is_empty() || !gate_update(obs.visible_sats, obs.anchors) {
            return Ok(false);
        }
        let m = self.model;
        self.estimate = match self.kind {
            FilterKind::Baseline => baseline_ekf_update(&self.estimate, m, obs, sats)?,
            FilterKind::Ekf => ekf_update(&self.estimate, m, obs, sats)?,
            FilterKind::Iekf => iekf_update(&self.estimate, m, obs, sats, self.iekf)?.0,
            FilterKind::Ekf2 => ekf2_update(&self.estimate, m, obs, sats)?,
        };
        Ok(true)
    }
}
