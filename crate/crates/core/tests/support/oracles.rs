//! Independent numerical oracles shared by the core tests and the acceptance suite.

#![allow(dead_code)]

use hybridpnt::bounds::bcrb_step_dense;
use hybridpnt::rng::TrialStreams;
use hybridpnt::statespace::{simulate_truth, ModelSpec, ObsKind, SystemModel, TruthOptions};
use hybridpnt::{Scenario, ScenarioConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, Default)]
pub struct DerivativeReport {
    pub states: usize,
    pub rows: usize,
    pub max_jacobian_rel: f64,
    pub max_hessian_rel: f64,
}

fn max_abs(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, |m, x| m.max(x.abs()))
}

fn rel(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = max_abs(analytic.iter().copied()).max(max_abs(numeric.iter().copied()));
    if scale == 0.0 {
        return 0.0;
    }
    max_abs(analytic.iter().zip(numeric).map(|(a, b)| a - b)) / scale
}

fn dense_row(model: &SystemModel, x: &DVector<f64>, kind: ObsKind, sats: &[hybridpnt::scenario::SatEpoch]) -> Vec<f64> {
    let row = model.jacobian_row(x, kind, sats);
    let mut out = vec![0.0; model.dim()];
    for (&i, &v) in row.idx.iter().zip(&row.val) {
        out[i] += v;
    }
    out
}

/// Central-difference step: satellite ranges are ~10⁷ m, surface links ~10² m.
fn step(kind: ObsKind) -> f64 {
    match kind {
        ObsKind::CoopPr { .. } => 1e-3,
        _ => 1.0,
    }
}

/// Jacobians against central differences of `h`, Hessians against central
/// differences of the Jacobian, at `n_states` random states spread over the
/// default window and two user layouts.
pub fn derivative_suite(n_states: usize, seed: u64) -> DerivativeReport {
    let mut cfg_a = ScenarioConfig::reference_station(hybridpnt::CoopMode::AllPairs, true);
    let mut cfg_b = ScenarioConfig::paper_defaults().with_static_user();
    for c in [&mut cfg_a, &mut cfg_b] {
        c.duration = 7200.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = DerivativeReport::default();
    for cfg in [cfg_a, cfg_b] {
        let scn = Scenario::build(&cfg).unwrap();
        let model = SystemModel::new(&scn, ModelSpec::from_config(&cfg)).unwrap();
        let truth = simulate_truth(&scn, &model, &TrialStreams::new(seed, 0), TruthOptions::noiseless()).unwrap();
        for _ in 0..n_states / 2 {
            let k = rng.random_range(0..scn.n_epochs);
            let sats = &scn.sats[k];
            let mut x = truth.states[k].clone();
            for v in x.iter_mut() {
                *v += rng.random_range(-20.0..20.0);
            }
            // Every satellite and every link, visible or not.
            let mut kinds = Vec::new();
            for u in 0..cfg.users.len() {
                for s in 0..cfg.satellites.len() {
                    kinds.push(ObsKind::SatPr { user: u, sat: s });
                    kinds.push(ObsKind::SatPrr { user: u, sat: s });
                }
            }
            for (l, &(a, b)) in model.map.links.iter().enumerate() {
                kinds.push(ObsKind::CoopPr { rx: a, tx: b, link: l });
                kinds.push(ObsKind::CoopPr { rx: b, tx: a, link: l });
            }
            for kind in kinds {
                let h = step(kind);
                let n = model.dim();
                let analytic = dense_row(&model, &x, kind, sats);
                let mut numeric = vec![0.0; n];
                let mut hess_fd = DMatrix::zeros(n, n);
                for i in 0..n {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    numeric[i] = (model.predict_one(&xp, kind, sats) - model.predict_one(&xm, kind, sats)) / (2.0 * h);
                    let (jp, jm) = (dense_row(&model, &xp, kind, sats), dense_row(&model, &xm, kind, sats));
                    for j in 0..n {
                        hess_fd[(i, j)] = (jp[j] - jm[j]) / (2.0 * h);
                    }
                }
                let hess = model.hessian(&x, kind, sats).dense(n);
                report.max_jacobian_rel = report.max_jacobian_rel.max(rel(&analytic, &numeric));
                report.max_hessian_rel = report.max_hessian_rel.max(rel(hess.as_slice(), hess_fd.as_slice()));
                report.rows += 1;
            }
            report.states += 1;
        }
    }
    report
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * floor
}

fn relative(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// Largest relative difference between the inverse BCRB information recursion
/// and the Kalman covariance recursion (Joseph form) over `systems` random
/// linear-Gaussian systems, each run for `steps` epochs.
pub fn duality_suite(systems: usize, steps: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..systems {
        let n = rng.random_range(2..=9);
        let m = rng.random_range(1..=6);
        let f = DMatrix::identity(n, n) + DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.3..0.3));
        let q = random_spd(&mut rng, n, 0.05) * 0.1;
        let p0 = random_spd(&mut rng, n, 0.5);
        let mut p = p0.clone();
        let mut j = p0.clone().try_inverse().unwrap();
        for _ in 0..steps {
            let h = DMatrix::from_fn(m, n, |_, _| rng.random_range(-2.0..2.0));
            let r: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..2.0)).collect();
            let rm = DMatrix::from_diagonal(&DVector::from_vec(r.clone()));
            // Kalman filter covariance
            let pp = &f * &p * f.transpose() + &q;
            let s = &h * &pp * h.transpose() + &rm;
            let k = &pp * h.transpose() * s.try_inverse().unwrap();
            let ikh = DMatrix::identity(n, n) - &k * &h;
            p = &ikh * &pp * ikh.transpose() + &k * &rm * k.transpose();
            // Information recursion
            let info = h.transpose() * rm.try_inverse().unwrap() * &h;
            j = bcrb_step_dense(&j, &f, &q, Some(&info)).unwrap();
            worst = worst.max(relative(&j.clone().try_inverse().unwrap(), &p));
        }
    }
    worst
}
