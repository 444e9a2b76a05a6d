//! Observation model: pseudoranges and rates to satellites, cooperative
//! pseudoranges between users, with analytic Jacobians and Hessians.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::SystemModel;
use crate::scenario::SatEpoch;

/// Tag of one scalar observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObsKind {
    SatPr { user: usize, sat: usize },
    SatPrr { user: usize, sat: usize },
    /// Pseudorange received by `rx` from `tx`; `link` indexes the unordered pair.
    CoopPr { rx: usize, tx: usize, link: usize },
}

/// Observations of one epoch in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub epoch: usize,
    pub kinds: Vec<ObsKind>,
    pub values: DVector<f64>,
    /// Thermal noise variance of each observation.
    pub variances: Vec<f64>,
    pub visible_sats: usize,
    /// Reference stations providing ranging this epoch.
    pub anchors: usize,
}

impl ObservationSet {
    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }
}

/// Non-zero entries of one Jacobian row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRow {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseRow {
    fn push(&mut self, i: usize, v: f64) {
        self.idx.push(i);
        self.val.push(v);
    }

    fn push3(&mut self, start: Option<usize>, g: &Vector3<f64>) {
        if let Some(s) = start {
            for a in 0..3 {
                self.push(s + a, g[a]);
            }
        }
    }

    pub fn dot(&self, x: &DVector<f64>) -> f64 {
        self.idx.iter().zip(&self.val).map(|(&i, &v)| v * x[i]).sum()
    }
}

/// Second derivative of one observation over the variables `idx`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHessian {
    pub idx: Vec<usize>,
    pub m: DMatrix<f64>,
}

impl SparseHessian {
    fn zero() -> Self {
        Self { idx: Vec::new(), m: DMatrix::zeros(0, 0) }
    }

    pub fn is_zero(&self) -> bool {
        self.idx.is_empty()
    }

    pub fn dense(&self, dim: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(dim, dim);
        for (a, &i) in self.idx.iter().enumerate() {
            for (b, &j) in self.idx.iter().enumerate() {
                out[(i, j)] += self.m[(a, b)];
            }
        }
        out
    }
}

fn projector(u: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::identity() - u * u.transpose()
}

impl SystemModel {
    /// `h(x)` for the given observation tags.
    pub fn predict_observations(&self, x: &DVector<f64>, kinds: &[ObsKind], sats: &[SatEpoch]) -> DVector<f64> {
        DVector::from_iterator(kinds.len(), kinds.iter().map(|k| self.predict_one(x, *k, sats)))
    }

    pub fn predict_one(&self, x: &DVector<f64>, kind: ObsKind, sats: &[SatEpoch]) -> f64 {
        match kind {
            ObsKind::SatPr { user, sat } => {
                let r = sats[sat].state.position - self.position(x, user);
                r.norm() + self.clock(x, user).0 + self.sat_bias(x, sat).0
            }
            ObsKind::SatPrr { user, sat } => {
                let r = sats[sat].state.position - self.position(x, user);
                let w = sats[sat].state.velocity - self.velocity(x, user);
                r.dot(&w) / r.norm() + self.clock(x, user).1 + self.sat_bias(x, sat).1
            }
            ObsKind::CoopPr { rx, tx, link } => {
                let d = (self.position(x, tx) - self.position(x, rx)).norm();
                d + self.clock(x, rx).0 - self.clock(x, tx).0 + self.link_bias(x, link)
            }
        }
    }

    /// `h(x)` and the sparse Jacobian rows at `x`.
    pub fn linearize(&self, x: &DVector<f64>, kinds: &[ObsKind], sats: &[SatEpoch]) -> (DVector<f64>, Vec<SparseRow>) {
        let h = self.predict_observations(x, kinds, sats);
        let rows = kinds.iter().map(|k| self.jacobian_row(x, *k, sats)).collect();
        (h, rows)
    }

    pub fn jacobian_row(&self, x: &DVector<f64>, kind: ObsKind, sats: &[SatEpoch]) -> SparseRow {
        let mut row = SparseRow::default();
        let m = &self.map;
        match kind {
            ObsKind::SatPr { user, sat } => {
                let r = sats[sat].state.position - self.position(x, user);
                let u = r / r.norm();
                row.push3(m.users[user].position, &(-u));
                row.push(m.users[user].clock, 1.0);
                if let Some(&b) = m.sat_bias.get(sat) {
                    row.push(b, 1.0);
                }
            }
            ObsKind::SatPrr { user, sat } => {
                let r = sats[sat].state.position - self.position(x, user);
                let w = sats[sat].state.velocity - self.velocity(x, user);
                let d = r.norm();
                let u = r / d;
                row.push3(m.users[user].position, &(-(projector(&u) * w) / d));
                row.push3(m.users[user].velocity, &(-u));
                row.push(m.users[user].clock + 1, 1.0);
                if let Some(&b) = m.sat_bias.get(sat) {
                    row.push(b + 1, 1.0);
                }
            }
            ObsKind::CoopPr { rx, tx, link } => {
                let r = self.position(x, tx) - self.position(x, rx);
                let u = r / r.norm();
                row.push3(m.users[rx].position, &(-u));
                row.push3(m.users[tx].position, &u);
                row.push(m.users[rx].clock, 1.0);
                row.push(m.users[tx].clock, -1.0);
                if let Some(&b) = m.link_bias.get(link) {
                    row.push(b, 1.0);
                }
            }
        }
        row
    }

    /// Dense Jacobian assembled from the sparse rows.
    pub fn jacobian(&self, x: &DVector<f64>, kinds: &[ObsKind], sats: &[SatEpoch]) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(kinds.len(), self.dim());
        for (r, k) in kinds.iter().enumerate() {
            let row = self.jacobian_row(x, *k, sats);
            for (&i, &v) in row.idx.iter().zip(&row.val) {
                h[(r, i)] += v;
            }
        }
        h
    }

    pub fn hessians(&self, x: &DVector<f64>, kinds: &[ObsKind], sats: &[SatEpoch]) -> Vec<SparseHessian> {
        kinds.iter().map(|k| self.hessian(x, *k, sats)).collect()
    }

    /// Analytic Hessian; clock and bias terms are linear and contribute nothing.
    pub fn hessian(&self, x: &DVector<f64>, kind: ObsKind, sats: &[SatEpoch]) -> SparseHessian {
        let m = &self.map;
        match kind {
            ObsKind::SatPr { user, sat } => {
                let Some(p) = m.users[user].position else { return SparseHessian::zero() };
                let r = sats[sat].state.position - self.position(x, user);
                let d = r.norm();
                let pr = projector(&(r / d)) / d;
                SparseHessian {
                    idx: (p..p + 3).collect(),
                    m: DMatrix::from_column_slice(3, 3, pr.as_slice()),
                }
            }
            ObsKind::SatPrr { user, sat } => {
                let Some(p) = m.users[user].position else { return SparseHessian::zero() };
                let r = sats[sat].state.position - self.position(x, user);
                let w = sats[sat].state.velocity - self.velocity(x, user);
                let d = r.norm();
                let u = r / d;
                let uw = u.dot(&w);
                let hpp = -(w * u.transpose() + u * w.transpose() + uw * (Matrix3::identity() - 3.0 * u * u.transpose()))
                    / (d * d);
                let hpv = projector(&u) / d;
                match m.users[user].velocity {
                    Some(v) => {
                        let mut h = DMatrix::zeros(6, 6);
                        h.view_mut((0, 0), (3, 3)).copy_from(&hpp);
                        h.view_mut((0, 3), (3, 3)).copy_from(&hpv);
                        h.view_mut((3, 0), (3, 3)).copy_from(&hpv.transpose());
                        SparseHessian {
                            idx: (p..p + 3).chain(v..v + 3).collect(),
                            m: h,
                        }
                    }
                    None => SparseHessian {
                        idx: (p..p + 3).collect(),
                        m: DMatrix::from_column_slice(3, 3, hpp.as_slice()),
                    },
                }
            }
            ObsKind::CoopPr { rx, tx, .. } => {
                let r = self.position(x, tx) - self.position(x, rx);
                let d = r.norm();
                let pr = projector(&(r / d)) / d;
                let slots: Vec<(usize, f64)> = [(m.users[rx].position, -1.0), (m.users[tx].position, 1.0)]
                    .into_iter()
                    .filter_map(|(s, sign)| s.map(|s| (s, sign)))
                    .collect();
                let n = 3 * slots.len();
                let mut h = DMatrix::zeros(n, n);
                let mut idx = Vec::with_capacity(n);
                for (a, &(sa, ga)) in slots.iter().enumerate() {
                    idx.extend(sa..sa + 3);
                    for (b, &(_, gb)) in slots.iter().enumerate() {
                        h.view_mut((3 * a, 3 * b), (3, 3)).copy_from(&(pr * (ga * gb)));
                    }
                }
                SparseHessian { idx, m: h }
            }
        }
    }
}
