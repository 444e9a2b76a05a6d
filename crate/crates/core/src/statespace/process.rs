//! Block-diagonal transition and process noise of the augmented state.

use nalgebra::{DMatrix, DVector, Vector3};

use super::{ModelSpec, StateIndexMap};
use crate::error::Result;
use crate::gmp;
use crate::scenario::{clock_noise, clock_transition, ScenarioConfig};

/// What a block of the state describes; used to key random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockTag {
    PositionVelocity(usize),
    Position(usize),
    Clock(usize),
    SatBias(usize),
    LinkBias(usize),
}

/// One diagonal block `x[start..start+n] ← F x + w`, `w ~ N(0, Q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub start: usize,
    pub f: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub tag: BlockTag,
    identity: bool,
}

impl Block {
    fn new(start: usize, f: DMatrix<f64>, q: DMatrix<f64>, tag: BlockTag) -> Self {
        let identity = f.is_identity(0.0) && q.iter().all(|&v| v == 0.0);
        Self { start, f, q, tag, identity }
    }

    pub fn size(&self) -> usize {
        self.f.nrows()
    }
}

/// `x_k = F x_{k−1} + D o_k + w_k` with block-diagonal `F` and `Q`.
///
/// The control `o_k` is the per-user velocity increment; `D` places it on the
/// velocity slots.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessModel {
    pub dim: usize,
    pub step: f64,
    pub blocks: Vec<Block>,
    /// Velocity slot per user, where the control enters.
    pub control_slots: Vec<Option<usize>>,
}

/// Assembles the user, clock and bias blocks for the epoch step.
pub fn assemble_process(cfg: &ScenarioConfig, map: &StateIndexMap, spec: &ModelSpec) -> Result<ProcessModel> {
    let t = cfg.step;
    let mut blocks = Vec::new();
    for (u, (s, us)) in map.users.iter().zip(&cfg.users).enumerate() {
        match (s.position, s.velocity) {
            (Some(p), Some(_)) => {
                let mut f = DMatrix::identity(6, 6);
                let sv = us.velocity_noise * us.velocity_noise;
                let mut q = DMatrix::zeros(6, 6);
                for a in 0..3 {
                    f[(a, a + 3)] = t;
                    q[(a, a)] = sv * t.powi(3) / 3.0;
                    q[(a, a + 3)] = sv * t * t / 2.0;
                    q[(a + 3, a)] = sv * t * t / 2.0;
                    q[(a + 3, a + 3)] = sv * t;
                }
                blocks.push(Block::new(p, f, q, BlockTag::PositionVelocity(u)));
            }
            (Some(p), None) => {
                blocks.push(Block::new(p, DMatrix::identity(3, 3), DMatrix::zeros(3, 3), BlockTag::Position(u)))
            }
            _ => {}
        }
        let fc = clock_transition(t);
        let qc = clock_noise(&us.clock, t);
        blocks.push(Block::new(
            s.clock,
            DMatrix::from_column_slice(2, 2, fc.as_slice()),
            DMatrix::from_column_slice(2, 2, qc.as_slice()),
            BlockTag::Clock(u),
        ));
    }
    if !map.sat_bias.is_empty() {
        let (a, q) = spec.sat_bias.discretize(t)?;
        for (j, &s) in map.sat_bias.iter().enumerate() {
            blocks.push(Block::new(
                s,
                DMatrix::from_column_slice(2, 2, a.as_slice()),
                DMatrix::from_column_slice(2, 2, q.as_slice()),
                BlockTag::SatBias(j),
            ));
        }
    }
    if !map.link_bias.is_empty() {
        let (a, q) = gmp::gmp1_discretize(&spec.coop_bias, t)?;
        for (l, &s) in map.link_bias.iter().enumerate() {
            blocks.push(Block::new(
                s,
                DMatrix::from_element(1, 1, a),
                DMatrix::from_element(1, 1, q),
                BlockTag::LinkBias(l),
            ));
        }
    }
    blocks.sort_by_key(|b| b.start);
    Ok(ProcessModel {
        dim: map.dim,
        step: t,
        blocks,
        control_slots: map.users.iter().map(|s| s.velocity).collect(),
    })
}

impl ProcessModel {
    pub fn dense_f(&self) -> DMatrix<f64> {
        let mut f = DMatrix::identity(self.dim, self.dim);
        for b in &self.blocks {
            f.view_mut((b.start, b.start), (b.size(), b.size())).copy_from(&b.f);
        }
        f
    }

    pub fn dense_q(&self) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(self.dim, self.dim);
        for b in &self.blocks {
            q.view_mut((b.start, b.start), (b.size(), b.size())).copy_from(&b.q);
        }
        q
    }

    /// `D o` for per-user velocity increments `controls`.
    pub fn control_vector(&self, controls: &[Vector3<f64>]) -> DVector<f64> {
        let mut d = DVector::zeros(self.dim);
        for (slot, o) in self.control_slots.iter().zip(controls) {
            if let Some(v) = slot {
                d.fixed_rows_mut::<3>(*v).copy_from(o);
            }
        }
        d
    }

    /// `F x + D o`.
    pub fn propagate_mean(&self, x: &DVector<f64>, controls: &[Vector3<f64>]) -> DVector<f64> {
        let mut out = x.clone();
        for b in self.blocks.iter().filter(|b| !b.identity) {
            let seg = x.rows(b.start, b.size());
            out.rows_mut(b.start, b.size()).copy_from(&(&b.f * seg));
        }
        for (slot, o) in self.control_slots.iter().zip(controls) {
            if let Some(v) = slot {
                let mut s = out.fixed_rows_mut::<3>(*v);
                s += o;
            }
        }
        out
    }

    /// `F P Fᵀ + Q` exploiting the block structure.
    pub fn propagate_covariance(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = p.clone();
        for b in self.blocks.iter().filter(|b| !b.identity) {
            let rows = &b.f * out.rows(b.start, b.size());
            out.rows_mut(b.start, b.size()).copy_from(&rows);
        }
        for b in self.blocks.iter().filter(|b| !b.identity) {
            let cols = out.columns(b.start, b.size()) * b.f.transpose();
            out.columns_mut(b.start, b.size()).copy_from(&cols);
            let mut d = out.view_mut((b.start, b.start), (b.size(), b.size()));
            d += &b.q;
        }
        out
    }
}
