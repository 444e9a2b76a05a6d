//! Augmented hybrid state space: layout, process model, observation model
//! with analytic derivatives, and truth simulation.

pub mod observation;
pub mod process;
pub mod truth;

pub use observation::{ObsKind, ObservationSet, SparseHessian, SparseRow};
pub use process::{assemble_process, Block, BlockTag, ProcessModel};
pub use truth::{simulate_truth, TruthOptions, TruthRun};

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmp::{self, Gmp1Params, SatBiasModel};
use crate::scenario::{CoopMode, PriorBias, Scenario, ScenarioConfig, UserKind};

/// State slots of one user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserSlots {
    /// Absent for the reference station, whose position is known.
    pub position: Option<usize>,
    /// Absent for static users and the station.
    pub velocity: Option<usize>,
    pub clock: usize,
}

/// Canonical index layout of the augmented state.
///
/// Users in configuration order (position, velocity, clock), then one
/// range/rate bias pair per satellite, then one bias per cooperative pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateIndexMap {
    pub users: Vec<UserSlots>,
    /// Start of each satellite's bias pair; empty when biases are not states.
    pub sat_bias: Vec<usize>,
    /// Unordered user pairs `(i, j)`, `i < j`, that exchange ranging signals.
    pub links: Vec<(usize, usize)>,
    /// Bias slot per link; empty when link biases are not states.
    pub link_bias: Vec<usize>,
    pub dim: usize,
}

/// Meaning of one state component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateLabel {
    Position { user: usize, axis: usize },
    Velocity { user: usize, axis: usize },
    Clock { user: usize, derivative: usize },
    SatBias { sat: usize, derivative: usize },
    LinkBias { link: usize },
}

/// Pairs that exchange ranging signals under the configured mode.
pub fn enabled_links(cfg: &ScenarioConfig) -> Vec<(usize, usize)> {
    let n = cfg.users.len();
    let station = cfg.station_index();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let ok = match cfg.coop.mode {
                CoopMode::Off => false,
                CoopMode::StationLinks => station == Some(i) || station == Some(j),
                CoopMode::AllPairs => true,
            };
            if ok {
                out.push((i, j));
            }
        }
    }
    out
}

/// Builds the layout; bias blocks are included only when requested.
pub fn build_index_map(cfg: &ScenarioConfig, sat_states: bool, link_states: bool) -> Result<StateIndexMap> {
    if cfg.users.is_empty() {
        return Err(Error::config("users", "at least one user is required"));
    }
    let mut next = 0;
    let mut take = |n: usize| {
        let s = next;
        next += n;
        s
    };
    let users = cfg
        .users
        .iter()
        .map(|u| {
            let position = (u.kind != UserKind::ReferenceStation).then(|| take(3));
            let velocity = (u.kind == UserKind::MovingRover).then(|| take(3));
            UserSlots {
                position,
                velocity,
                clock: take(2),
            }
        })
        .collect();
    let sat_bias = if sat_states {
        (0..cfg.satellites.len()).map(|_| take(2)).collect()
    } else {
        Vec::new()
    };
    let links = enabled_links(cfg);
    let link_bias = if link_states { links.iter().map(|_| take(1)).collect() } else { Vec::new() };
    Ok(StateIndexMap {
        users,
        sat_bias,
        links,
        link_bias,
        dim: next,
    })
}

impl StateIndexMap {
    pub fn link_index(&self, a: usize, b: usize) -> Option<usize> {
        let key = (a.min(b), a.max(b));
        self.links.iter().position(|&l| l == key)
    }

    pub fn labels(&self) -> Vec<StateLabel> {
        let mut out = vec![StateLabel::LinkBias { link: usize::MAX }; self.dim];
        for (u, s) in self.users.iter().enumerate() {
            for axis in 0..3 {
                if let Some(p) = s.position {
                    out[p + axis] = StateLabel::Position { user: u, axis };
                }
                if let Some(v) = s.velocity {
                    out[v + axis] = StateLabel::Velocity { user: u, axis };
                }
            }
            out[s.clock] = StateLabel::Clock { user: u, derivative: 0 };
            out[s.clock + 1] = StateLabel::Clock { user: u, derivative: 1 };
        }
        for (sat, &s) in self.sat_bias.iter().enumerate() {
            out[s] = StateLabel::SatBias { sat, derivative: 0 };
            out[s + 1] = StateLabel::SatBias { sat, derivative: 1 };
        }
        for (link, &s) in self.link_bias.iter().enumerate() {
            out[s] = StateLabel::LinkBias { link };
        }
        out
    }

    /// Index of `label` in this layout, if present.
    pub fn find(&self, label: StateLabel) -> Option<usize> {
        match label {
            StateLabel::Position { user, axis } => self.users.get(user)?.position.map(|p| p + axis),
            StateLabel::Velocity { user, axis } => self.users.get(user)?.velocity.map(|p| p + axis),
            StateLabel::Clock { user, derivative } => self.users.get(user).map(|s| s.clock + derivative),
            StateLabel::SatBias { sat, derivative } => self.sat_bias.get(sat).map(|s| s + derivative),
            StateLabel::LinkBias { link } => self.link_bias.get(link).copied(),
        }
    }

    /// Position slots of every user that has them, in user order.
    pub fn position_indices(&self) -> Vec<usize> {
        self.users
            .iter()
            .filter_map(|s| s.position)
            .flat_map(|p| p..p + 3)
            .collect()
    }
}

/// State vector with its epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    pub x: DVector<f64>,
    pub epoch: usize,
}

/// Bias processes assumed by a model and whether they are estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub sat_bias: SatBiasModel,
    pub coop_bias: Gmp1Params,
    pub sat_states: bool,
    pub link_states: bool,
}

impl ModelSpec {
    /// Biases as states wherever the process has states.
    pub fn augmented(sat_bias: SatBiasModel, coop_bias: Gmp1Params) -> Self {
        Self {
            sat_bias,
            coop_bias,
            sat_states: sat_bias.has_states(),
            link_states: true,
        }
    }

    /// No bias states; stationary bias variances are treated as white noise.
    pub fn baseline(sat_bias: SatBiasModel, coop_bias: Gmp1Params) -> Self {
        Self {
            sat_bias,
            coop_bias,
            sat_states: false,
            link_states: false,
        }
    }

    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self::augmented(cfg.sat_bias_model, cfg.coop_bias)
    }
}

/// Everything a filter or bound needs about the system at fixed parameters.
#[derive(Debug, Clone)]
pub struct SystemModel {
    pub map: StateIndexMap,
    pub process: ProcessModel,
    pub spec: ModelSpec,
    /// Known positions of users without position states.
    pub pinned: Vec<Option<Vector3<f64>>>,
    /// Prior variances, one per state.
    pub prior: DVector<f64>,
    /// Station index when it counts as a ranging anchor.
    pub station: Option<usize>,
}

impl SystemModel {
    pub fn new(scn: &Scenario, spec: ModelSpec) -> Result<Self> {
        let cfg = &scn.config;
        let map = build_index_map(cfg, spec.sat_states, spec.link_states)?;
        let process = assemble_process(cfg, &map, &spec)?;
        let pinned = map
            .users
            .iter()
            .zip(&scn.trajectories)
            .map(|(s, t)| s.position.is_none().then(|| t.positions[0]))
            .collect();
        let prior = prior_variances(cfg, &map, &spec)?;
        Ok(Self {
            map,
            process,
            spec,
            pinned,
            prior,
            station: cfg.station_index(),
        })
    }

    pub fn dim(&self) -> usize {
        self.map.dim
    }

    pub fn prior_covariance(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.prior)
    }

    pub fn position(&self, x: &DVector<f64>, user: usize) -> Vector3<f64> {
        match self.map.users[user].position {
            Some(p) => Vector3::new(x[p], x[p + 1], x[p + 2]),
            None => self.pinned[user].expect("pinned position for stateless user"),
        }
    }

    pub fn velocity(&self, x: &DVector<f64>, user: usize) -> Vector3<f64> {
        match self.map.users[user].velocity {
            Some(v) => Vector3::new(x[v], x[v + 1], x[v + 2]),
            None => Vector3::zeros(),
        }
    }

    pub fn clock(&self, x: &DVector<f64>, user: usize) -> (f64, f64) {
        let c = self.map.users[user].clock;
        (x[c], x[c + 1])
    }

    pub fn sat_bias(&self, x: &DVector<f64>, sat: usize) -> (f64, f64) {
        self.map.sat_bias.get(sat).map_or((0.0, 0.0), |&s| (x[s], x[s + 1]))
    }

    pub fn link_bias(&self, x: &DVector<f64>, link: usize) -> f64 {
        self.map.link_bias.get(link).map_or(0.0, |&s| x[s])
    }

    /// Stationary bias variances folded into the measurement noise for
    /// biases that are not states: `(range, rate, coop)`.
    pub fn white_bias_variances(&self) -> (f64, f64, f64) {
        let (r, rr) = if self.spec.sat_states { (0.0, 0.0) } else { self.spec.sat_bias.white_variances() };
        let c = if self.spec.link_states { 0.0 } else { self.spec.coop_bias.sigma2 };
        (r, rr, c)
    }

    /// Measurement noise variances seen by this model.
    pub fn noise_variances(&self, obs: &ObservationSet) -> Vec<f64> {
        let (r, rr, c) = self.white_bias_variances();
        obs.kinds
            .iter()
            .zip(&obs.variances)
            .map(|(k, &v)| match k {
                ObsKind::SatPr { .. } => v + r,
                ObsKind::SatPrr { .. } => v + rr,
                ObsKind::CoopPr { .. } => v + c,
            })
            .collect()
    }

    /// Copies the components this model shares with `other` from `x_other`.
    pub fn project_from(&self, other: &SystemModel, x_other: &DVector<f64>) -> DVector<f64> {
        let mut x = DVector::zeros(self.dim());
        for (i, l) in self.map.labels().into_iter().enumerate() {
            if let Some(j) = other.map.find(l) {
                x[i] = x_other[j];
            }
        }
        x
    }
}

fn prior_variances(cfg: &ScenarioConfig, map: &StateIndexMap, spec: &ModelSpec) -> Result<DVector<f64>> {
    let [pp, pv, pc, pd] = cfg.priors.variances();
    let mut out = DVector::zeros(map.dim);
    for s in &map.users {
        if let Some(p) = s.position {
            out.rows_mut(p, 3).fill(pp);
        }
        if let Some(v) = s.velocity {
            out.rows_mut(v, 3).fill(pv);
        }
        out[s.clock] = pc;
        out[s.clock + 1] = pd;
    }
    if !map.sat_bias.is_empty() {
        let c = match cfg.prior_bias {
            PriorBias::Stationary => spec.sat_bias.initial_covariance(),
            PriorBias::OneStep => spec.sat_bias.discretize(cfg.step)?.1,
        };
        for &s in &map.sat_bias {
            out[s] = c[(0, 0)];
            out[s + 1] = c[(1, 1)];
        }
    }
    if !map.link_bias.is_empty() {
        let v = match cfg.prior_bias {
            PriorBias::Stationary => spec.coop_bias.sigma2,
            PriorBias::OneStep => gmp::gmp1_discretize(&spec.coop_bias, cfg.step)?.1,
        };
        for &s in &map.link_bias {
            out[s] = v;
        }
    }
    if out.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::config("priors", "every state needs a positive prior variance"));
    }
    Ok(out)
}
