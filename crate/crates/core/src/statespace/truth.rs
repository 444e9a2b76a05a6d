//! Truth simulation of the full augmented system.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{BlockTag, ObsKind, ObservationSet, SystemModel};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{Entity, TrialStreams};
use crate::scenario::Scenario;
use crate::tworay::{self, Reflection, TwoRayGeometry};

/// Which random components are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruthOptions {
    pub process_noise: bool,
    pub observation_noise: bool,
    /// Draw the initial bias states from their prior instead of zero.
    pub initial_bias: bool,
}

impl TruthOptions {
    pub fn full() -> Self {
        Self {
            process_noise: true,
            observation_noise: true,
            initial_bias: true,
        }
    }

    /// Nominal trajectory, zero biases, noise-free observations.
    pub fn noiseless() -> Self {
        Self {
            process_noise: false,
            observation_noise: false,
            initial_bias: false,
        }
    }
}

/// One realization of states, controls and observations.
#[derive(Debug, Clone)]
pub struct TruthRun {
    /// Truth states in the layout of the generating model.
    pub states: Vec<DVector<f64>>,
    /// Per-epoch, per-user velocity increments (zero at epoch 0).
    pub controls: Vec<Vec<Vector3<f64>>>,
    pub observations: Vec<ObservationSet>,
}

fn normals<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Closest approach below which a cooperative link is not measured (m).
const MIN_LINK_DISTANCE: f64 = 0.1;

/// Observation tags and thermal variances at truth state `x`, in canonical order.
pub fn plan_observations(
    scn: &Scenario,
    model: &SystemModel,
    x: &DVector<f64>,
    epoch: usize,
) -> Result<(Vec<ObsKind>, Vec<f64>, usize, usize)> {
    let cfg = &scn.config;
    let sats = &scn.sats[epoch];
    let visible: Vec<usize> = (0..sats.len()).filter(|&j| sats[j].visible).collect();
    let mut kinds = Vec::new();
    let mut vars = Vec::new();
    for (u, spec) in cfg.users.iter().enumerate() {
        if spec.is_station() && !spec.observes_satellites {
            continue;
        }
        for &j in &visible {
            kinds.push(ObsKind::SatPr { user: u, sat: j });
            vars.push(sats[j].var_pr);
            kinds.push(ObsKind::SatPrr { user: u, sat: j });
            vars.push(sats[j].var_prr);
        }
    }
    let refl = Reflection::Ground(cfg.coop.permittivity);
    let mut anchor = false;
    let n = cfg.users.len();
    for rx in 0..n {
        for tx in 0..n {
            let Some(link) = model.map.link_index(rx, tx).filter(|_| rx != tx) else { continue };
            let (pr, pt) = (model.position(x, rx), model.position(x, tx));
            let d = (pt - pr).norm();
            if d > cfg.coop.max_range || d < MIN_LINK_DISTANCE {
                continue;
            }
            let d_h = (pt - pr).xy().norm();
            let geom = TwoRayGeometry::new(pt.z.max(1e-3), pr.z.max(1e-3), d_h)?;
            kinds.push(ObsKind::CoopPr { rx, tx, link });
            vars.push(tworay::link_crb(&geom, &cfg.coop.ofdm, refl)?);
            if Some(rx) == model.station || Some(tx) == model.station {
                anchor = true;
            }
        }
    }
    Ok((kinds, vars, visible.len(), usize::from(anchor)))
}

/// Simulates states and observations over the scenario window.
///
/// `model` must carry link-bias states; satellite biases without states
/// (white-noise model) are drawn independently each epoch. Moving users follow
/// their nominal velocity through a closed-loop control
/// `o_k = v_nom,k − v_{k−1}`, which is returned so filters use the same input.
pub fn simulate_truth(
    scn: &Scenario,
    model: &SystemModel,
    streams: &TrialStreams,
    opts: TruthOptions,
) -> Result<TruthRun> {
    if !model.map.links.is_empty() && model.map.link_bias.is_empty() {
        return Err(Error::domain("truth model needs link-bias states"));
    }
    let cfg = &scn.config;
    let n_users = cfg.users.len();
    let pm = &model.process;
    let factors: Vec<DMatrix<f64>> = pm.blocks.iter().map(|b| linalg::psd_factor(&b.q)).collect::<Result<_>>()?;

    let mut x = DVector::zeros(model.dim());
    for (u, s) in model.map.users.iter().enumerate() {
        let tr = &scn.trajectories[u];
        if let Some(p) = s.position {
            x.fixed_rows_mut::<3>(p).copy_from(&tr.positions[0]);
        }
        if let Some(v) = s.velocity {
            x.fixed_rows_mut::<3>(v).copy_from(&tr.velocities[0]);
        }
        x.fixed_rows_mut::<2>(s.clock).copy_from(&cfg.users[u].clock.initial_state());
    }
    if opts.initial_bias {
        let c0 = model.spec.sat_bias.initial_covariance();
        for (j, &s) in model.map.sat_bias.iter().enumerate() {
            let z = normals(&mut streams.stream(Entity::SatBias, j, 2, 0), 2);
            x[s] = c0[(0, 0)].sqrt() * z[0];
            x[s + 1] = c0[(1, 1)].sqrt() * z[1];
        }
        let sc = model.spec.coop_bias.sigma();
        for (l, &s) in model.map.link_bias.iter().enumerate() {
            x[s] = sc * normals(&mut streams.stream(Entity::CoopBias, l, 1, 0), 1)[0];
        }
    }

    let white_sat = if model.spec.sat_states { None } else { Some(model.spec.sat_bias.white_variances()) };
    let mut states = Vec::with_capacity(scn.n_epochs);
    let mut controls = Vec::with_capacity(scn.n_epochs);
    let mut observations = Vec::with_capacity(scn.n_epochs);
    for k in 0..scn.n_epochs {
        let mut o = vec![Vector3::zeros(); n_users];
        if k > 0 {
            for (u, s) in model.map.users.iter().enumerate() {
                if let Some(v) = s.velocity {
                    o[u] = scn.trajectories[u].velocities[k] - x.fixed_rows::<3>(v);
                }
            }
            x = pm.propagate_mean(&x, &o);
            if opts.process_noise {
                for (b, l) in pm.blocks.iter().zip(&factors) {
                    let (kind, a) = match b.tag {
                        BlockTag::PositionVelocity(u) => (Entity::UserMotion, u),
                        BlockTag::Position(_) => continue,
                        BlockTag::Clock(u) => (Entity::UserClock, u),
                        BlockTag::SatBias(j) => (Entity::SatBias, j),
                        BlockTag::LinkBias(i) => (Entity::CoopBias, i),
                    };
                    let w = l * normals(&mut streams.stream(kind, a, 0, k), b.size());
                    let mut seg = x.rows_mut(b.start, b.size());
                    seg += w;
                }
            }
        }

        let (kinds, vars, visible, anchors) = plan_observations(scn, model, &x, k)?;
        let sats = &scn.sats[k];
        let mut values = model.predict_observations(&x, &kinds, sats);
        let white: Vec<(f64, f64)> = match white_sat {
            Some((r, rr)) if opts.process_noise => (0..sats.len())
                .map(|j| {
                    let z = normals(&mut streams.stream(Entity::SatBias, j, 1, k), 2);
                    (r.sqrt() * z[0], rr.sqrt() * z[1])
                })
                .collect(),
            _ => vec![(0.0, 0.0); sats.len()],
        };
        for (i, kind) in kinds.iter().enumerate() {
            match *kind {
                ObsKind::SatPr { user, sat } => {
                    values[i] += white[sat].0;
                    if opts.observation_noise {
                        let z = normals(&mut streams.stream(Entity::SatObservation, user, sat, k), 2);
                        values[i] += vars[i].sqrt() * z[0];
                    }
                }
                ObsKind::SatPrr { user, sat } => {
                    values[i] += white[sat].1;
                    if opts.observation_noise {
                        let z = normals(&mut streams.stream(Entity::SatObservation, user, sat, k), 2);
                        values[i] += vars[i].sqrt() * z[1];
                    }
                }
                ObsKind::CoopPr { rx, tx, .. } => {
                    if opts.observation_noise {
                        let z = normals(&mut streams.stream(Entity::CoopObservation, rx, tx, k), 1);
                        values[i] += vars[i].sqrt() * z[0];
                    }
                }
            }
        }
        observations.push(ObservationSet {
            epoch: k,
            kinds,
            values,
            variances: vars,
            visible_sats: visible,
            anchors,
        });
        states.push(x.clone());
        controls.push(o);
    }
    Ok(TruthRun {
        states,
        controls,
        observations,
    })
}
