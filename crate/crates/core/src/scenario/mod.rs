//! Scenario generation: orbits, site geometry, link budget, user trajectories
//! and clocks, plus the per-epoch geometry shared by all Monte Carlo trials.

pub mod clock;
pub mod config;
pub mod link;
pub mod orbit;
pub mod site;
pub mod trajectory;

pub use clock::{clock_noise, clock_step, clock_transition, ClockModel};
pub use config::{CoopConfig, CoopMode, PriorBias, Priors, SatelliteSpec, ScenarioConfig};
pub use link::{cn0, dll_fll_variances, LinkBudget};
pub use orbit::{propagate_orbit, KeplerianElements, OrbitState};
pub use site::{look_angles, site_geometry, LocalSatState, Site, SiteGeometry};
pub use trajectory::{generate_trajectory, Trajectory, UserKind, UserSpec};

use rayon::prelude::*;

use crate::error::Result;

/// One satellite at one epoch, seen from the site origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatEpoch {
    pub state: LocalSatState,
    pub elevation: f64,
    pub visible: bool,
    pub cn0: f64,
    /// Thermal pseudorange variance (m²).
    pub var_pr: f64,
    /// Thermal pseudorange-rate variance ((m/s)²).
    pub var_prr: f64,
}

/// Deterministic per-epoch geometry of a configured scenario.
///
/// Visibility and C/N0 are evaluated at the site origin and shared by all
/// users, who stay within a few hundred metres of it.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub n_epochs: usize,
    /// `sats[k][j]`: satellite `j` at epoch `k`.
    pub sats: Vec<Vec<SatEpoch>>,
    pub trajectories: Vec<Trajectory>,
}

impl Scenario {
    pub fn build(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let n = config.n_epochs();
        let lb = &config.link_budget;
        let sats = (0..n)
            .into_par_iter()
            .map(|k| {
                let t = config.start_time + k as f64 * config.step;
                config
                    .satellites
                    .iter()
                    .map(|s| {
                        let st = propagate_orbit(&s.elements, t)?;
                        let local = config.site.to_local(&st, t);
                        let g = look_angles(&local, &nalgebra::Vector3::zeros(), lb.elevation_mask);
                        let c = cn0(g.elevation.max(0.0), g.range, lb)?;
                        let (var_pr, var_prr) = dll_fll_variances(c, lb);
                        Ok(SatEpoch {
                            state: local,
                            elevation: g.elevation,
                            visible: g.visible,
                            cn0: c,
                            var_pr,
                            var_prr,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let trajectories = config
            .users
            .iter()
            .map(|u| generate_trajectory(u, config.step, n))
            .collect::<Result<_>>()?;
        Ok(Self {
            config: config.clone(),
            n_epochs: n,
            sats,
            trajectories,
        })
    }

    pub fn time(&self, k: usize) -> f64 {
        self.config.start_time + k as f64 * self.config.step
    }

    pub fn visible_count(&self, k: usize) -> usize {
        self.sats[k].iter().filter(|s| s.visible).count()
    }
}
