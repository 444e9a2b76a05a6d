//! Scenario variants compared by the bound case studies.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, BcrbOptions, BimSequence};
use crate::error::{Error, Result};
use crate::gmp::SatBiasKind;
use crate::scenario::{CoopMode, Scenario, ScenarioConfig, UserSpec};
use crate::statespace::{ModelSpec, SystemModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundsCase {
    /// Single user under each satellite bias process.
    SiseModels,
    /// Satellite-only against hybrid, with and without a static user.
    SatVsHybrid,
    /// Four rovers with a reference station in increasing levels of cooperation.
    ReferenceStation,
}

impl BoundsCase {
    pub const ALL: [BoundsCase; 3] = [Self::SiseModels, Self::SatVsHybrid, Self::ReferenceStation];

    pub fn tag(self) -> &'static str {
        match self {
            Self::SiseModels => "sise_models",
            Self::SatVsHybrid => "sat_vs_hybrid",
            Self::ReferenceStation => "reference_station",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.tag() == tag)
            .ok_or_else(|| {
                Error::config(
                    "case",
                    format!("unknown case `{tag}` (expected sise_models, sat_vs_hybrid or reference_station)"),
                )
            })
    }

    /// Named scenario variants derived from `base`.
    pub fn variants(self, base: &ScenarioConfig) -> Vec<(String, ScenarioConfig)> {
        match self {
            Self::SiseModels => [
                ("wgn", SatBiasKind::Wgn),
                ("gmp1", SatBiasKind::Gmp1),
                ("igmp1", SatBiasKind::Igmp1),
                ("gmp2", SatBiasKind::Gmp2),
            ]
            .into_iter()
            .map(|(name, kind)| (name.to_string(), sise_variant(base, kind)))
            .collect(),
            Self::SatVsHybrid => {
                let movers = without_station(base);
                vec![
                    ("satellite".into(), with_mode(&movers, CoopMode::Off)),
                    ("hybrid".into(), with_mode(&movers, CoopMode::AllPairs)),
                    ("hybrid_static".into(), with_mode(&movers, CoopMode::AllPairs).with_static_user()),
                ]
            }
            Self::ReferenceStation => {
                let mut rovers = without_station(base);
                rovers.users.truncate(4);
                let station = base
                    .station_index()
                    .map(|i| base.users[i].clone())
                    .unwrap_or_else(|| UserSpec::reference_station("station", [0.0, -20.0], 6.0));
                let mut with_station = rovers.clone();
                with_station.users.push(station);
                vec![
                    ("satellite".into(), with_mode(&rovers, CoopMode::Off)),
                    ("differential".into(), with_mode(&with_station, CoopMode::Off)),
                    ("differential_ranging".into(), with_mode(&with_station, CoopMode::StationLinks)),
                    ("hybrid".into(), with_mode(&with_station, CoopMode::AllPairs)),
                ]
            }
        }
    }
}

fn sise_variant(base: &ScenarioConfig, kind: SatBiasKind) -> ScenarioConfig {
    let mut c = without_station(base);
    c.users.truncate(1);
    c.coop.mode = CoopMode::Off;
    c.sat_bias_model.kind = kind;
    c
}

fn without_station(base: &ScenarioConfig) -> ScenarioConfig {
    let mut c = base.clone();
    c.users.retain(|u| !u.is_station());
    c
}

fn with_mode(base: &ScenarioConfig, mode: CoopMode) -> ScenarioConfig {
    let mut c = base.clone();
    c.coop.mode = mode;
    c
}

/// BCRB of one configuration along its noise-free truth.
pub fn scenario_bound(cfg: &ScenarioConfig) -> Result<BimSequence> {
    let scn = Scenario::build(cfg)?;
    let model = SystemModel::new(&scn, ModelSpec::from_config(cfg))?;
    bounds::bcrb(&scn, &model, BcrbOptions::default())
}

/// Bounds of every variant of a case, in variant order.
pub fn run_case(base: &ScenarioConfig, case: BoundsCase) -> Result<Vec<(String, BimSequence)>> {
    base.validate()?;
    case.variants(base)
        .into_par_iter()
        .map(|(name, cfg)| Ok((name, scenario_bound(&cfg)?)))
        .collect()
}
