//! Scenario configuration document and shipped presets.

use serde::{Deserialize, Serialize};

use super::clock::ClockModel;
use super::link::LinkBudget;
use super::orbit::{default_constellation, KeplerianElements};
use super::site::Site;
use super::trajectory::{UserKind, UserSpec};
use crate::consts::SPEED_OF_LIGHT;
use crate::error::{Error, Result};
use crate::gmp::{Gmp1Params, SatBiasKind, SatBiasModel};
use crate::tworay::{GroundPermittivity, OfdmConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatelliteSpec {
    pub id: String,
    pub elements: KeplerianElements,
    /// Carried for completeness; satellite clock error is part of the SISE bias.
    #[serde(default)]
    pub clock: ClockModel,
}

/// Which surface pairs exchange ranging signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoopMode {
    /// Satellite observations only.
    Off,
    /// Only links between the reference station and the other users.
    StationLinks,
    /// Every pair of users, including the station.
    AllPairs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoopConfig {
    pub mode: CoopMode,
    pub ofdm: OfdmConfig,
    pub permittivity: GroundPermittivity,
    /// Links longer than this are not measured (m).
    pub max_range: f64,
}

impl Default for CoopConfig {
    fn default() -> Self {
        Self {
            mode: CoopMode::AllPairs,
            ofdm: OfdmConfig::default(),
            permittivity: GroundPermittivity::default(),
            max_range: 1000.0,
        }
    }
}

/// Prior standard deviations of the user states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Priors {
    pub position: f64,
    pub velocity: f64,
    /// Clock offset (s).
    pub clock_offset: f64,
    /// Clock drift (s/s).
    pub clock_drift: f64,
}

impl Default for Priors {
    fn default() -> Self {
        Self {
            position: 1000.0,
            velocity: 10.0,
            clock_offset: 5e-6,
            clock_drift: 100e-9,
        }
    }
}

impl Priors {
    /// Variances in state units: m², (m/s)², m², (m/s)².
    pub fn variances(&self) -> [f64; 4] {
        [
            self.position.powi(2),
            self.velocity.powi(2),
            (SPEED_OF_LIGHT * self.clock_offset).powi(2),
            (SPEED_OF_LIGHT * self.clock_drift).powi(2),
        ]
    }
}

/// Covariance assigned to bias states at the start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PriorBias {
    /// Stationary covariance of the bias process.
    #[default]
    Stationary,
    /// One-step process noise covariance.
    OneStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub satellites: Vec<SatelliteSpec>,
    pub users: Vec<UserSpec>,
    #[serde(default)]
    pub site: Site,
    #[serde(default)]
    pub link_budget: LinkBudget,
    pub sat_bias_model: SatBiasModel,
    /// Time-domain GMP-1 of the cooperative pseudorange bias.
    pub coop_bias: Gmp1Params,
    #[serde(default)]
    pub coop: CoopConfig,
    /// Epoch spacing (s).
    pub step: f64,
    pub duration: f64,
    /// Seconds after the orbit epoch at which the window starts.
    #[serde(default)]
    pub start_time: f64,
    #[serde(default)]
    pub priors: Priors,
    #[serde(default)]
    pub prior_bias: PriorBias,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

/// Cooperative bias GMP-1 parameters from the fitting pipeline.
pub fn coop_bias_worst_case() -> Gmp1Params {
    Gmp1Params::time(8.8, 0.62 * 0.62).expect("valid constants")
}

pub fn coop_bias_average_case() -> Gmp1Params {
    Gmp1Params::time(5.5, 0.22 * 0.22).expect("valid constants")
}

/// Start of the default 2 h window, chosen around visibility transitions.
pub const DEFAULT_START: f64 = 31_500.0;

fn default_rovers() -> Vec<UserSpec> {
    vec![
        UserSpec::rover("rover1", [0.0, 0.0], vec![[200.0, 0.0], [200.0, 200.0], [0.0, 200.0]], 1.0),
        UserSpec::rover("rover2", [-150.0, 50.0], vec![[-150.0, 250.0], [-300.0, 250.0], [-300.0, 50.0]], 2.0),
        UserSpec::rover("rover3", [50.0, -100.0], vec![[250.0, -250.0], [0.0, -300.0]], 1.0),
        UserSpec::rover("rover4", [-100.0, -100.0], vec![[-250.0, -100.0], [-250.0, -300.0], [-100.0, -300.0]], 2.0),
        UserSpec::rover("rover5", [100.0, 100.0], vec![[150.0, 300.0], [300.0, 150.0]], 1.5),
    ]
}

impl ScenarioConfig {
    /// Five moving rovers, hybrid ranging, worst-case bias parameters, 2 h window.
    pub fn paper_defaults() -> Self {
        let satellites = default_constellation()
            .into_iter()
            .enumerate()
            .map(|(i, elements)| SatelliteSpec {
                id: format!("sat{}", i + 1),
                elements,
                clock: ClockModel::rubidium(),
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            satellites,
            users: default_rovers(),
            site: Site::default(),
            link_budget: LinkBudget::default(),
            sat_bias_model: SatBiasModel::worst_case(SatBiasKind::Gmp1),
            coop_bias: coop_bias_worst_case(),
            coop: CoopConfig::default(),
            step: 1.0,
            duration: 7200.0,
            start_time: DEFAULT_START,
            priors: Priors::default(),
            prior_bias: PriorBias::Stationary,
        }
    }

    /// One rover with satellite observations only.
    pub fn single_user(kind: SatBiasKind) -> Self {
        let mut c = Self::paper_defaults();
        c.users.truncate(1);
        c.coop.mode = CoopMode::Off;
        c.sat_bias_model = SatBiasModel::worst_case(kind);
        c
    }

    /// The last rover is parked at its start point.
    pub fn with_static_user(mut self) -> Self {
        if let Some(u) = self.users.last_mut() {
            *u = UserSpec::static_user(&u.id, u.initial_position, u.antenna_height);
        }
        self
    }

    /// Four rovers plus a reference station with a 6 m mast.
    pub fn reference_station(mode: CoopMode, station_observes_satellites: bool) -> Self {
        let mut c = Self::paper_defaults();
        c.users.truncate(4);
        let mut station = UserSpec::reference_station("station", [0.0, -20.0], 6.0);
        station.observes_satellites = station_observes_satellites;
        c.users.push(station);
        c.coop.mode = mode;
        c
    }

    pub fn n_epochs(&self) -> usize {
        (self.duration / self.step).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if !(self.step > 0.0) {
            return Err(Error::config("step", "must be positive"));
        }
        let n = self.duration / self.step;
        if !(self.duration > 0.0) || (n - n.round()).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::config("duration", "must be a positive multiple of step"));
        }
        if self.users.is_empty() {
            return Err(Error::config("users", "at least one user is required"));
        }
        if self.users.iter().filter(|u| u.kind == UserKind::ReferenceStation).count() > 1 {
            return Err(Error::config("users", "at most one reference station is supported"));
        }
        for (i, u) in self.users.iter().enumerate() {
            u.validate(&format!("users[{i}]"))?;
            if self.users[..i].iter().any(|o| o.id == u.id) {
                return Err(Error::config(format!("users[{i}].id"), format!("duplicate id {:?}", u.id)));
            }
        }
        for (i, s) in self.satellites.iter().enumerate() {
            s.elements
                .validate()
                .map_err(|e| Error::config(format!("satellites[{i}].elements"), e.to_string()))?;
        }
        self.link_budget
            .validate()
            .map_err(|e| Error::config("link_budget", e.to_string()))?;
        self.sat_bias_model.validate()?;
        if !(self.coop_bias.tau > 0.0 && self.coop_bias.sigma2 >= 0.0) {
            return Err(Error::config("coop_bias", "tau must be positive and sigma2 non-negative"));
        }
        if self.coop_bias.domain != crate::gmp::Domain::Time {
            return Err(Error::config("coop_bias.domain", "must be the time domain"));
        }
        self.coop
            .ofdm
            .validate()
            .map_err(|e| Error::config("coop.ofdm", e.to_string()))?;
        if !(self.coop.max_range > 0.0) {
            return Err(Error::config("coop.max_range", "must be positive"));
        }
        let p = &self.priors;
        if !(p.position > 0.0 && p.velocity > 0.0 && p.clock_offset > 0.0 && p.clock_drift > 0.0) {
            return Err(Error::config("priors", "all prior standard deviations must be positive"));
        }
        Ok(())
    }

    pub fn station_index(&self) -> Option<usize> {
        self.users.iter().position(|u| u.is_station())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| {
            Error::config(format!("line {} column {}", e.line(), e.column()), e.to_string())
        })?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
