//! Error models, augmented-state filters and Bayesian bounds for hybrid
//! satellite and cooperative positioning on the lunar surface.

pub mod consts;
pub mod bounds;
pub mod cases;
pub mod coopfit;
pub mod error;
pub mod export;
pub mod filters;
pub mod gmp;
pub mod linalg;
pub mod montecarlo;
pub mod rng;
pub mod scenario;
pub mod statespace;
pub mod tworay;

pub use error::{Error, Result};
pub use bounds::{bcrb, BcrbOptions, BimSequence};
pub use cases::BoundsCase;
pub use coopfit::{fit_coop_model, CoopFitConfig, CoopFitReport};
pub use filters::{FilterKind, IekfOptions};
pub use gmp::{Gmp1Params, SatBiasKind, SatBiasModel};
pub use montecarlo::{run_campaign, CampaignConfig, CampaignResult, DivergencePolicy, Mismatch};
pub use scenario::{CoopMode, Scenario, ScenarioConfig};
pub use statespace::{ModelSpec, SystemModel};
