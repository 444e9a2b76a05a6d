//! Run configuration: one JSON document covering every command.

use std::path::Path;

use hybridpnt::montecarlo::CampaignConfig;
use hybridpnt::scenario::config::{coop_bias_average_case, SCHEMA_VERSION};
use hybridpnt::{
    CoopFitConfig, CoopMode, DivergencePolicy, Error, FilterKind, IekfOptions, Mismatch, Result, SatBiasModel,
    ScenarioConfig,
};
use serde::{Deserialize, Serialize};

/// Named built-in configurations.
pub const PROFILES: [&str; 3] = ["paper_defaults", "reference_station", "mismatch"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignOptions {
    pub filters: Vec<FilterKind>,
    pub trials: usize,
    /// Keep every n-th epoch in the exported logs.
    pub decimation: usize,
    pub mismatch: Option<Mismatch>,
    pub divergence_policy: DivergencePolicy,
    pub iekf: IekfOptions,
}

impl Default for CampaignOptions {
    fn default() -> Self {
        Self {
            filters: FilterKind::ALL.to_vec(),
            trials: 100,
            decimation: 10,
            mismatch: None,
            divergence_policy: DivergencePolicy::Include,
            iekf: IekfOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub coop_fit: CoopFitConfig,
    pub campaign: CampaignOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::paper_defaults()
    }
}

fn prefixed(prefix: &str, e: Error) -> Error {
    match e {
        Error::Config { path, reason } => Error::Config {
            path: format!("{prefix}.{path}"),
            reason,
        },
        other => other,
    }
}

impl RunConfig {
    pub fn paper_defaults() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 1,
            scenario: ScenarioConfig::paper_defaults(),
            coop_fit: CoopFitConfig::default(),
            campaign: CampaignOptions::default(),
        }
    }

    pub fn profile(name: &str) -> Result<Self> {
        let mut c = Self::paper_defaults();
        match name {
            "paper_defaults" => {}
            "reference_station" => {
                c.scenario = ScenarioConfig::reference_station(CoopMode::AllPairs, true);
                c.campaign.filters = vec![FilterKind::Iekf];
            }
            "mismatch" => {
                c.campaign.filters = vec![FilterKind::Iekf];
                c.campaign.mismatch = Some(Mismatch {
                    truth_sat_bias: SatBiasModel::average_case(c.scenario.sat_bias_model.kind),
                    truth_coop_bias: coop_bias_average_case(),
                });
            }
            other => {
                return Err(Error::Config {
                    path: "profile".into(),
                    reason: format!("unknown profile `{other}` (expected one of {})", PROFILES.join(", ")),
                })
            }
        }
        Ok(c)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config {
            path: format!("line {} column {}", e.line(), e.column()),
            reason: e.to_string(),
        })?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config {
                path: "schema_version".into(),
                reason: format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            });
        }
        self.scenario.validate().map_err(|e| prefixed("scenario", e))?;
        self.coop_fit.validate().map_err(|e| prefixed("coop_fit", e))?;
        self.campaign_config().validate().map_err(|e| match e {
            Error::Config { path, reason } if !path.starts_with("scenario") => Error::Config {
                path: format!("campaign.{path}"),
                reason,
            },
            other => prefixed("scenario", other),
        })
    }

    pub fn campaign_config(&self) -> CampaignConfig {
        let o = &self.campaign;
        let mut c = CampaignConfig::new(self.scenario.clone(), o.filters.clone(), o.trials, self.seed);
        c.decimation = o.decimation;
        c.mismatch = o.mismatch;
        c.divergence_policy = o.divergence_policy;
        c.iekf = o.iekf;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_validate_and_round_trip() {
        for p in PROFILES {
            let c = RunConfig::profile(p).unwrap();
            c.validate().unwrap();
            assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
        }
        assert!(RunConfig::profile("nope").is_err());
    }

    #[test]
    fn partial_document_takes_defaults() {
        let c = RunConfig::from_json(r#"{"seed": 9}"#).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.scenario, ScenarioConfig::paper_defaults());
    }

    #[test]
    fn field_paths_are_prefixed() {
        let mut c = RunConfig::paper_defaults();
        c.scenario.users[2].antenna_height = -1.0;
        match c.validate() {
            Err(Error::Config { path, .. }) => assert_eq!(path, "scenario.users[2].antenna_height"),
            other => panic!("unexpected {other:?}"),
        }
        let mut c = RunConfig::paper_defaults();
        c.campaign.trials = 0;
        match c.validate() {
            Err(Error::Config { path, .. }) => assert_eq!(path, "campaign.trials"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
