//! Provenance record written next to every command's outputs.

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::commands::Context;
use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub profile: Option<String>,
    /// Fully resolved configuration, including command-line overrides.
    pub config: RunConfig,
    pub seed: u64,
    pub tool_version: String,
    pub out_dir: String,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(ctx: &Context, command: &str, started: DateTime<Utc>, outputs: Vec<String>) -> Self {
        let stamp = |t: DateTime<Utc>| t.to_rfc3339_opts(SecondsFormat::Millis, true);
        Self {
            command: command.into(),
            config_path: ctx.config_path.as_ref().map(|p| p.display().to_string()),
            profile: ctx.profile.clone(),
            config: ctx.config.clone(),
            seed: ctx.config.seed,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            out_dir: ctx.out.display().to_string(),
            started_at: stamp(started),
            finished_at: stamp(Utc::now()),
            outputs,
        }
    }
}
