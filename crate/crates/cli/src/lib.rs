//! Command implementations behind the `hybridpnt` binary.

pub mod checks;
pub mod commands;
pub mod config;
pub mod manifest;
pub mod plot;

pub use commands::{cmd_bounds, cmd_fit_coop, cmd_link_budget, cmd_simulate, Context};
pub use config::RunConfig;
pub use manifest::RunManifest;

use hybridpnt::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const CHECK_FAILED: i32 = 4;
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } => exit::CONFIG,
        _ => exit::NUMERICAL,
    }
}
