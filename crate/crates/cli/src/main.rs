use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hybridpnt::{BoundsCase, Error, Result};
use hybridpnt_cli::checks::{all_pass, Check};
use hybridpnt_cli::{exit, exit_code, Context, RunConfig};

#[derive(Parser)]
#[command(name = "hybridpnt", version, about = "Hybrid lunar PNT simulator: bias models, bounds and filter campaigns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long, conflicts_with = "profile")]
    config: Option<PathBuf>,
    /// Built-in configuration (paper_defaults, reference_station, mismatch).
    #[arg(long)]
    profile: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Exit with status 4 when a built-in check fails.
    #[arg(long)]
    check: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the cooperative bias model from simulated two-ray bias curves.
    FitCoop(Common),
    /// Position error bounds of the case studies.
    Bounds {
        #[command(flatten)]
        common: Common,
        /// sise_models, sat_vs_hybrid or reference_station; all when omitted.
        #[arg(long)]
        case: Option<String>,
    },
    /// Monte Carlo filter campaign with BCRB overlay.
    Simulate(Common),
    /// Elevation, C/N0 and tracking-noise time series.
    LinkBudget(Common),
    /// Print the resolved configuration as JSON.
    PrintConfig(Common),
}

fn context(c: &Common, command: &str) -> Result<Context> {
    let (mut config, profile) = match (&c.config, &c.profile) {
        (Some(p), _) => (RunConfig::load(p)?, None),
        (None, Some(name)) => (RunConfig::profile(name)?, Some(name.clone())),
        (None, None) => (RunConfig::paper_defaults(), Some("paper_defaults".to_string())),
    };
    if let Some(s) = c.seed {
        config.seed = s;
    }
    if let Some(t) = c.trials {
        config.campaign.trials = t;
    }
    config.validate()?;
    Ok(Context {
        config,
        config_path: c.config.clone(),
        profile,
        out: c.out.clone().unwrap_or_else(|| PathBuf::from("out").join(command)),
    })
}

fn report(checks: &[Check]) -> bool {
    for c in checks {
        println!("[{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    all_pass(checks)
}

fn run(cli: Cli) -> Result<i32> {
    let (common, checks) = match cli.command {
        Command::FitCoop(c) => {
            let ctx = context(&c, "fit-coop")?;
            let r = hybridpnt_cli::cmd_fit_coop(&ctx)?;
            for w in &r.report.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(p) = r.report.combined {
                println!("average: tau {:.3} s, sigma {:.4} m", p.average.tau, p.average.sigma());
                println!("worst:   tau {:.3} s, sigma {:.4} m", p.worst.tau, p.worst.sigma());
            }
            (c, r.checks)
        }
        Command::Bounds { common, case } => {
            let ctx = context(&common, "bounds")?;
            let cases = match case {
                Some(tag) => vec![BoundsCase::from_tag(&tag)?],
                None => BoundsCase::ALL.to_vec(),
            };
            let r = hybridpnt_cli::cmd_bounds(&ctx, &cases)?;
            for (case, curves) in &r.results {
                for (name, b) in curves {
                    println!("{} {name}: final PEB {:.3} m", case.tag(), b.peb.last().copied().unwrap_or(f64::NAN));
                }
            }
            (common, r.checks)
        }
        Command::Simulate(c) => {
            let ctx = context(&c, "simulate")?;
            let r = hybridpnt_cli::cmd_simulate(&ctx)?;
            for f in &r.summary.filters {
                println!(
                    "{:9} divergent {:3}/{}  RMSE/BCRB {:.3}  NEES in band {:.1}%",
                    f.filter,
                    f.divergent_trials,
                    r.summary.trials,
                    f.mean_rmse_to_bcrb,
                    100.0 * f.nees_in_band_fraction
                );
            }
            (c, Vec::new())
        }
        Command::LinkBudget(c) => {
            let ctx = context(&c, "link-budget")?;
            let r = hybridpnt_cli::cmd_link_budget(&ctx)?;
            let counts: Vec<usize> = (0..r.scenario.n_epochs).map(|k| r.scenario.visible_count(k)).collect();
            println!(
                "visible satellites: min {} max {}",
                counts.iter().min().unwrap_or(&0),
                counts.iter().max().unwrap_or(&0)
            );
            (c, Vec::new())
        }
        Command::PrintConfig(c) => {
            let ctx = context(&c, "print-config")?;
            println!("{}", ctx.config.to_json());
            (c, Vec::new())
        }
    };
    let passed = report(&checks);
    Ok(if common.check && !passed { exit::CHECK_FAILED } else { exit::SUCCESS })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match &e {
                Error::Config { .. } => exit::CONFIG,
                other => exit_code(other),
            };
            ExitCode::from(code as u8)
        }
    }
}
