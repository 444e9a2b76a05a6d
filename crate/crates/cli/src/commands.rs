//! The four commands. Each validates its configuration before touching the
//! output directory and finishes by writing a manifest.

use std::path::{Path, PathBuf};

use hybridpnt::export::{self, CampaignRow, PebRow};
use hybridpnt::gmp::{self, Gmp1Params};
use hybridpnt::montecarlo::{self, CampaignSetup};
use hybridpnt::rng::TrialStreams;
use hybridpnt::statespace::{self, TruthOptions};
use hybridpnt::{cases, tworay, BimSequence, BoundsCase, CampaignResult, CoopFitReport, Error, Result, Scenario};
use serde::Serialize;

use crate::checks::{self, Check};
use crate::config::RunConfig;
use crate::manifest::RunManifest;
use crate::plot::{series_from_csv, Chart};

/// Inputs shared by every command.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: RunConfig,
    pub config_path: Option<PathBuf>,
    pub profile: Option<String>,
    pub out: PathBuf,
}

fn create_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))
}

fn height_tag(h: f64) -> String {
    format!("{h}").replace('.', "p")
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        create_dir(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<PathBuf> {
        let p = self.path(name);
        export::write_csv(&p, rows)?;
        Ok(p)
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let p = self.path(name);
        export::write_json(&p, v)
    }

    fn svg(&mut self, name: &str, chart: &Chart) -> Result<()> {
        let p = self.path(name);
        chart.write(&p)
    }

    fn finish(self, ctx: &Context, command: &str, started: chrono::DateTime<chrono::Utc>) -> Result<()> {
        let m = RunManifest::new(ctx, command, started, self.files);
        export::write_json(&self.dir.join(crate::manifest::MANIFEST_FILE), &m)
    }
}

#[derive(Debug, Clone, Serialize)]
struct PairRecord {
    h_tx: f64,
    h_rx: f64,
    fit: Option<Gmp1Params>,
}

#[derive(Debug, Clone, Serialize)]
struct FitCoopRecord {
    pairs: Vec<PairRecord>,
    average: Option<Gmp1Params>,
    worst: Option<Gmp1Params>,
    warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct FitCoopOutput {
    pub report: CoopFitReport,
    pub checks: Vec<Check>,
}

/// Bias sweep, ACF fit and average/worst-case combination.
pub fn cmd_fit_coop(ctx: &Context) -> Result<FitCoopOutput> {
    ctx.config.validate()?;
    let started = chrono::Utc::now();
    let fc = &ctx.config.coop_fit;
    let report = hybridpnt::fit_coop_model(fc)?;
    let grid = tworay::log_grid(fc.curve_start, fc.curve_end, fc.curve_points);
    let curves = report
        .pairs
        .iter()
        .map(|p| tworay::simulate_bias_curve(p.h_tx, p.h_rx, &grid, &fc.ofdm, fc.reflection()))
        .collect::<Result<Vec<_>>>()?;

    let mut out = Outputs::new(&ctx.out)?;
    let mut bias_chart = Chart::new("Multipath bias of the delay estimator", "horizontal distance (m)", "bias (m)");
    let mut acf_chart = Chart::new("Bias ACF: windowed sample and fit", "lag (m)", "ACF (m^2)");
    for (p, curve) in report.pairs.iter().zip(&curves) {
        let tag = format!("tx{}_rx{}", height_tag(p.h_tx), height_tag(p.h_rx));
        let label = format!("h_tx {} m, h_rx {} m", p.h_tx, p.h_rx);
        let path = out.csv(&format!("bias_curve_{tag}.csv"), &export::bias_curve_rows(curve))?;
        bias_chart = bias_chart.with(series_from_csv(&path, "d_h_m", "bias_m", None, label.clone())?);
        let fit = p.fit;
        let acf = export::acf_rows(&p.raw_acf, &p.windowed_acf, |lag| {
            fit.map(|f| gmp::gmp1_acf(&f, lag)).unwrap_or(0.0)
        });
        let path = out.csv(&format!("acf_{tag}.csv"), &acf)?;
        acf_chart = acf_chart
            .with(series_from_csv(&path, "lag", "acf_windowed", None, label.clone())?)
            .with(series_from_csv(&path, "lag", "acf_model", None, format!("{label} fit"))?.dashed());
        out.csv(&format!("psd_{tag}.csv"), &export::psd_rows(&p.raw_acf, &p.windowed_acf, 512))?;
    }
    out.svg("bias_curves.svg", &bias_chart)?;
    out.svg("acf.svg", &acf_chart)?;
    let record = FitCoopRecord {
        pairs: report
            .pairs
            .iter()
            .map(|p| PairRecord {
                h_tx: p.h_tx,
                h_rx: p.h_rx,
                fit: p.fit,
            })
            .collect(),
        average: report.combined.map(|c| c.average),
        worst: report.combined.map(|c| c.worst),
        warnings: report.warnings.clone(),
    };
    out.json("coop_fit.json", &record)?;
    out.finish(ctx, "fit-coop", started)?;
    let checks = match &report.combined {
        Some(c) => checks::coop_parameters(c),
        None => vec![Check {
            name: "parameters produced".into(),
            pass: false,
            detail: "no cooperative bias model".into(),
        }],
    };
    Ok(FitCoopOutput { report, checks })
}

#[derive(Debug, Clone)]
pub struct BoundsOutput {
    pub results: Vec<(BoundsCase, Vec<(String, BimSequence)>)>,
    pub checks: Vec<Check>,
}

/// PEB curves of the requested case studies.
pub fn cmd_bounds(ctx: &Context, cases_to_run: &[BoundsCase]) -> Result<BoundsOutput> {
    ctx.config.validate()?;
    let started = chrono::Utc::now();
    let base = &ctx.config.scenario;
    let mut results = Vec::new();
    let mut all_checks = Vec::new();
    for &case in cases_to_run {
        let r = cases::run_case(base, case)?;
        all_checks.extend(checks::case_orderings(case, &r).into_iter().map(|mut c| {
            c.name = format!("{}: {}", case.tag(), c.name);
            c
        }));
        results.push((case, r));
    }

    let mut out = Outputs::new(&ctx.out)?;
    for (case, r) in &results {
        let mut chart = Chart::new(&format!("Position error bound: {}", case.tag()), "epoch", "PEB (m)").log_y();
        for (name, b) in r {
            let path = out.csv(&format!("peb_{}_{name}.csv", case.tag()), &export::peb_rows(b))?;
            chart = chart.with(series_from_csv(&path, "epoch", "mean_peb_m", None, name.clone())?);
        }
        out.svg(&format!("peb_{}.svg", case.tag()), &chart)?;
    }
    out.json("checks.json", &all_checks)?;
    out.finish(ctx, "bounds", started)?;
    Ok(BoundsOutput {
        results,
        checks: all_checks,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FilterSummary {
    pub filter: String,
    pub divergent_trials: usize,
    pub divergence_rate: f64,
    pub mean_rmse_to_bcrb: f64,
    pub nees_in_band_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CampaignSummary {
    pub trials: usize,
    pub seed: u64,
    pub epochs: usize,
    pub gated_epochs: usize,
    pub mismatch: bool,
    pub runtime_s: f64,
    pub filters: Vec<FilterSummary>,
}

pub fn summarize(result: &CampaignResult, seed: u64, mismatch: bool) -> CampaignSummary {
    CampaignSummary {
        trials: result.trials.len(),
        seed,
        epochs: result.gated.len(),
        gated_epochs: result.gated_epochs().len(),
        mismatch,
        runtime_s: result.runtime_s,
        filters: result
            .filters
            .iter()
            .enumerate()
            .map(|(i, &k)| FilterSummary {
                filter: k.name().into(),
                divergent_trials: result.divergent_trials[i],
                divergence_rate: result.divergence_rate(k).unwrap_or(0.0),
                mean_rmse_to_bcrb: result.mean_bound_ratio(k).unwrap_or(f64::NAN),
                nees_in_band_fraction: result.nees_in_band(k).unwrap_or(0.0),
            })
            .collect(),
    }
}

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub result: CampaignResult,
    pub summary: CampaignSummary,
}

/// Monte Carlo campaign with RMSE, BCRB overlay and trial-0 logs.
pub fn cmd_simulate(ctx: &Context) -> Result<SimulateOutput> {
    ctx.config.validate()?;
    let started = chrono::Utc::now();
    let cfg = ctx.config.campaign_config();
    let result = montecarlo::run_campaign(&cfg)?;
    let every = cfg.decimation;
    let logged: Vec<usize> = (0..result.gated.len()).step_by(every).collect();

    let mut out = Outputs::new(&ctx.out)?;
    let mut rows = Vec::new();
    for (i, k) in result.filters.iter().enumerate() {
        rows.extend(logged.iter().map(|&e| CampaignRow {
            epoch: e,
            filter: k.name().into(),
            rmse_m: result.rmse[i][e],
            bcrb_m: result.bcrb.peb[e],
            visible_sats: result.visible_sats[e],
        }));
    }
    let campaign_csv = out.csv("campaign.csv", &rows)?;
    let mut chart = Chart::new("Position RMSE against the BCRB", "epoch", "position error (m)").log_y();
    for k in &result.filters {
        chart = chart.with(series_from_csv(&campaign_csv, "epoch", "rmse_m", Some(("filter", k.name())), k.name())?);
    }
    let first = result.filters[0].name();
    chart = chart.with(series_from_csv(&campaign_csv, "epoch", "bcrb_m", Some(("filter", first)), "BCRB")?.dashed());
    if let Some(tb) = &result.truth_bcrb {
        let peb: Vec<PebRow> = export::peb_rows(tb).into_iter().step_by(every).collect();
        let path = out.csv("truth_bcrb.csv", &peb)?;
        chart = chart.with(series_from_csv(&path, "epoch", "mean_peb_m", None, "BCRB (truth model)")?.dashed());
    }
    out.svg("campaign.svg", &chart)?;

    // Trial 0 in detail.
    let setup = CampaignSetup::new(&cfg)?;
    let streams = TrialStreams::new(cfg.seed, 0);
    let run = statespace::simulate_truth(&setup.scenario, &setup.truth, &streams, TruthOptions::full())?;
    let obs: Vec<_> = logged.iter().map(|&e| run.observations[e].clone()).collect();
    out.csv("observations_trial0.csv", &export::observation_rows(&cfg.scenario, &obs))?;
    for (u, spec) in cfg.scenario.users.iter().enumerate() {
        let rows: Vec<_> = export::truth_rows(&setup.scenario, &setup.truth, &run, u)
            .into_iter()
            .step_by(every)
            .collect();
        out.csv(&format!("truth_trial0_{}.csv", spec.id), &rows)?;
    }
    for (kind, model) in &setup.models {
        let mut rows = Vec::new();
        montecarlo::run_filter_logged(&setup, *kind, model, &run, &streams, cfg.iekf, Some((&mut rows, every)));
        out.csv(&format!("estimates_trial0_{}.csv", kind.name()), &rows)?;
    }

    let summary = summarize(&result, cfg.seed, cfg.mismatch.is_some());
    out.json("summary.json", &summary)?;
    out.finish(ctx, "simulate", started)?;
    Ok(SimulateOutput { result, summary })
}

#[derive(Debug, Clone)]
pub struct LinkBudgetOutput {
    pub scenario: Scenario,
}

/// Per-satellite elevation, C/N0 and tracking noise, plus visibility counts.
pub fn cmd_link_budget(ctx: &Context) -> Result<LinkBudgetOutput> {
    ctx.config.validate()?;
    let started = chrono::Utc::now();
    let scenario = Scenario::build(&ctx.config.scenario)?;
    let mut out = Outputs::new(&ctx.out)?;
    let rows: Vec<_> = export::link_budget_rows(&scenario).into_iter().filter(|r| r.visible).collect();
    let lb = out.csv("link_budget.csv", &rows)?;
    let vis = out.csv("visibility.csv", &export::visibility_rows(&scenario))?;
    out.svg(
        "visibility.svg",
        &Chart::new("Visible satellites", "time (s)", "count").with(series_from_csv(&vis, "t", "visible_sats", None, "visible")?),
    )?;
    let gap = 1.5 * ctx.config.scenario.step;
    let mut cn0 = Chart::new("Carrier-to-noise density", "time (s)", "C/N0 (dB-Hz)");
    for s in &ctx.config.scenario.satellites {
        cn0 = cn0.with(series_from_csv(&lb, "t", "cn0_dbhz", Some(("sat", s.id.as_str())), s.id.clone())?.max_gap(gap));
    }
    out.svg("cn0.svg", &cn0)?;
    out.finish(ctx, "link-budget", started)?;
    Ok(LinkBudgetOutput { scenario })
}
