//! CSV records of bias curves, truth, observations, estimates and bounds.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::bounds::BimSequence;
use crate::error::{Error, Result};
use crate::gmp::AcfEstimate;
use crate::scenario::{dll_fll_variances, Scenario, ScenarioConfig};
use crate::statespace::{ObsKind, ObservationSet, SystemModel, TruthRun};
use crate::tworay::{self, BiasCurve};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasCurveRow {
    pub d_h_m: f64,
    pub bias_m: f64,
    pub bias_deriv: f64,
    pub crb_m2: f64,
    pub mse_bound_m2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcfRow {
    pub lag: f64,
    pub acf_raw: f64,
    pub acf_windowed: f64,
    pub acf_model: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsdRow {
    pub freq: f64,
    pub psd_raw: f64,
    pub psd_windowed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub cdt: f64,
    pub cdt_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservationRow {
    pub epoch: usize,
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub rx: String,
    pub tx: String,
    pub value: f64,
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRow {
    pub epoch: usize,
    pub user: String,
    pub est_x: f64,
    pub est_y: f64,
    pub est_z: f64,
    pub err_norm: f64,
    pub cov_trace_pos: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PebRow {
    pub epoch: usize,
    pub mean_peb_m: f64,
    pub visible_sats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignRow {
    pub epoch: usize,
    pub filter: String,
    pub rmse_m: f64,
    pub bcrb_m: f64,
    pub visible_sats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkBudgetRow {
    pub t: f64,
    pub sat: String,
    pub elevation_deg: f64,
    pub visible: bool,
    pub cn0_dbhz: f64,
    pub sigma_dll_m: f64,
    pub sigma_fll_mps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VisibilityRow {
    pub t: f64,
    pub visible_sats: usize,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Writes `rows` with a header taken from the record field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes any serializable value as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    let mut f = File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.write_all(b"\n"))
        .map_err(|e| io_err(path, e))
}

pub fn bias_curve_rows(curve: &BiasCurve) -> Vec<BiasCurveRow> {
    let mse = tworay::mse_bound(curve);
    (0..curve.d_h_grid.len())
        .map(|i| BiasCurveRow {
            d_h_m: curve.d_h_grid[i],
            bias_m: curve.bias[i],
            bias_deriv: curve.bias_derivative[i],
            crb_m2: curve.crb[i],
            mse_bound_m2: mse[i],
        })
        .collect()
}

/// Raw, windowed and fitted ACF on the lags of `raw`.
pub fn acf_rows(raw: &AcfEstimate, windowed: &AcfEstimate, model: impl Fn(f64) -> f64) -> Vec<AcfRow> {
    raw.lags
        .iter()
        .enumerate()
        .map(|(i, &lag)| AcfRow {
            lag,
            acf_raw: raw.acf[i],
            acf_windowed: windowed.acf.get(i).copied().unwrap_or(0.0),
            acf_model: model(lag),
        })
        .collect()
}

/// PSD of the raw and windowed ACF on `n` frequencies up to Nyquist.
pub fn psd_rows(raw: &AcfEstimate, windowed: &AcfEstimate, n: usize) -> Vec<PsdRow> {
    let nyq = 0.5 / raw.spacing();
    (0..n)
        .map(|i| {
            let f = nyq * i as f64 / (n - 1).max(1) as f64;
            PsdRow {
                freq: f,
                psd_raw: raw.psd(f),
                psd_windowed: windowed.psd(f),
            }
        })
        .collect()
}

/// Truth trajectory of one user.
pub fn truth_rows(scn: &Scenario, model: &SystemModel, run: &TruthRun, user: usize) -> Vec<TruthRow> {
    run.states
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let p = model.position(x, user);
            let v = model.velocity(x, user);
            let (cdt, cdt_rate) = model.clock(x, user);
            TruthRow {
                t: scn.time(k),
                x: p.x,
                y: p.y,
                z: p.z,
                vx: v.x,
                vy: v.y,
                vz: v.z,
                cdt,
                cdt_rate,
            }
        })
        .collect()
}

/// Observation log in canonical order; masked satellites produce no rows.
pub fn observation_rows(cfg: &ScenarioConfig, observations: &[ObservationSet]) -> Vec<ObservationRow> {
    let user = |u: usize| cfg.users[u].id.clone();
    let sat = |s: usize| cfg.satellites[s].id.clone();
    observations
        .iter()
        .flat_map(|o| {
            o.kinds.iter().enumerate().map(move |(i, kind)| {
                let (kind, rx, tx) = match *kind {
                    ObsKind::SatPr { user: u, sat: s } => ("pr", user(u), sat(s)),
                    ObsKind::SatPrr { user: u, sat: s } => ("prr", user(u), sat(s)),
                    ObsKind::CoopPr { rx, tx, .. } => ("coop_pr", user(rx), user(tx)),
                };
                ObservationRow {
                    epoch: o.epoch,
                    kind,
                    rx,
                    tx,
                    value: o.values[i],
                    sigma2: o.variances[i],
                }
            })
        })
        .collect()
}

pub fn peb_rows(b: &BimSequence) -> Vec<PebRow> {
    b.peb
        .iter()
        .zip(&b.visible_sats)
        .enumerate()
        .map(|(epoch, (&mean_peb_m, &visible_sats))| PebRow {
            epoch,
            mean_peb_m,
            visible_sats,
        })
        .collect()
}

/// Per-satellite geometry and tracking noise of every epoch.
pub fn link_budget_rows(scn: &Scenario) -> Vec<LinkBudgetRow> {
    let lb = &scn.config.link_budget;
    let mut rows = Vec::with_capacity(scn.n_epochs * scn.config.satellites.len());
    for (k, sats) in scn.sats.iter().enumerate() {
        for (j, s) in sats.iter().enumerate() {
            let (dll, fll) = dll_fll_variances(s.cn0, lb);
            rows.push(LinkBudgetRow {
                t: scn.time(k),
                sat: scn.config.satellites[j].id.clone(),
                elevation_deg: s.elevation.to_degrees(),
                visible: s.visible,
                cn0_dbhz: s.cn0,
                sigma_dll_m: dll.sqrt(),
                sigma_fll_mps: fll.sqrt(),
            });
        }
    }
    rows
}

pub fn visibility_rows(scn: &Scenario) -> Vec<VisibilityRow> {
    (0..scn.n_epochs)
        .map(|k| VisibilityRow {
            t: scn.time(k),
            visible_sats: scn.visible_count(k),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_follows_field_names() {
        let dir = std::env::temp_dir().join(format!("hybridpnt-export-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("peb.csv");
        let rows = vec![PebRow {
            epoch: 0,
            mean_peb_m: 1.5,
            visible_sats: 3,
        }];
        write_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "epoch,mean_peb_m,visible_sats\n0,1.5,3\n");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
