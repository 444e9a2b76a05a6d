//! Cooperative pseudorange bias model from simulated two-ray bias curves.
//!
//! For each transmitter/receiver height pair the ML bias is simulated on a
//! uniform horizontal-distance grid, a GMP-1 is fitted to its tapered sample
//! ACF, and the fits are combined into average- and worst-case time-domain
//! parameters over a radial speed range.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmp::{self, AcfEstimate, CombinedParams, Gmp1Params};
use crate::tworay::{self, GroundPermittivity, OfdmConfig, Reflection};

/// Inputs of the cooperative bias fitting pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoopFitConfig {
    pub ofdm: OfdmConfig,
    pub permittivity: GroundPermittivity,
    /// Overrides the ground reflection with a fixed real coefficient.
    pub fixed_reflection: Option<f64>,
    pub tx_heights: Vec<f64>,
    pub rx_heights: Vec<f64>,
    /// Horizontal-distance segment used for the fit (m).
    pub fit_start: f64,
    pub fit_end: f64,
    pub fit_step: f64,
    /// Radial speed range (m/s).
    pub v_min: f64,
    pub v_max: f64,
    /// Logarithmic horizontal-distance grid of the exported bias curves (m).
    pub curve_start: f64,
    pub curve_end: f64,
    pub curve_points: usize,
}

impl Default for CoopFitConfig {
    fn default() -> Self {
        Self {
            ofdm: OfdmConfig::default(),
            permittivity: GroundPermittivity::default(),
            fixed_reflection: None,
            tx_heights: vec![6.0, 10.0],
            rx_heights: vec![1.0, 2.0],
            fit_start: 10.0,
            fit_end: 200.0,
            fit_step: 0.1,
            v_min: 0.1,
            v_max: 1.0,
            curve_start: 1.0,
            curve_end: 1000.0,
            curve_points: 2000,
        }
    }
}

impl CoopFitConfig {
    pub fn reflection(&self) -> Reflection {
        match self.fixed_reflection {
            Some(g) => Reflection::Fixed(num_complex::Complex64::new(g, 0.0)),
            None => Reflection::Ground(self.permittivity),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ofdm.validate()?;
        if self.tx_heights.is_empty() || self.rx_heights.is_empty() {
            return Err(Error::config("tx_heights", "need at least one height pair"));
        }
        if self.tx_heights.iter().chain(&self.rx_heights).any(|&h| !(h > 0.0)) {
            return Err(Error::config("tx_heights", "heights must be positive"));
        }
        if !(self.fit_start > 0.0 && self.fit_end > self.fit_start && self.fit_step > 0.0) {
            return Err(Error::config("fit_start", "need 0 < fit_start < fit_end and fit_step > 0"));
        }
        if !(self.v_min > 0.0 && self.v_max >= self.v_min) {
            return Err(Error::config("v_min", "need 0 < v_min <= v_max"));
        }
        if !(self.curve_start > 0.0 && self.curve_end > self.curve_start && self.curve_points >= 3) {
            return Err(Error::config(
                "curve_start",
                "need 0 < curve_start < curve_end and at least 3 curve points",
            ));
        }
        Ok(())
    }

    pub fn height_pairs(&self) -> Vec<(f64, f64)> {
        self.tx_heights
            .iter()
            .flat_map(|&t| self.rx_heights.iter().map(move |&r| (t, r)))
            .collect()
    }
}

/// Fit of one height pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightPairFit {
    pub h_tx: f64,
    pub h_rx: f64,
    pub d_h: Vec<f64>,
    pub bias: Vec<f64>,
    pub fit: Option<Gmp1Params>,
    pub raw_acf: AcfEstimate,
    pub windowed_acf: AcfEstimate,
}

/// Result of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoopFitReport {
    pub pairs: Vec<HeightPairFit>,
    /// `None` when every curve is bias free.
    pub combined: Option<CombinedParams>,
    pub warnings: Vec<String>,
}

/// Below this bias amplitude (m) a curve is treated as bias free.
pub const ZERO_BIAS_LEVEL: f64 = 1e-4;

/// Runs the bias sweep, ACF fit and speed combination.
pub fn fit_coop_model(cfg: &CoopFitConfig) -> Result<CoopFitReport> {
    cfg.validate()?;
    let grid = tworay::uniform_grid(cfg.fit_start, cfg.fit_end, cfg.fit_step);
    let refl = cfg.reflection();
    let pairs: Vec<HeightPairFit> = cfg
        .height_pairs()
        .into_par_iter()
        .map(|(h_tx, h_rx)| fit_pair(cfg, refl, &grid, h_tx, h_rx))
        .collect::<Result<_>>()?;

    let mut warnings = Vec::new();
    for p in pairs.iter().filter(|p| p.fit.is_none()) {
        warnings.push(format!(
            "no multipath bias for h_tx = {} m, h_rx = {} m; pair excluded from the fit",
            p.h_tx, p.h_rx
        ));
    }
    let fits: Vec<Gmp1Params> = pairs.iter().filter_map(|p| p.fit).collect();
    let combined = if fits.is_empty() {
        warnings.push("all bias curves are zero; no cooperative bias model produced".into());
        None
    } else {
        Some(gmp::combine_distance_to_time(&fits, cfg.v_min, cfg.v_max)?)
    };
    Ok(CoopFitReport {
        pairs,
        combined,
        warnings,
    })
}

fn fit_pair(
    cfg: &CoopFitConfig,
    refl: Reflection,
    grid: &[f64],
    h_tx: f64,
    h_rx: f64,
) -> Result<HeightPairFit> {
    let bias = grid
        .iter()
        .map(|&d_h| tworay::ml_bias(&tworay::TwoRayGeometry::new(h_tx, h_rx, d_h)?, &cfg.ofdm, refl))
        .collect::<Result<Vec<f64>>>()?;
    let raw = gmp::sample_acf_on_grid(grid, &bias, gmp::Domain::Distance)?;
    let windowed = gmp::taper_acf(&raw, gmp::default_taper_support(&raw))?;
    let amplitude = bias.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    let fit = if amplitude < ZERO_BIAS_LEVEL {
        None
    } else {
        Some(gmp::fit_gmp1_acf(&windowed)?)
    };
    Ok(HeightPairFit {
        h_tx,
        h_rx,
        d_h: grid.to_vec(),
        bias,
        fit,
        raw_acf: raw,
        windowed_acf: windowed,
    })
}
