//! Satellite link budget and tracking-loop thermal noise.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::consts::{BOLTZMANN, SPEED_OF_LIGHT};
use crate::error::{Error, Result};

/// Satellite signal, receiver and tracking-loop parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkBudget {
    /// Satellite EIRP (dBW).
    pub eirp_dbw: f64,
    /// Receive antenna gain at zenith (dBi).
    pub zenith_gain_dbi: f64,
    /// Gain loss towards the horizon: `G(el) = G_zenith − rolloff · cos(el)` (dB).
    pub gain_rolloff_db: f64,
    /// Receiver system noise temperature (K).
    pub system_temperature: f64,
    /// Elevation mask (rad).
    pub elevation_mask: f64,
    /// Satellite carrier frequency (Hz).
    pub carrier_freq: f64,
    /// Code chip rate (chip/s).
    pub chip_rate: f64,
    pub dll_bandwidth: f64,
    pub fll_bandwidth: f64,
    /// Coherent integration time (s).
    pub coherent_integration: f64,
    /// Early-late correlator spacing (chips).
    pub early_late_spacing: f64,
    /// Physical clamp on C/N0 (dB-Hz).
    pub cn0_floor: f64,
    pub cn0_ceiling: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self {
            eirp_dbw: 13.0,
            zenith_gain_dbi: 2.89,
            gain_rolloff_db: 9.34,
            system_temperature: 290.0,
            elevation_mask: 5f64.to_radians(),
            carrier_freq: 2_492.028e6,
            chip_rate: 2.046e6,
            dll_bandwidth: 0.5,
            fll_bandwidth: 2.0,
            coherent_integration: 0.02,
            early_late_spacing: 0.25,
            cn0_floor: 20.0,
            cn0_ceiling: 60.0,
        }
    }
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("system_temperature", self.system_temperature),
            ("carrier_freq", self.carrier_freq),
            ("chip_rate", self.chip_rate),
            ("dll_bandwidth", self.dll_bandwidth),
            ("fll_bandwidth", self.fll_bandwidth),
            ("coherent_integration", self.coherent_integration),
            ("early_late_spacing", self.early_late_spacing),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("link_budget.{name}"), "must be positive"));
            }
        }
        if self.early_late_spacing >= 2.0 {
            return Err(Error::config("link_budget.early_late_spacing", "must be below 2 chips"));
        }
        if !(self.elevation_mask >= 0.0 && self.elevation_mask < PI / 2.0) {
            return Err(Error::config("link_budget.elevation_mask", "must lie in [0, pi/2)"));
        }
        if !(self.cn0_floor < self.cn0_ceiling) {
            return Err(Error::config("link_budget.cn0_floor", "must be below cn0_ceiling"));
        }
        Ok(())
    }

    pub fn receive_gain_db(&self, elevation: f64) -> f64 {
        self.zenith_gain_dbi - self.gain_rolloff_db * elevation.cos()
    }
}

/// Free-space path loss (dB).
pub fn free_space_loss_db(range: f64, freq: f64) -> f64 {
    20.0 * (4.0 * PI * range * freq / SPEED_OF_LIGHT).log10()
}

/// Unclamped C/N0 (dB-Hz).
pub fn cn0_unclamped(elevation: f64, range: f64, lb: &LinkBudget) -> f64 {
    lb.eirp_dbw - free_space_loss_db(range, lb.carrier_freq) + lb.receive_gain_db(elevation)
        - 10.0 * (BOLTZMANN * lb.system_temperature).log10()
}

/// Carrier-to-noise density ratio (dB-Hz), clamped to the configured range.
pub fn cn0(elevation: f64, range: f64, lb: &LinkBudget) -> Result<f64> {
    if !(range > 0.0) || !elevation.is_finite() {
        return Err(Error::domain(format!("invalid link geometry (el {elevation}, range {range})")));
    }
    Ok(cn0_unclamped(elevation, range, lb).clamp(lb.cn0_floor, lb.cn0_ceiling))
}

/// DLL pseudorange variance (m²) and FLL pseudorange-rate variance ((m/s)²).
///
/// The FLL term uses the carrier frequency; frequency tracking error scales
/// with the carrier wavelength, not the chip length.
pub fn dll_fll_variances(cn0_dbhz: f64, lb: &LinkBudget) -> (f64, f64) {
    let cn0 = 10f64.powf(cn0_dbhz / 10.0);
    let c2 = SPEED_OF_LIGHT * SPEED_OF_LIGHT;
    let (ti, d) = (lb.coherent_integration, lb.early_late_spacing);
    let dll = c2 / lb.chip_rate.powi(2) * lb.dll_bandwidth * d / (2.0 * cn0)
        * (1.0 + 2.0 / (ti * cn0 * (2.0 - d)));
    let fll = c2 / (4.0 * PI * PI * ti * ti * lb.carrier_freq.powi(2)) * 4.0 * lb.fll_bandwidth / cn0
        * (1.0 + 1.0 / (ti * cn0));
    (dll, fll)
}
