//! Two-state receiver clock model.

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::consts::SPEED_OF_LIGHT;
use crate::error::{Error, Result};
use crate::gmp;

/// Clock noise coefficients and initial state.
///
/// `sigma_c1` (s) and `sigma_c2` (1/s) are diffusion coefficients that enter
/// the covariance linearly, `Q = c²·[[c1·T + c2·T³/3, c2·T²/2], [c2·T²/2, c2·T]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClockModel {
    pub sigma_c1: f64,
    pub sigma_c2: f64,
    /// Initial offset (s).
    pub initial_offset: f64,
    /// Initial drift (s/s).
    pub initial_drift: f64,
}

impl Default for ClockModel {
    fn default() -> Self {
        Self::ocxo()
    }
}

impl ClockModel {
    /// Space-grade OCXO.
    pub fn ocxo() -> Self {
        Self {
            sigma_c1: 2.52e-23,
            sigma_c2: 3.03e-24,
            initial_offset: 0.0,
            initial_drift: 0.0,
        }
    }

    /// Rubidium standard.
    pub fn rubidium() -> Self {
        Self {
            sigma_c1: 1.22e-23,
            sigma_c2: 6.21e-28,
            ..Self::ocxo()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_c1 >= 0.0 && self.sigma_c2 >= 0.0) {
            return Err(Error::config("clock", "noise coefficients must be non-negative"));
        }
        Ok(())
    }

    /// Initial state `(cδ, cδ̇)` in metres and metres per second.
    pub fn initial_state(&self) -> Vector2<f64> {
        SPEED_OF_LIGHT * Vector2::new(self.initial_offset, self.initial_drift)
    }
}

pub fn clock_transition(step: f64) -> Matrix2<f64> {
    Matrix2::new(1.0, step, 0.0, 1.0)
}

/// Clock process noise in metres.
pub fn clock_noise(model: &ClockModel, step: f64) -> Matrix2<f64> {
    let (q1, q2) = (model.sigma_c1, model.sigma_c2);
    let c2 = SPEED_OF_LIGHT * SPEED_OF_LIGHT;
    c2 * Matrix2::new(
        q1 * step + q2 * step.powi(3) / 3.0,
        q2 * step * step / 2.0,
        q2 * step * step / 2.0,
        q2 * step,
    )
}

/// One clock propagation step.
pub fn clock_step<R: Rng + ?Sized>(
    model: &ClockModel,
    state: &Vector2<f64>,
    step: f64,
    rng: &mut R,
) -> Result<Vector2<f64>> {
    if !(step > 0.0) {
        return Err(Error::domain("clock step must be positive"));
    }
    gmp::process_step(&clock_transition(step), &clock_noise(model, step), state, rng)
}
