//! User kinds and waypoint trajectories.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::clock::ClockModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserKind {
    MovingRover,
    StaticUser,
    ReferenceStation,
}

/// One surface user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSpec {
    pub id: String,
    pub kind: UserKind,
    /// East/north start point (m); the up coordinate is the antenna height.
    pub initial_position: [f64; 2],
    #[serde(default)]
    pub waypoints: Vec<[f64; 2]>,
    /// Return to the start after the last waypoint and repeat.
    #[serde(default)]
    pub closed: bool,
    #[serde(default = "default_speed")]
    pub speed: f64,
    #[serde(default = "default_height")]
    pub antenna_height: f64,
    /// White acceleration noise density (m/s^1.5).
    #[serde(default = "default_velocity_noise")]
    pub velocity_noise: f64,
    #[serde(default)]
    pub clock: ClockModel,
    /// Reference stations only: whether the station tracks the satellites.
    #[serde(default = "default_true")]
    pub observes_satellites: bool,
}

fn default_speed() -> f64 {
    1.0
}
fn default_height() -> f64 {
    1.0
}
fn default_velocity_noise() -> f64 {
    0.001
}
fn default_true() -> bool {
    true
}

impl UserSpec {
    pub fn rover(id: &str, start: [f64; 2], waypoints: Vec<[f64; 2]>, antenna_height: f64) -> Self {
        Self {
            id: id.into(),
            kind: UserKind::MovingRover,
            initial_position: start,
            waypoints,
            closed: true,
            speed: default_speed(),
            antenna_height,
            velocity_noise: default_velocity_noise(),
            clock: ClockModel::ocxo(),
            observes_satellites: true,
        }
    }

    pub fn static_user(id: &str, at: [f64; 2], antenna_height: f64) -> Self {
        Self {
            kind: UserKind::StaticUser,
            waypoints: Vec::new(),
            closed: false,
            velocity_noise: 0.0,
            ..Self::rover(id, at, Vec::new(), antenna_height)
        }
    }

    pub fn reference_station(id: &str, at: [f64; 2], antenna_height: f64) -> Self {
        Self {
            kind: UserKind::ReferenceStation,
            clock: ClockModel::rubidium(),
            ..Self::static_user(id, at, antenna_height)
        }
    }

    pub fn is_moving(&self) -> bool {
        self.kind == UserKind::MovingRover
    }

    pub fn is_station(&self) -> bool {
        self.kind == UserKind::ReferenceStation
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.antenna_height > 0.0) {
            return Err(Error::config(format!("{path}.antenna_height"), "must be positive"));
        }
        if self.is_moving() {
            if !(self.speed > 0.0) {
                return Err(Error::config(format!("{path}.speed"), "must be positive"));
            }
            if self.waypoints.is_empty() {
                return Err(Error::config(format!("{path}.waypoints"), "a moving rover needs waypoints"));
            }
        }
        if !(self.velocity_noise >= 0.0) {
            return Err(Error::config(format!("{path}.velocity_noise"), "must be non-negative"));
        }
        self.clock
            .validate()
            .map_err(|_| Error::config(format!("{path}.clock"), "noise coefficients must be non-negative"))
    }

    fn vertices(&self) -> Vec<Vector3<f64>> {
        let z = self.antenna_height;
        let mut v = vec![Vector3::new(self.initial_position[0], self.initial_position[1], z)];
        v.extend(self.waypoints.iter().map(|w| Vector3::new(w[0], w[1], z)));
        if self.closed && v.len() > 1 {
            v.push(v[0]);
        }
        v
    }

    /// Nominal position after travelling for `t` seconds.
    pub fn nominal_position(&self, t: f64) -> Vector3<f64> {
        let v = self.vertices();
        if !self.is_moving() || v.len() == 1 {
            return v[0];
        }
        let seg: Vec<f64> = v.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
        let total: f64 = seg.iter().sum();
        if total == 0.0 {
            return v[0];
        }
        let mut s = self.speed * t.max(0.0);
        if self.closed {
            s = s.rem_euclid(total);
        } else if s >= total {
            return *v.last().unwrap();
        }
        for (i, &len) in seg.iter().enumerate() {
            if s <= len {
                return if len > 0.0 { v[i] + (v[i + 1] - v[i]) * (s / len) } else { v[i] };
            }
            s -= len;
        }
        *v.last().unwrap()
    }

    /// Length of one pass over the path (m).
    pub fn path_length(&self) -> f64 {
        self.vertices().windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}

/// Nominal per-epoch kinematics of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub positions: Vec<Vector3<f64>>,
    pub velocities: Vec<Vector3<f64>>,
    /// Velocity increment applied between epoch `k−1` and `k` (zero at `k = 0`).
    pub controls: Vec<Vector3<f64>>,
}

/// Samples a user path at `n_epochs` epochs spaced by `step`.
///
/// Velocity at epoch `k` is the chord to epoch `k+1`, so `p_{k+1} = p_k + T v_k`
/// holds exactly and the controls reproduce the path under the
/// constant-velocity transition.
pub fn generate_trajectory(spec: &UserSpec, step: f64, n_epochs: usize) -> Result<Trajectory> {
    if !(step > 0.0) {
        return Err(Error::domain("trajectory step must be positive"));
    }
    let positions: Vec<Vector3<f64>> = (0..=n_epochs).map(|k| spec.nominal_position(k as f64 * step)).collect();
    let velocities: Vec<Vector3<f64>> = if spec.is_moving() {
        positions.windows(2).map(|w| (w[1] - w[0]) / step).collect()
    } else {
        vec![Vector3::zeros(); n_epochs]
    };
    let controls = (0..n_epochs)
        .map(|k| if k == 0 { Vector3::zeros() } else { velocities[k] - velocities[k - 1] })
        .collect();
    let mut positions = positions;
    positions.truncate(n_epochs);
    Ok(Trajectory {
        positions,
        velocities,
        controls,
    })
}
