//! Two-body Keplerian orbits about the Moon.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::consts::{MOON_GM, MOON_RADIUS};
use crate::error::{Error, Result};

/// Classical orbital elements. Angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeplerianElements {
    pub semi_major_axis: f64,
    pub eccentricity: f64,
    pub inclination: f64,
    pub raan: f64,
    pub arg_periapsis: f64,
    pub mean_anomaly_epoch: f64,
    #[serde(default = "default_mu")]
    pub gravitational_parameter: f64,
}

fn default_mu() -> f64 {
    MOON_GM
}

/// Position and velocity in the Moon-centred inertial frame (m, m/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

const KEPLER_TOL: f64 = 1e-12;

impl KeplerianElements {
    /// Elliptical frozen-orbit-like elements with the given RAAN and mean anomaly (deg).
    pub fn elfo(raan_deg: f64, mean_anomaly_deg: f64) -> Self {
        Self {
            semi_major_axis: 6_540_000.0,
            eccentricity: 0.6,
            inclination: 56.2f64.to_radians(),
            raan: raan_deg.to_radians(),
            arg_periapsis: 90f64.to_radians(),
            mean_anomaly_epoch: mean_anomaly_deg.to_radians(),
            gravitational_parameter: MOON_GM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.eccentricity) {
            return Err(Error::domain(format!(
                "only elliptical orbits are supported (e = {})",
                self.eccentricity
            )));
        }
        if !(self.gravitational_parameter > 0.0) {
            return Err(Error::domain("gravitational parameter must be positive"));
        }
        if !(self.semi_major_axis * (1.0 - self.eccentricity) > MOON_RADIUS) {
            return Err(Error::domain("periapsis lies inside the Moon"));
        }
        Ok(())
    }

    pub fn mean_motion(&self) -> f64 {
        (self.gravitational_parameter / self.semi_major_axis.powi(3)).sqrt()
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.mean_motion()
    }
}

/// The four-satellite default constellation.
pub fn default_constellation() -> Vec<KeplerianElements> {
    [(0.0, 0.0), (90.0, 20.0), (180.0, 40.0), (270.0, 60.0)]
        .iter()
        .map(|&(r, m)| KeplerianElements::elfo(r, m))
        .collect()
}

/// Solves `E − e sin E = M` by Newton iteration.
pub fn solve_kepler(mean_anomaly: f64, e: f64) -> f64 {
    let m = mean_anomaly.rem_euclid(2.0 * PI);
    let mut ecc = if e < 0.8 { m } else { PI };
    for _ in 0..100 {
        let f = ecc - e * ecc.sin() - m;
        let d = f / (1.0 - e * ecc.cos());
        ecc -= d;
        if d.abs() < KEPLER_TOL {
            break;
        }
    }
    ecc
}

/// Two-body state at time `t` (s) after the element epoch.
pub fn propagate_orbit(el: &KeplerianElements, t: f64) -> Result<OrbitState> {
    el.validate()?;
    let (a, e, mu) = (el.semi_major_axis, el.eccentricity, el.gravitational_parameter);
    let ecc = solve_kepler(el.mean_anomaly_epoch + el.mean_motion() * t, e);
    let (se, ce) = ecc.sin_cos();
    let b = a * (1.0 - e * e).sqrt();
    let r = a * (1.0 - e * ce);
    // Perifocal frame.
    let p = Vector3::new(a * (ce - e), b * se, 0.0);
    let edot = (mu / a).sqrt() / r;
    let v = Vector3::new(-a * se * edot, b * ce * edot, 0.0);

    let (so, co) = el.raan.sin_cos();
    let (sw, cw) = el.arg_periapsis.sin_cos();
    let (si, ci) = el.inclination.sin_cos();
    let rot = nalgebra::Matrix3::new(
        co * cw - so * sw * ci,
        -co * sw - so * cw * ci,
        so * si,
        so * cw + co * sw * ci,
        -so * sw + co * cw * ci,
        -co * si,
        sw * si,
        cw * si,
        ci,
    );
    Ok(OrbitState {
        position: rot * p,
        velocity: rot * v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn energy(s: &OrbitState, mu: f64) -> f64 {
        0.5 * s.velocity.norm_squared() - mu / s.position.norm()
    }

    #[test]
    fn starts_at_periapsis() {
        let el = KeplerianElements::elfo(30.0, 0.0);
        let s = propagate_orbit(&el, 0.0).unwrap();
        let rp = el.semi_major_axis * (1.0 - el.eccentricity);
        assert!((s.position.norm() - rp).abs() < 1e-6);
        assert!(s.position.dot(&s.velocity).abs() < 1e-3);
    }

    #[test]
    fn circular_orbit_keeps_radius() {
        let el = KeplerianElements { eccentricity: 0.0, ..KeplerianElements::elfo(10.0, 5.0) };
        let period = el.period();
        for i in 0..=100 {
            let s = propagate_orbit(&el, period * i as f64 / 100.0).unwrap();
            assert!((s.position.norm() / el.semi_major_axis - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn invariants_conserved_over_a_day() {
        let el = KeplerianElements::elfo(90.0, 20.0);
        let mu = el.gravitational_parameter;
        let s0 = propagate_orbit(&el, 0.0).unwrap();
        let (e0, h0) = (energy(&s0, mu), s0.position.cross(&s0.velocity));
        for k in 1..=96 {
            let s = propagate_orbit(&el, 900.0 * k as f64).unwrap();
            assert!((energy(&s, mu) - e0).abs() / e0.abs() < 1e-9);
            assert!((s.position.cross(&s.velocity) - h0).norm() / h0.norm() < 1e-9);
        }
    }

    #[test]
    fn velocity_is_position_derivative() {
        let el = KeplerianElements::elfo(180.0, 40.0);
        let h = 1e-3;
        let t = 1234.5;
        let a = propagate_orbit(&el, t - h).unwrap().position;
        let b = propagate_orbit(&el, t + h).unwrap().position;
        let v = propagate_orbit(&el, t).unwrap().velocity;
        assert!(((b - a) / (2.0 * h) - v).norm() < 1e-5);
    }

    #[test]
    fn rejects_hyperbolic_and_subsurface() {
        let mut el = KeplerianElements::elfo(0.0, 0.0);
        el.eccentricity = 1.2;
        assert!(propagate_orbit(&el, 0.0).is_err());
        el.eccentricity = 0.9;
        assert!(propagate_orbit(&el, 0.0).is_err());
    }
}
