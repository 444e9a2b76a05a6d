//! Surface site frame and satellite look angles.
//!
//! The Moon rotates uniformly about the inertial z axis; the Moon-fixed frame
//! coincides with the inertial frame at `t = 0`. User states live in a local
//! East-North-Up frame whose origin is the site on the mean lunar sphere.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::orbit::OrbitState;
use crate::consts::{MOON_RADIUS, MOON_ROTATION_RATE};

/// Selenographic site coordinates (rad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub latitude: f64,
    pub longitude: f64,
}

impl Default for Site {
    /// Landing site near the lunar south pole.
    fn default() -> Self {
        Self {
            latitude: (-89.45f64).to_radians(),
            longitude: 222.69f64.to_radians(),
        }
    }
}

/// Satellite state expressed in the site ENU frame, velocity relative to the surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalSatState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

/// Look angles from the site origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteGeometry {
    pub elevation: f64,
    pub range: f64,
    pub range_rate: f64,
    pub visible: bool,
}

impl Site {
    /// Rotation taking Moon-fixed vectors to ENU.
    pub fn enu_rotation(&self) -> Matrix3<f64> {
        let (sp, cp) = self.latitude.sin_cos();
        let (sl, cl) = self.longitude.sin_cos();
        Matrix3::new(
            -sl, cl, 0.0, //
            -sp * cl, -sp * sl, cp, //
            cp * cl, cp * sl, sp,
        )
    }

    /// Site position in the Moon-fixed frame.
    pub fn fixed_position(&self) -> Vector3<f64> {
        let (sp, cp) = self.latitude.sin_cos();
        let (sl, cl) = self.longitude.sin_cos();
        MOON_RADIUS * Vector3::new(cp * cl, cp * sl, sp)
    }

    /// Converts an inertial satellite state at time `t` to the site frame.
    pub fn to_local(&self, s: &OrbitState, t: f64) -> LocalSatState {
        let th = MOON_ROTATION_RATE * t;
        let (st, ct) = th.sin_cos();
        // inertial -> fixed
        let r = Matrix3::new(ct, st, 0.0, -st, ct, 0.0, 0.0, 0.0, 1.0);
        let p_fixed = r * s.position;
        let omega = Vector3::new(0.0, 0.0, MOON_ROTATION_RATE);
        let v_fixed = r * s.velocity - omega.cross(&p_fixed);
        let rot = self.enu_rotation();
        LocalSatState {
            position: rot * (p_fixed - self.fixed_position()),
            velocity: rot * v_fixed,
        }
    }
}

/// Elevation, range, range rate and visibility of a local satellite state
/// seen from ENU point `from` (static).
pub fn look_angles(sat: &LocalSatState, from: &Vector3<f64>, mask: f64) -> SiteGeometry {
    let d = sat.position - from;
    let range = d.norm();
    let elevation = (d.z / range).asin();
    SiteGeometry {
        elevation,
        range,
        range_rate: sat.velocity.dot(&d) / range,
        visible: elevation > mask,
    }
}

/// Look angles from the site origin for an inertial satellite state.
pub fn site_geometry(site: &Site, sat: &OrbitState, t: f64, mask: f64) -> SiteGeometry {
    look_angles(&site.to_local(sat, t), &Vector3::zeros(), mask)
}
