//! Physical constants used across the crate.

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Lunar gravitational parameter (m³/s²).
pub const MOON_GM: f64 = 4.904_869_5e12;

/// Mean lunar radius (m).
pub const MOON_RADIUS: f64 = 1_737_400.0;

/// Lunar sidereal rotation period (s).
pub const MOON_SIDEREAL_PERIOD: f64 = 27.321_661 * 86_400.0;

/// Lunar rotation rate (rad/s), uniform, no libration.
pub const MOON_ROTATION_RATE: f64 = 2.0 * std::f64::consts::PI / MOON_SIDEREAL_PERIOD;
