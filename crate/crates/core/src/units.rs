//! Physical constants (CODATA 2018) and unit conversions. Everything inside
//! the crate is SI; Gauss, millimetres and milliseconds only appear at the
//! configuration and CLI boundaries.

pub const HBAR: f64 = 1.054_571_817e-34;
pub const PLANCK: f64 = 6.626_070_15e-34;
pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
pub const MU_0: f64 = 1.256_637_062_12e-6;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;

pub const GAUSS: f64 = 1e-4;
pub const MILLIGAUSS: f64 = 1e-7;
pub const MM: f64 = 1e-3;
pub const UM: f64 = 1e-6;
pub const MS: f64 = 1e-3;
pub const US: f64 = 1e-6;
pub const PICOKELVIN: f64 = 1e-12;

pub const RB87_MASS: f64 = 86.909_180_527 * ATOMIC_MASS_UNIT;

#[inline]
pub fn hz_to_rad(nu: f64) -> f64 {
    2.0 * std::f64::consts::PI * nu
}

#[inline]
pub fn rad_to_hz(omega: f64) -> f64 {
    omega / (2.0 * std::f64::consts::PI)
}
