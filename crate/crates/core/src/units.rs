//! Physical constants and unit conversions used at file and flag boundaries.

use std::f64::consts::PI;

/// Vacuum permeability, T·m/A. The classical value is used so that
/// `μ0 / 2π = 2e-7` exactly.
pub const MU0: f64 = 4.0e-7 * PI;
/// `μ0 / 4π`, T·m/A.
pub const MU0_OVER_4PI: f64 = 1.0e-7;
/// Bohr magneton, J/T.
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;

/// Tesla per gauss.
pub const GAUSS: f64 = 1.0e-4;
/// Metres per micrometre.
pub const MICRON: f64 = 1.0e-6;
/// Kelvin per microkelvin.
pub const MICROKELVIN: f64 = 1.0e-6;

pub fn gauss_to_tesla(g: f64) -> f64 {
    g * GAUSS
}

pub fn tesla_to_gauss(t: f64) -> f64 {
    t / GAUSS
}

pub fn um_to_m(um: f64) -> f64 {
    um * MICRON
}

pub fn m_to_um(m: f64) -> f64 {
    m / MICRON
}

pub fn uk_to_k(uk: f64) -> f64 {
    uk * MICROKELVIN
}
