//! Physical constants and unit conversions.
//!
//! Frequencies handed to the public API are ordinary frequencies in MHz.
//! The generator is assembled in angular units of rad/ns so that a rate of
//! `f` MHz becomes `2*pi*f*1e-3` rad/ns, and `1/(2*pi*33 MHz) = 4.82 ns`.

use std::f64::consts::TAU;

/// Vacuum permittivity, F/m (CODATA 2018).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Planck constant, J s (exact in SI 2019).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// One Debye in C m: 1e-21 / c.
pub const DEBYE: f64 = 1.0e-21 / SPEED_OF_LIGHT;

/// MHz (ordinary) to rad/ns.
#[inline]
pub fn mhz_to_angular(f_mhz: f64) -> f64 {
    TAU * f_mhz * 1e-3
}

/// rad/ns to MHz (ordinary).
#[inline]
pub fn angular_to_mhz(w: f64) -> f64 {
    w * 1e3 / TAU
}

/// Lifetime in ns of a decay with linewidth `gamma_mhz`.
#[inline]
pub fn lifetime_ns(gamma_mhz: f64) -> f64 {
    1.0 / mhz_to_angular(gamma_mhz)
}

/// Linewidth in MHz for a lifetime in ns.
#[inline]
pub fn linewidth_mhz(tau_ns: f64) -> f64 {
    angular_to_mhz(1.0 / tau_ns)
}

/// Emission rate in photons/s for an angular rate (rad/ns) times a population.
#[inline]
pub fn per_ns_to_per_s(rate_per_ns: f64) -> f64 {
    rate_per_ns * 1e9
}

/// Drive amplitude for a saturation parameter `s = 2 Omega^2 / Gamma^2`.
#[inline]
pub fn rabi_from_saturation(s: f64, gamma_mhz: f64) -> f64 {
    gamma_mhz * (0.5 * s).sqrt()
}

/// Saturation parameter for a drive amplitude `rabi_mhz`.
#[inline]
pub fn saturation_from_rabi(rabi_mhz: f64, gamma_mhz: f64) -> f64 {
    2.0 * rabi_mhz * rabi_mhz / (gamma_mhz * gamma_mhz)
}
