//! Physical constants, CODATA 2018.
//!
//! Only the reduced→physical conversions touch these; the simulation core is
//! written entirely in reduced units (energies in hB, imaginary time in
//! (2πB)⁻¹, lengths in lattice spacings).

/// Version tag recorded in run manifests.
pub const CONSTANTS_VERSION: &str = "CODATA-2018";

/// Planck constant, J s (exact).
pub const PLANCK_H: f64 = 6.626_070_15e-34;

/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

/// Speed of light, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// One Debye in C·m: 1 D = 10⁻²¹/c C·m.
pub const DEBYE: f64 = 1e-21 / SPEED_OF_LIGHT;

/// 4πε₀, convenience.
pub const FOUR_PI_EPS0: f64 = 4.0 * std::f64::consts::PI * EPSILON_0;
