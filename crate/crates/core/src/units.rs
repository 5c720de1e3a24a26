//! Reduced-unit conventions and physical-unit conversions.
//!
//! The simulation works in reduced units: energies in hB, imaginary time in
//! (2πB)⁻¹, lengths in units of the lattice spacing. The two dimensionless
//! couplings are u = dE/hB (field) and g = d²/(4πε₀ hB r³) (dipole-dipole).

use crate::constants::{DEBYE, FOUR_PI_EPS0, PLANCK_H};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Laboratory parameters of a dipolar diatomic pinned to a lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoleculeParams {
    /// Permanent dipole moment, Debye.
    pub dipole_debye: f64,
    /// Rotational constant, GHz.
    pub rot_const_ghz: f64,
    /// Applied field, kV/cm.
    pub field_kv_cm: f64,
    /// Lattice spacing, nm.
    pub spacing_nm: f64,
}

/// Dimensionless couplings and path discretization of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedParams {
    /// Dipole-dipole coupling.
    pub g: f64,
    /// Field coupling.
    pub u: f64,
    /// Imaginary time step, units of (2πB)⁻¹.
    pub tau: f64,
    /// Total imaginary path length, units of (2πB)⁻¹.
    pub beta: f64,
}

impl ReducedParams {
    pub fn validate(&self) -> Result<()> {
        if self.g < 0.0 || self.u < 0.0 {
            return Err(Error::domain("g and u must be non-negative"));
        }
        if self.tau <= 0.0 {
            return Err(Error::domain("tau must be positive"));
        }
        let m = self.beta / self.tau;
        if (m - m.round()).abs() > 1e-9 * m.max(1.0) || m.round() < 2.0 {
            return Err(Error::domain(format!(
                "beta must be an integer multiple (>= 2) of tau, got beta/tau = {m}"
            )));
        }
        Ok(())
    }

    /// Link count M with beta = M tau.
    pub fn links(&self) -> usize {
        (self.beta / self.tau).round() as usize
    }
}

fn check_positive(value: f64, name: &str) -> Result<()> {
    if !(value > 0.0) {
        return Err(Error::domain(format!("{name} must be strictly positive, got {value}")));
    }
    Ok(())
}

/// (u, g) from laboratory parameters.
pub fn reduced_from_physical(m: &MoleculeParams) -> Result<(f64, f64)> {
    check_positive(m.dipole_debye, "dipole moment")?;
    check_positive(m.rot_const_ghz, "rotational constant")?;
    check_positive(m.spacing_nm, "lattice spacing")?;
    if m.field_kv_cm < 0.0 {
        return Err(Error::domain("field must be non-negative"));
    }
    let d = m.dipole_debye * DEBYE; // C m
    let hb = PLANCK_H * m.rot_const_ghz * 1e9; // J
    let e = m.field_kv_cm * 1e5; // V/m
    let r = m.spacing_nm * 1e-9; // m
    let u = d * e / hb;
    let g = d * d / (FOUR_PI_EPS0 * hb * r * r * r);
    Ok((u, g))
}

/// Field (kV/cm) realizing a target u; exact inverse of [`reduced_from_physical`].
pub fn field_for_u(dipole_debye: f64, rot_const_ghz: f64, u: f64) -> Result<f64> {
    check_positive(dipole_debye, "dipole moment")?;
    check_positive(rot_const_ghz, "rotational constant")?;
    if u < 0.0 {
        return Err(Error::domain("u must be non-negative"));
    }
    let d = dipole_debye * DEBYE;
    let hb = PLANCK_H * rot_const_ghz * 1e9;
    Ok(u * hb / d / 1e5)
}

/// Lattice spacing (nm) realizing a target g; exact inverse of [`reduced_from_physical`].
pub fn spacing_for_g(dipole_debye: f64, rot_const_ghz: f64, g: f64) -> Result<f64> {
    check_positive(dipole_debye, "dipole moment")?;
    check_positive(rot_const_ghz, "rotational constant")?;
    check_positive(g, "g")?;
    let d = dipole_debye * DEBYE;
    let hb = PLANCK_H * rot_const_ghz * 1e9;
    let r3 = d * d / (FOUR_PI_EPS0 * hb * g);
    Ok(r3.cbrt() * 1e9)
}

/// Reference molecule row: name, d (Debye), B (GHz), E (kV/cm) at u=1,
/// r_lat (nm) at g=1.
pub type MoleculeRow = (&'static str, f64, f64, f64, f64);

/// Dipolar diatomics used as conversion fixtures.
pub const MOLECULES: [MoleculeRow; 9] = [
    ("KRb", 0.57, 1.10, 3.80, 3.56),
    ("LiCs", 5.46, 6.53, 2.37, 8.83),
    ("NaCs", 4.70, 1.74, 0.73, 12.42),
    ("CsI", 11.69, 0.71, 0.12, 30.70),
    ("KBr", 10.60, 2.43, 0.46, 19.10),
    ("SrO", 8.87, 10.13, 2.27, 10.53),
    ("SrF", 3.47, 7.52, 4.30, 6.22),
    ("YO", 4.54, 11.63, 5.11, 6.42),
    ("YbF", 9.93, 9.19, 1.44, 12.93),
];
