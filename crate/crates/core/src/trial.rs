//! Trial functions for the path endpoints: the Hartree product Π_i e^{α cos θ_i}
//! with α optimized for the non-interacting rotor, and the constant trial.

use crate::config::TrialKind;
use crate::error::{Error, Result};
use crate::lattice::LatticeSystem;
use crate::numerics::{gauss_legendre, golden_section_min};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialWF {
    pub kind: TrialKind,
    /// Orientation-bias parameter; zero for the constant trial.
    pub alpha: f64,
}

impl TrialWF {
    pub fn constant() -> Self {
        TrialWF {
            kind: TrialKind::Constant,
            alpha: 0.0,
        }
    }

    /// Hartree trial with α optimized for field strength `u` at g = 0.
    pub fn hartree(u: f64) -> Result<Self> {
        Ok(TrialWF {
            kind: TrialKind::Hartree,
            alpha: optimize_alpha(u)?,
        })
    }

    pub fn for_kind(kind: TrialKind, u: f64) -> Result<Self> {
        match kind {
            TrialKind::Constant => Ok(Self::constant()),
            TrialKind::Hartree => Self::hartree(u),
        }
    }

    /// log Ψ_T(X) = α Σ_i n_i·ê.
    pub fn evaluate_log(&self, x: &[Vector3<f64>]) -> f64 {
        match self.kind {
            TrialKind::Constant => 0.0,
            TrialKind::Hartree => self.alpha * x.iter().map(|n| n.z).sum::<f64>(),
        }
    }

    /// Change of log Ψ_T when one rotor reorients.
    #[inline]
    pub fn log_delta(&self, old: &Vector3<f64>, new: &Vector3<f64>) -> f64 {
        match self.kind {
            TrialKind::Constant => 0.0,
            TrialKind::Hartree => self.alpha * (new.z - old.z),
        }
    }

    /// Local energy (H Ψ_T)/Ψ_T at X, in hB units.
    ///
    /// Uses L² e^{α cos θ} = [2α cos θ − α² sin²θ] e^{α cos θ} per rotor.
    pub fn local_energy(
        &self,
        x: &[Vector3<f64>],
        lattice: &LatticeSystem,
        u: f64,
        g: f64,
    ) -> f64 {
        let a = self.alpha;
        let kinetic: f64 = x
            .iter()
            .map(|n| {
                let c = n.z;
                2.0 * a * c - a * a * (1.0 - c * c)
            })
            .sum();
        kinetic + lattice.potential_total(x, u, g)
    }
}

/// Variational α for a single rotor in field u, at g = 0.
///
/// E(α) = ⟨T + V⟩ with both expectations over |e^{α cos θ}|²; the 1D integrals
/// over cos θ are 64-point Gauss-Legendre, the search is golden-section.
pub fn optimize_alpha(u: f64) -> Result<f64> {
    if u < 0.0 {
        return Err(Error::domain("u must be non-negative"));
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    let (xs, ws) = gauss_legendre(64);
    let energy = |a: f64| single_rotor_energy(a, u, &xs, &ws);
    // E(α) grows like α² at large α; the minimizer sits well below 2 + u
    let hi = 2.0 + u;
    Ok(golden_section_min(energy, 0.0, hi, 1e-8))
}

/// ⟨ψ_α|H|ψ_α⟩/⟨ψ_α|ψ_α⟩ for one rotor in field u.
pub fn single_rotor_energy(alpha: f64, u: f64, xs: &[f64], ws: &[f64]) -> f64 {
    let mut norm = 0.0;
    let mut acc = 0.0;
    for (x, w) in xs.iter().zip(ws) {
        let weight = w * (2.0 * alpha * x).exp();
        let local = 2.0 * alpha * x - alpha * alpha * (1.0 - x * x) - u * x;
        norm += weight;
        acc += weight * local;
    }
    acc / norm
}
