//! Run configuration: the flat key-value document shared by all drivers,
//! plus the manifest that stamps every output.

use crate::error::{Error, Result};
use crate::units::ReducedParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    Triangular,
    Square,
}

impl Geometry {
    pub fn as_str(&self) -> &'static str {
        match self {
            Geometry::Triangular => "triangular",
            Geometry::Square => "square",
        }
    }
}

impl std::str::FromStr for Geometry {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triangular" | "tri" => Ok(Geometry::Triangular),
            "square" | "sq" => Ok(Geometry::Square),
            other => Err(Error::config(format!("unknown geometry '{other}'"))),
        }
    }
}

/// How pair interactions are summed over periodic copies of the cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// Sum over all periodic images out to the cutoff radius.
    PeriodicSum,
    /// Nearest image only.
    MinimumImage,
}

impl Convention {
    pub fn as_str(&self) -> &'static str {
        match self {
            Convention::PeriodicSum => "periodic-sum",
            Convention::MinimumImage => "minimum-image",
        }
    }
}

impl std::str::FromStr for Convention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic-sum" | "periodic" => Ok(Convention::PeriodicSum),
            "minimum-image" | "min-image" => Ok(Convention::MinimumImage),
            other => Err(Error::config(format!("unknown convention '{other}'"))),
        }
    }
}

/// Image-sum cutoff selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "cutoff_policy", content = "cutoff_value")]
pub enum CutoffPolicy {
    /// r_max chosen so the residual single-pair magnitude g / r_max³ stays
    /// below the tolerance.
    Residual(f64),
    /// Fixed radius in lattice units (e.g. the 100-site convention).
    Radius(f64),
}

impl CutoffPolicy {
    /// Default residual tolerance 1e-8.
    pub fn default_residual() -> Self {
        CutoffPolicy::Residual(1e-8)
    }

    /// Resolve to a cutoff radius for coupling strength `g`.
    ///
    /// For the residual policy the radius satisfies max(g, 1)/r³ < tol, so
    /// weakly-coupled runs keep a conservative cutoff.
    pub fn resolve(&self, g: f64) -> f64 {
        match *self {
            CutoffPolicy::Residual(tol) => (g.max(1.0) / tol).cbrt(),
            CutoffPolicy::Radius(r) => r,
        }
    }
}

/// Short-time propagator factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Second-order split (default for phase scans).
    Primitive,
    /// Sixth-order multi-product extrapolation.
    Mpe6,
}

impl Backend {
    pub fn as_str(&self) -> &'static str {
        match self {
            Backend::Primitive => "primitive",
            Backend::Mpe6 => "mpe6",
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "primitive" => Ok(Backend::Primitive),
            "mpe6" => Ok(Backend::Mpe6),
            other => Err(Error::config(format!("unknown backend '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialKind {
    Hartree,
    Constant,
}

impl TrialKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrialKind::Hartree => "hartree",
            TrialKind::Constant => "constant",
        }
    }
}

impl std::str::FromStr for TrialKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hartree" => Ok(TrialKind::Hartree),
            "constant" => Ok(TrialKind::Constant),
            other => Err(Error::config(format!("unknown trial kind '{other}'"))),
        }
    }
}

fn default_chains() -> usize {
    1
}
fn default_sweeps_equil() -> usize {
    2_000
}
fn default_sweeps_measure() -> usize {
    20_000
}
fn default_max_bisection_level() -> u32 {
    3
}
fn default_bisection_repeats() -> usize {
    1
}
fn default_table_grid() -> usize {
    1 << 16
}
fn default_schema_version() -> u32 {
    1
}

/// One run, one document. Flat keys; serializes to/from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub geometry: Geometry,
    /// Rotor count; must fill an admissible supercell for the geometry.
    pub n: usize,
    pub g: f64,
    pub u: f64,
    /// Imaginary time step τ̃, units of (2πB)⁻¹.
    pub tau: f64,
    /// Path length β̃ = M τ̃.
    pub beta: f64,
    #[serde(default = "Backend::default")]
    pub backend: Backend,
    #[serde(default = "TrialKind::default")]
    pub trial: TrialKind,
    pub seed: u64,
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default = "default_sweeps_equil")]
    pub sweeps_equil: usize,
    #[serde(default = "default_sweeps_measure")]
    pub sweeps_measure: usize,
    #[serde(default = "Convention::default")]
    pub convention: Convention,
    #[serde(flatten)]
    pub cutoff: CutoffPolicy,
    #[serde(default = "default_max_bisection_level")]
    pub max_bisection_level: u32,
    /// Bisection passes per level per rotor per sweep.
    #[serde(default = "default_bisection_repeats")]
    pub bisection_repeats: usize,
    /// Kernel table resolution (grid points in cos γ).
    #[serde(default = "default_table_grid")]
    pub table_grid: usize,
    /// Output directory for CSV/checkpoint/manifest files.
    #[serde(default)]
    pub out_dir: Option<String>,
}

impl Default for Backend {
    fn default() -> Self {
        Backend::Primitive
    }
}
impl Default for TrialKind {
    fn default() -> Self {
        TrialKind::Hartree
    }
}
impl Default for Convention {
    fn default() -> Self {
        Convention::PeriodicSum
    }
}

impl RunConfig {
    /// Sensible desk-scale defaults for a given lattice point.
    pub fn desk(geometry: Geometry, n: usize, g: f64, u: f64, seed: u64) -> Self {
        let (tau, beta) = match geometry {
            Geometry::Triangular => (0.0375, 5.1),
            Geometry::Square => (0.0375, 4.2),
        };
        RunConfig {
            schema_version: 1,
            geometry,
            n,
            g,
            u,
            tau,
            beta,
            backend: Backend::Primitive,
            trial: TrialKind::Hartree,
            seed,
            chains: default_chains(),
            sweeps_equil: default_sweeps_equil(),
            sweeps_measure: default_sweeps_measure(),
            convention: Convention::PeriodicSum,
            cutoff: CutoffPolicy::default_residual(),
            max_bisection_level: default_max_bisection_level(),
            bisection_repeats: default_bisection_repeats(),
            table_grid: default_table_grid(),
            out_dir: None,
        }
    }

    pub fn reduced(&self) -> ReducedParams {
        ReducedParams {
            g: self.g,
            u: self.u,
            tau: self.tau,
            beta: self.beta,
        }
    }

    /// Link count M (β = M τ).
    pub fn links(&self) -> usize {
        (self.beta / self.tau).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.reduced().validate()?;
        crate::lattice::check_admissible(self.geometry, self.n)?;
        let m = self.links();
        if m % 2 != 0 {
            return Err(Error::config(format!(
                "link count M = {m} must be even so a middle bead exists"
            )));
        }
        if self.backend == Backend::Mpe6 && m % 4 != 0 {
            return Err(Error::config(format!(
                "mpe6 backend groups links in fours; M = {m} is not divisible by 4"
            )));
        }
        if self.chains == 0 {
            return Err(Error::config("chains must be >= 1"));
        }
        if self.max_bisection_level == 0 || (1usize << self.max_bisection_level) >= m {
            return Err(Error::config(format!(
                "bisection level {} invalid for M = {m}",
                self.max_bisection_level
            )));
        }
        if self.table_grid < (1 << 12) {
            return Err(Error::config("table_grid must be at least 2^12"));
        }
        match self.cutoff {
            CutoffPolicy::Residual(tol) if tol <= 0.0 => {
                return Err(Error::config("residual tolerance must be positive"))
            }
            CutoffPolicy::Radius(r) if r <= 0.0 => {
                return Err(Error::config("cutoff radius must be positive"))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(s).map_err(|e| Error::config(format!("bad run config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("RunConfig serializes")
    }

    /// Stable digest of the run identity; wall-clock never enters.
    pub fn manifest_sha(&self) -> String {
        let canonical =
            serde_json::to_string(self).expect("RunConfig serializes to canonical JSON");
        let mut h = Sha256::new();
        h.update(canonical.as_bytes());
        let out = h.finalize();
        let mut s = String::with_capacity(64);
        for b in out {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }
}

/// Full provenance record written next to every output file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub manifest_sha: String,
    pub code_version: String,
    pub constants_version: String,
    pub config: RunConfig,
    /// Resolved per-module parameters (cutoff radius, kernel table size, ...).
    pub resolved_cutoff: f64,
    pub kernel_l_cut: usize,
    pub move_mix: String,
    /// Wall-clock seconds; excluded from the manifest digest.
    pub wall_clock_s: Option<f64>,
}

impl RunManifest {
    pub fn new(config: &RunConfig, resolved_cutoff: f64, kernel_l_cut: usize) -> Self {
        RunManifest {
            schema_version: config.schema_version,
            manifest_sha: config.manifest_sha(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            constants_version: crate::constants::CONSTANTS_VERSION.to_string(),
            config: config.clone(),
            resolved_cutoff,
            kernel_l_cut,
            move_mix: format!(
                "per rotor per sweep: bisection x{} at levels 1..={}, end move per end, azimuth rotation, full rotation",
                config.bisection_repeats, config.max_bisection_level
            ),
            wall_clock_s: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo() -> RunConfig {
        RunConfig::desk(Geometry::Triangular, 12, 1.5, 0.5, 7)
    }

    #[test]
    fn desk_defaults_validate() {
        demo().validate().unwrap();
        assert_eq!(demo().links(), 136);
        let sq = RunConfig::desk(Geometry::Square, 16, 1.0, 0.0, 7);
        sq.validate().unwrap();
        assert_eq!(sq.links(), 112);
    }

    #[test]
    fn toml_round_trip_preserves_identity() {
        let cfg = demo();
        let s = cfg.to_toml_string();
        let back = RunConfig::from_toml_str(&s).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.manifest_sha(), back.manifest_sha());
    }

    #[test]
    fn flat_document_parses() {
        let doc = r#"
            schema_version = 1
            geometry = "triangular"
            n = 12
            g = 1.5
            u = 0.5
            tau = 0.0375
            beta = 5.1
            seed = 42
            cutoff_policy = "residual"
            cutoff_value = 1e-8
        "#;
        let cfg = RunConfig::from_toml_str(doc).unwrap();
        assert_eq!(cfg.n, 12);
        assert_eq!(cfg.backend, Backend::Primitive);
        assert_eq!(cfg.sweeps_measure, 20_000);
    }

    #[test]
    fn inadmissible_or_inconsistent_configs_rejected() {
        let mut cfg = demo();
        cfg.n = 13;
        assert!(cfg.validate().is_err());

        let mut cfg = demo();
        cfg.beta = 5.0; // 5.0 / 0.0375 is not an integer
        assert!(cfg.validate().is_err());

        let mut cfg = demo();
        cfg.backend = Backend::Mpe6;
        cfg.tau = 0.075;
        cfg.beta = 5.1; // M = 68, divisible by 4
        cfg.validate().unwrap();
        cfg.beta = 5.1 + 2.0 * 0.075; // M = 70, not divisible by 4
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn manifest_sha_ignores_wall_clock_only() {
        let cfg = demo();
        let mut other = cfg.clone();
        assert_eq!(cfg.manifest_sha(), other.manifest_sha());
        other.seed = 8;
        assert_ne!(cfg.manifest_sha(), other.manifest_sha());
    }

    #[test]
    fn cutoff_policy_resolution() {
        assert!((CutoffPolicy::Residual(1e-8).resolve(1.0) - 1e8f64.cbrt()).abs() < 1e-6);
        // conservative floor below g = 1
        assert_eq!(
            CutoffPolicy::Residual(1e-8).resolve(0.0),
            CutoffPolicy::Residual(1e-8).resolve(1.0)
        );
        assert!(CutoffPolicy::Residual(1e-8).resolve(3.0) > CutoffPolicy::Residual(1e-8).resolve(1.0));
        assert_eq!(CutoffPolicy::Radius(100.0).resolve(3.0), 100.0);
    }
}
