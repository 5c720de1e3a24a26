//! Run drivers: single PIGS runs with checkpointing, phase/convergence/
//! quantumness scans, the classical ordering report, and the CSV schemas
//! shared with the command-line front end.
//!
//! Every CSV starts with two comment lines: the schema tag and the SHA-256 of
//! the manifest that produced it. Float cells are printed with a fixed
//! `{:.10e}` format so identical runs produce byte-identical files.

use crate::config::{Backend, Convention, CutoffPolicy, Geometry, RunConfig, RunManifest};
use crate::error::{Error, Result};
use crate::estimators::{analyze_chains, Accumulator, EstimatorReport};
use crate::lattice::{self, LatticeSystem};
use crate::propagator::PropagatorSet;
use crate::sampler::{ChainState, Checkpoint, Sampler, SamplerContext};
use crate::trial::TrialWF;
use crate::units::{field_for_u, reduced_from_physical, spacing_for_g, MoleculeParams, MOLECULES};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Maximum tolerated fraction of negative-weight events before an mpe6 run is
/// declared backend-invalid.
pub const NEGATIVE_WEIGHT_LIMIT: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: RunConfig,
    pub report: EstimatorReport,
    pub manifest: RunManifest,
    pub negative_weight_fraction: f64,
    /// True when negative-weight encounters exceeded the validity threshold.
    pub backend_invalid: bool,
}

/// Per-chain sample streams next to the merged report, for callers that need
/// the raw series (autocorrelation studies, convergence diagnostics).
pub struct RunOutputDetailed {
    pub output: RunOutput,
    pub chains: Vec<Accumulator>,
}

struct RunSetup {
    lattice: LatticeSystem,
    props: PropagatorSet,
    trial: TrialWF,
}

fn prepare(config: &RunConfig) -> Result<RunSetup> {
    config.validate()?;
    let lattice = LatticeSystem::build(
        config.geometry,
        config.n,
        config.convention,
        config.cutoff,
        config.g,
    )?;
    let tau_fine = match config.backend {
        Backend::Primitive => config.tau,
        Backend::Mpe6 => config.tau / 4.0,
    };
    let props = PropagatorSet::build(tau_fine, config.max_bisection_level, config.table_grid)?;
    let trial = TrialWF::for_kind(config.trial, config.u)?;
    Ok(RunSetup {
        lattice,
        props,
        trial,
    })
}

/// Run one PIGS job (all chains), no file IO.
pub fn run_pigs(config: &RunConfig) -> Result<RunOutput> {
    Ok(run_pigs_detailed(config)?.output)
}

pub fn run_pigs_detailed(config: &RunConfig) -> Result<RunOutputDetailed> {
    let setup = prepare(config)?;
    let ctx = SamplerContext::new(config, &setup.lattice, &setup.props, setup.trial)?;
    let sampler = Sampler::new(ctx);
    let chain_results: Vec<(Accumulator, f64)> = (0..config.chains)
        .into_par_iter()
        .map(|stream| {
            let mut chain = ChainState::new(&sampler.ctx, config, stream as u64);
            for _ in 0..config.sweeps_equil {
                sampler.sweep(&mut chain);
            }
            let mut acc = Accumulator::new();
            for _ in 0..config.sweeps_measure {
                sampler.sweep(&mut chain);
                acc.push(sampler.measure(&chain));
            }
            (acc, chain.negative_weight_fraction())
        })
        .collect();
    let (chains, neg): (Vec<_>, Vec<_>) = chain_results.into_iter().unzip();
    let report = analyze_chains(&chains)?;
    let neg_fraction = neg.iter().copied().fold(0.0, f64::max);
    let manifest = RunManifest::new(&config.clone(), setup.lattice.r_max, setup.props.fine().l_cut);
    Ok(RunOutputDetailed {
        output: RunOutput {
            config: config.clone(),
            report,
            manifest,
            negative_weight_fraction: neg_fraction,
            backend_invalid: neg_fraction > NEGATIVE_WEIGHT_LIMIT,
        },
        chains,
    })
}

/// Checkpointed single-chain run with optional resume; used by the CLI.
pub struct PigsIoOptions {
    /// Write a checkpoint every this many measurement sweeps.
    pub checkpoint_every: Option<u64>,
    pub resume_from: Option<PathBuf>,
}

pub fn run_pigs_with_io(config: &RunConfig, opts: &PigsIoOptions) -> Result<RunOutput> {
    if config.chains != 1 {
        return Err(Error::config(
            "checkpointed runs are single-chain; use scans for parallelism",
        ));
    }
    let out_dir = config
        .out_dir
        .as_ref()
        .map(PathBuf::from)
        .ok_or_else(|| Error::config("out_dir is required for checkpointed runs"))?;
    std::fs::create_dir_all(&out_dir)?;
    let setup = prepare(config)?;
    let ctx = SamplerContext::new(config, &setup.lattice, &setup.props, setup.trial)?;
    let sampler = Sampler::new(ctx);
    let manifest_sha = config.manifest_sha();

    let (mut chain, mut acc, mut measured) = match &opts.resume_from {
        Some(path) => {
            let ckpt = Checkpoint::from_json(&std::fs::read_to_string(path)?)?;
            if ckpt.manifest_sha != manifest_sha {
                return Err(Error::Checkpoint(format!(
                    "checkpoint manifest {} does not match run manifest {}",
                    ckpt.manifest_sha, manifest_sha
                )));
            }
            let measured = ckpt.samples.len() as u64;
            (
                ckpt.chain,
                Accumulator::from_samples(ckpt.samples),
                measured,
            )
        }
        None => {
            let mut chain = ChainState::new(&sampler.ctx, config, 0);
            for _ in 0..config.sweeps_equil {
                sampler.sweep(&mut chain);
            }
            (chain, Accumulator::new(), 0)
        }
    };

    let write_ckpt = |chain: &ChainState, acc: &Accumulator, tag: &str| -> Result<()> {
        let ckpt = Checkpoint {
            schema_version: config.schema_version,
            manifest_sha: manifest_sha.clone(),
            chain_stream: 0,
            equilibrated: true,
            chain: chain.clone(),
            samples: acc.samples().to_vec(),
        };
        std::fs::write(out_dir.join(format!("checkpoint_{tag}.json")), ckpt.to_json())?;
        Ok(())
    };

    while measured < config.sweeps_measure as u64 {
        sampler.sweep(&mut chain);
        acc.push(sampler.measure(&chain));
        measured += 1;
        if let Some(every) = opts.checkpoint_every {
            if measured % every == 0 && measured < config.sweeps_measure as u64 {
                write_ckpt(&chain, &acc, &format!("{measured:08}"))?;
            }
        }
    }
    write_ckpt(&chain, &acc, "final")?;

    let neg_fraction = chain.negative_weight_fraction();
    let report = analyze_chains(std::slice::from_ref(&acc))?;
    let manifest = RunManifest::new(config, setup.lattice.r_max, setup.props.fine().l_cut);
    std::fs::write(out_dir.join("manifest.json"), manifest.to_json())?;
    let output = RunOutput {
        config: config.clone(),
        report,
        manifest,
        negative_weight_fraction: neg_fraction,
        backend_invalid: neg_fraction > NEGATIVE_WEIGHT_LIMIT,
    };
    std::fs::write(
        out_dir.join("estimators.csv"),
        estimator_csv(std::slice::from_ref(&output), &manifest_sha),
    )?;
    Ok(output)
}

// ---------------------------------------------------------------------------
// scans

#[derive(Debug, Serialize)]
struct ScanManifest<'a> {
    kind: &'a str,
    base: &'a RunConfig,
    parameters: serde_json::Value,
    code_version: &'a str,
    constants_version: &'a str,
}

fn scan_sha(kind: &str, base: &RunConfig, parameters: serde_json::Value) -> (String, String) {
    let manifest = ScanManifest {
        kind,
        base,
        parameters,
        code_version: env!("CARGO_PKG_VERSION"),
        constants_version: crate::constants::CONSTANTS_VERSION,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("scan manifest serializes");
    let sha = sha256_hex(json.as_bytes());
    (json, sha)
}

/// Estimator rows over a (g, u) grid; each point is an independent seeded run.
pub fn phase_scan(base: &RunConfig, g_grid: &[f64], u_grid: &[f64]) -> Result<Vec<RunOutput>> {
    if g_grid.is_empty() || u_grid.is_empty() {
        return Err(Error::config("phase scan grids must be non-empty"));
    }
    let mut points = Vec::new();
    for (j, &u) in u_grid.iter().enumerate() {
        for (i, &g) in g_grid.iter().enumerate() {
            let mut cfg = base.clone();
            cfg.g = g;
            cfg.u = u;
            cfg.seed = base.seed.wrapping_add((j * g_grid.len() + i) as u64);
            points.push(cfg);
        }
    }
    points
        .into_par_iter()
        .map(|cfg| run_pigs(&cfg))
        .collect::<Result<Vec<_>>>()
}

/// Crossover midpoint of a monotone-rising order parameter on a grid: the
/// abscissa where the curve crosses the midpoint between its extremes,
/// linearly interpolated.
pub fn crossover_midpoint(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let lo = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let half = 0.5 * (lo + hi);
    for w in points.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        if (y0 - half) * (y1 - half) <= 0.0 && y1 != y0 {
            return Some(x0 + (half - y0) / (y1 - y0) * (x1 - x0));
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanVariable {
    Tau,
    Beta,
}

/// One run per τ or β value, all else fixed. Values must be sorted ascending;
/// each is snapped to the nearest admissible integer link count.
pub fn convergence_scan(
    base: &RunConfig,
    vary: ScanVariable,
    values: &[f64],
) -> Result<Vec<RunOutput>> {
    if values.is_empty() {
        return Err(Error::config("convergence scan needs at least one value"));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("convergence scan values must be sorted ascending"));
    }
    let configs: Vec<RunConfig> = values
        .iter()
        .enumerate()
        .map(|(idx, &v)| {
            let mut cfg = base.clone();
            match vary {
                ScanVariable::Tau => {
                    let mut m = (base.beta / v).round() as i64;
                    if m % 2 == 1 {
                        m += 1;
                    }
                    if base.backend == Backend::Mpe6 {
                        m += (4 - m % 4) % 4;
                    }
                    cfg.tau = base.beta / m as f64;
                }
                ScanVariable::Beta => {
                    let mut m = (v / base.tau).round() as i64;
                    if m % 2 == 1 {
                        m += 1;
                    }
                    if base.backend == Backend::Mpe6 {
                        m += (4 - m % 4) % 4;
                    }
                    cfg.beta = base.tau * m as f64;
                }
            }
            cfg.seed = base.seed.wrapping_add(idx as u64);
            cfg
        })
        .collect();
    configs
        .into_par_iter()
        .map(|cfg| run_pigs(&cfg))
        .collect::<Result<Vec<_>>>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantumnessVariable {
    G,
    U,
}

#[derive(Debug, Clone)]
pub struct QuantumnessRow {
    pub g: f64,
    pub u: f64,
    /// PIGS ⟨V⟩ per particle with error.
    pub v_pigs: (f64, f64),
    /// Classical minimum per particle and its pattern.
    pub v_min: f64,
    pub pattern: String,
    pub ratio: (f64, f64),
    /// True at the 0/0 point where the ratio is 1 by convention.
    pub zero_flag: bool,
}

/// ⟨V⟩/V_min along a cut in g (u = 0) or u (g = 0).
pub fn quantumness_scan(
    base: &RunConfig,
    vary: QuantumnessVariable,
    values: &[f64],
) -> Result<Vec<QuantumnessRow>> {
    match vary {
        QuantumnessVariable::G if base.u != 0.0 => {
            return Err(Error::config("quantumness g-scan requires u = 0"))
        }
        QuantumnessVariable::U if base.g != 0.0 => {
            return Err(Error::config("quantumness u-scan requires g = 0"))
        }
        _ => {}
    }
    let configs: Vec<RunConfig> = values
        .iter()
        .enumerate()
        .map(|(idx, &v)| {
            let mut cfg = base.clone();
            match vary {
                QuantumnessVariable::G => cfg.g = v,
                QuantumnessVariable::U => cfg.u = v,
            }
            cfg.seed = base.seed.wrapping_add(idx as u64);
            cfg
        })
        .collect();
    configs
        .into_par_iter()
        .map(|cfg| {
            let out = run_pigs(&cfg)?;
            let lattice = LatticeSystem::build(
                cfg.geometry,
                cfg.n,
                cfg.convention,
                cfg.cutoff,
                cfg.g,
            )?;
            let min = lattice::classical_minimum(&lattice, cfg.u, cfg.g)?;
            let (v, v_err) = out.report.v_mid;
            let zero = v.abs() < 1e-9 && min.energy_per_particle.abs() < 1e-12;
            let ratio = if zero {
                (1.0, 0.0)
            } else {
                (
                    v / min.energy_per_particle,
                    (v_err / min.energy_per_particle).abs(),
                )
            };
            Ok(QuantumnessRow {
                g: cfg.g,
                u: cfg.u,
                v_pigs: out.report.v_mid,
                v_min: min.energy_per_particle,
                pattern: min.pattern.label(),
                ratio,
                zero_flag: zero,
            })
        })
        .collect::<Result<Vec<_>>>()
}

// ---------------------------------------------------------------------------
// CSV emission

fn fmt(v: f64) -> String {
    format!("{v:.10e}")
}

fn opt(v: Option<(f64, f64)>) -> (String, String) {
    match v {
        Some((a, b)) => (fmt(a), fmt(b)),
        None => (String::new(), String::new()),
    }
}

pub const ESTIMATOR_SCHEMA: &str = "estimator-v1";

/// Shared estimator schema (also used by phase and convergence scans and by
/// the mean-field comparison via the backend column).
pub fn estimator_csv(rows: &[RunOutput], manifest_sha: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!("# rotorsim-csv schema={ESTIMATOR_SCHEMA}\n"));
    out.push_str(&format!("# manifest_sha={manifest_sha}\n"));
    out.push_str(
        "geometry,convention,n,g,u,tau,beta,backend,trial,seed,sweeps,samples,\
         phi_pol,phi_pol_err,phi_z,phi_z_err,phi_xy,phi_xy_err,phi_cb,phi_cb_err,\
         v_mid,v_mid_err,e_total,e_total_err,negative_weight_fraction,backend_invalid\n",
    );
    for r in rows {
        let c = &r.config;
        let (xy, xy_err) = opt(r.report.phi_xy);
        let (cb, cb_err) = opt(r.report.phi_checkerboard);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            c.geometry.as_str(),
            c.convention.as_str(),
            c.n,
            fmt(c.g),
            fmt(c.u),
            fmt(c.tau),
            fmt(c.beta),
            c.backend.as_str(),
            c.trial.as_str(),
            c.seed,
            c.sweeps_measure,
            r.report.samples,
            fmt(r.report.phi_pol.0),
            fmt(r.report.phi_pol.1),
            fmt(r.report.phi_z.0),
            fmt(r.report.phi_z.1),
            xy,
            xy_err,
            cb,
            cb_err,
            fmt(r.report.v_mid.0),
            fmt(r.report.v_mid.1),
            fmt(r.report.e_total.0),
            fmt(r.report.e_total.1),
            fmt(r.negative_weight_fraction),
            r.backend_invalid,
        ));
    }
    out
}

/// Mean-field rows in the same schema, `backend=meanfield`, zero errors.
pub struct MfRow {
    pub geometry: Geometry,
    pub n: usize,
    pub g: f64,
    pub u: f64,
    pub phi_pol: f64,
    pub phi_z: f64,
    pub phi_xy: Option<f64>,
    pub phi_cb: Option<f64>,
    pub energy_per_particle: f64,
}

pub fn meanfield_csv(rows: &[MfRow], manifest_sha: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!("# rotorsim-csv schema={ESTIMATOR_SCHEMA}\n"));
    out.push_str(&format!("# manifest_sha={manifest_sha}\n"));
    out.push_str(
        "geometry,convention,n,g,u,tau,beta,backend,trial,seed,sweeps,samples,\
         phi_pol,phi_pol_err,phi_z,phi_z_err,phi_xy,phi_xy_err,phi_cb,phi_cb_err,\
         v_mid,v_mid_err,e_total,e_total_err,negative_weight_fraction,backend_invalid\n",
    );
    for r in rows {
        let (xy, xy_err) = opt(r.phi_xy.map(|v| (v, 0.0)));
        let (cb, cb_err) = opt(r.phi_cb.map(|v| (v, 0.0)));
        out.push_str(&format!(
            "{},{},{},{},{},,,meanfield,,,,,{},{},{},{},{},{},{},{},,,{},{},{},{}\n",
            r.geometry.as_str(),
            "periodic-sum",
            r.n,
            fmt(r.g),
            fmt(r.u),
            fmt(r.phi_pol),
            fmt(0.0),
            fmt(r.phi_z),
            fmt(0.0),
            xy,
            xy_err,
            cb,
            cb_err,
            fmt(r.energy_per_particle),
            fmt(0.0),
            fmt(0.0),
            false,
        ));
    }
    out
}

pub fn lattice_energy_csv(
    geometry: Geometry,
    sizes: &[usize],
    convention: Convention,
    cutoff: CutoffPolicy,
) -> Result<(String, String)> {
    let rows = lattice::ordering_energy_report(geometry, sizes, convention, cutoff)?;
    let params = serde_json::json!({
        "geometry": geometry.as_str(),
        "sizes": sizes,
        "convention": convention.as_str(),
        "cutoff": format!("{cutoff:?}"),
    });
    let base = RunConfig::desk(geometry, sizes[0], 1.0, 0.0, 0);
    let (manifest_json, sha) = scan_sha("lattice-energy", &base, params);
    let mut out = String::new();
    out.push_str("# rotorsim-csv schema=lattice-energy-v1\n");
    out.push_str(&format!("# manifest_sha={sha}\n"));
    out.push_str("geometry,convention,n,ordering,energy_per_particle\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.geometry.as_str(),
            r.convention.as_str(),
            r.n,
            r.ordering,
            fmt(r.energy_per_particle)
        ));
    }
    Ok((out, manifest_json))
}

pub fn phase_scan_csv(
    base: &RunConfig,
    g_grid: &[f64],
    u_grid: &[f64],
) -> Result<(String, String, Vec<RunOutput>)> {
    let rows = phase_scan(base, g_grid, u_grid)?;
    let params = serde_json::json!({ "g_grid": g_grid, "u_grid": u_grid });
    let (manifest_json, sha) = scan_sha("phase-scan", base, params);
    Ok((estimator_csv(&rows, &sha), manifest_json, rows))
}

pub fn convergence_scan_csv(
    base: &RunConfig,
    vary: ScanVariable,
    values: &[f64],
) -> Result<(String, String, Vec<RunOutput>)> {
    let rows = convergence_scan(base, vary, values)?;
    let params = serde_json::json!({
        "vary": if vary == ScanVariable::Tau { "tau" } else { "beta" },
        "values": values,
    });
    let (manifest_json, sha) = scan_sha("convergence-scan", base, params);
    Ok((estimator_csv(&rows, &sha), manifest_json, rows))
}

pub fn quantumness_csv(
    base: &RunConfig,
    vary: QuantumnessVariable,
    values: &[f64],
) -> Result<(String, String, Vec<QuantumnessRow>)> {
    let rows = quantumness_scan(base, vary, values)?;
    let params = serde_json::json!({
        "vary": if vary == QuantumnessVariable::G { "g" } else { "u" },
        "values": values,
    });
    let (manifest_json, sha) = scan_sha("quantumness", base, params);
    let mut out = String::new();
    out.push_str("# rotorsim-csv schema=quantumness-v1\n");
    out.push_str(&format!("# manifest_sha={sha}\n"));
    out.push_str("geometry,n,g,u,v_pigs,v_pigs_err,v_min,pattern,ratio,ratio_err,zero_flag\n");
    for r in &rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            base.geometry.as_str(),
            base.n,
            fmt(r.g),
            fmt(r.u),
            fmt(r.v_pigs.0),
            fmt(r.v_pigs.1),
            fmt(r.v_min),
            r.pattern,
            fmt(r.ratio.0),
            fmt(r.ratio.1),
            r.zero_flag,
        ));
    }
    Ok((out, manifest_json, rows))
}

#[derive(Debug, Clone)]
pub struct MoleculeTableRow {
    pub name: &'static str,
    pub dipole_debye: f64,
    pub rot_const_ghz: f64,
    pub field_at_u1: f64,
    pub field_ref: f64,
    pub spacing_at_g1: f64,
    pub spacing_ref: f64,
    pub u_at_ref: f64,
    pub g_at_ref: f64,
}

/// Computed molecule conversion table next to the tabulated reference values.
pub fn molecule_table() -> Result<Vec<MoleculeTableRow>> {
    MOLECULES
        .iter()
        .map(|&(name, d, b, e_ref, r_ref)| {
            let (u, g) = reduced_from_physical(&MoleculeParams {
                dipole_debye: d,
                rot_const_ghz: b,
                field_kv_cm: e_ref,
                spacing_nm: r_ref,
            })?;
            Ok(MoleculeTableRow {
                name,
                dipole_debye: d,
                rot_const_ghz: b,
                field_at_u1: field_for_u(d, b, 1.0)?,
                field_ref: e_ref,
                spacing_at_g1: spacing_for_g(d, b, 1.0)?,
                spacing_ref: r_ref,
                u_at_ref: u,
                g_at_ref: g,
            })
        })
        .collect()
}

pub fn molecule_csv() -> Result<String> {
    let rows = molecule_table()?;
    let sha = sha256_hex(b"molecule-table-v1");
    let mut out = String::new();
    out.push_str("# rotorsim-csv schema=molecule-v1\n");
    out.push_str(&format!("# manifest_sha={sha}\n"));
    out.push_str(
        "molecule,d_debye,b_ghz,e_kv_cm_at_u1,e_tabulated,r_nm_at_g1,r_tabulated,u_at_tabulated,g_at_tabulated\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.name,
            fmt(r.dipole_debye),
            fmt(r.rot_const_ghz),
            fmt(r.field_at_u1),
            fmt(r.field_ref),
            fmt(r.spacing_at_g1),
            fmt(r.spacing_ref),
            fmt(r.u_at_ref),
            fmt(r.g_at_ref),
        ));
    }
    Ok(out)
}

/// Write a string atomically enough for our purposes.
pub fn write_output(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossover_midpoint_linear_interpolation() {
        let pts = [(1.0, 0.1), (1.25, 0.2), (1.5, 0.5), (1.75, 0.8), (2.0, 0.9)];
        let mid = crossover_midpoint(&pts).unwrap();
        assert!((mid - 1.5).abs() < 1e-12, "got {mid}");
        assert!(crossover_midpoint(&[(1.0, 0.5)]).is_none());
    }

    #[test]
    fn molecule_csv_is_deterministic_and_complete() {
        let a = molecule_csv().unwrap();
        let b = molecule_csv().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.lines().count(), 2 + 1 + 9);
        assert!(a.contains("CsI"));
    }

    #[test]
    fn quantumness_scan_rejects_nonzero_other_axis() {
        let mut base = RunConfig::desk(Geometry::Triangular, 12, 0.0, 0.5, 1);
        base.sweeps_equil = 10;
        base.sweeps_measure = 64;
        assert!(quantumness_scan(&base, QuantumnessVariable::G, &[0.5]).is_err());
        base.u = 0.0;
        base.g = 1.0;
        assert!(quantumness_scan(&base, QuantumnessVariable::U, &[0.5]).is_err());
    }

    #[test]
    fn convergence_scan_validates_sorted_values() {
        let base = RunConfig::desk(Geometry::Square, 16, 1.0, 0.0, 1);
        assert!(convergence_scan(&base, ScanVariable::Beta, &[4.2, 2.1]).is_err());
        assert!(convergence_scan(&base, ScanVariable::Beta, &[]).is_err());
    }

    #[test]
    fn lattice_energy_csv_has_schema_header() {
        let (csv, manifest) = lattice_energy_csv(
            Geometry::Square,
            &[16],
            Convention::PeriodicSum,
            CutoffPolicy::Radius(40.0),
        )
        .unwrap();
        assert!(csv.starts_with("# rotorsim-csv schema=lattice-energy-v1\n# manifest_sha="));
        assert!(csv.contains("striped(axis0)"));
        assert!(manifest.contains("lattice-energy"));
    }
}
