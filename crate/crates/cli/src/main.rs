//! Command-line front end: one subcommand per study (classical ordering
//! report, single PIGS runs, phase scans, convergence scans, the quantumness
//! ratio, molecule conversions).
//!
//! Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 I/O error.

use clap::{Args, Parser, Subcommand};
use rotorsim_core::config::{Convention, CutoffPolicy, Geometry, RunConfig};
use rotorsim_core::drivers::{
    self, PigsIoOptions, QuantumnessVariable, ScanVariable,
};
use rotorsim_core::error::Error as CoreError;
use rotorsim_core::meanfield::{scf_best_of_seeds, ScfOptions};
use rotorsim_core::LatticeSystem;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Parser)]
#[command(name = "rotorsim", version, about = "Dipolar rotors on 2D lattices: ground-state path-integral laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Lattice geometry: triangular | square.
    #[arg(long)]
    geometry: String,
    /// Rotor count (defaults to the desk-scale size for the geometry).
    #[arg(long)]
    n: Option<usize>,
    /// Base RNG seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Equilibration sweeps per run.
    #[arg(long)]
    sweeps_equil: Option<usize>,
    /// Measurement sweeps per run.
    #[arg(long)]
    sweeps_measure: Option<usize>,
    /// Output CSV path (manifest lands next to it).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Classical ordering energies per particle over lattice sizes.
    LatticeEnergy {
        /// triangular | square
        #[arg(long)]
        geometry: String,
        /// Comma-separated site counts, e.g. 12,48,108.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        /// periodic-sum | minimum-image
        #[arg(long, default_value = "periodic-sum")]
        convention: String,
        /// Cutoff radius in lattice units (the 100-site figure convention).
        #[arg(long, default_value_t = 100.0)]
        radius: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// One PIGS run from a TOML config file, with checkpointing.
    PigsRun {
        /// Flat key-value run document.
        #[arg(long)]
        config: PathBuf,
        /// Resume from a checkpoint file (must match the run manifest).
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Checkpoint every this many measurement sweeps.
        #[arg(long)]
        checkpoint_every: Option<u64>,
    },
    /// Order-parameter surface over a (g, u) grid.
    PhaseScan {
        #[command(flatten)]
        grid: GridArgs,
        /// Comma-separated g values.
        #[arg(long, value_delimiter = ',')]
        g_grid: Vec<f64>,
        /// Comma-separated u values.
        #[arg(long, value_delimiter = ',')]
        u_grid: Vec<f64>,
        /// primitive | mpe6
        #[arg(long, default_value = "primitive")]
        backend: String,
        /// Also emit the self-consistent mean-field surface for comparison.
        #[arg(long)]
        with_meanfield: bool,
    },
    /// One run per tau or beta value at fixed Hamiltonian parameters.
    ConvergenceScan {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        g: f64,
        #[arg(long)]
        u: f64,
        /// tau | beta
        #[arg(long)]
        vary: String,
        /// Comma-separated values, ascending.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
    /// PIGS potential energy against the classical minimum along a cut.
    Quantumness {
        #[command(flatten)]
        grid: GridArgs,
        /// g | u (the other parameter is fixed at zero)
        #[arg(long)]
        vary: String,
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
    /// Conversion table for the reference dipolar molecules.
    Molecule {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn desk_n(geometry: Geometry) -> usize {
    match geometry {
        Geometry::Triangular => 12,
        Geometry::Square => 16,
    }
}

fn base_config(grid: &GridArgs) -> Result<RunConfig, CoreError> {
    let geometry = Geometry::from_str(&grid.geometry)?;
    let n = grid.n.unwrap_or_else(|| desk_n(geometry));
    let mut cfg = RunConfig::desk(geometry, n, 0.0, 0.0, grid.seed);
    if let Some(s) = grid.sweeps_equil {
        cfg.sweeps_equil = s;
    }
    if let Some(s) = grid.sweeps_measure {
        cfg.sweeps_measure = s;
    }
    Ok(cfg)
}

fn write(path: &PathBuf, contents: &str) -> Result<(), CoreError> {
    drivers::write_output(path, contents)
}

fn manifest_path(out: &PathBuf) -> PathBuf {
    out.with_extension("manifest.json")
}

fn run(cli: Cli) -> Result<(), CoreError> {
    match cli.command {
        Command::LatticeEnergy {
            geometry,
            sizes,
            convention,
            radius,
            out,
        } => {
            let geometry = Geometry::from_str(&geometry)?;
            let convention = Convention::from_str(&convention)?;
            let (csv, manifest) = drivers::lattice_energy_csv(
                geometry,
                &sizes,
                convention,
                CutoffPolicy::Radius(radius),
            )?;
            write(&out, &csv)?;
            write(&manifest_path(&out), &manifest)?;
            println!("{}", csv.lines().take(8).collect::<Vec<_>>().join("\n"));
            Ok(())
        }
        Command::PigsRun {
            config,
            resume,
            checkpoint_every,
        } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg = RunConfig::from_toml_str(&text)?;
            let opts = PigsIoOptions {
                checkpoint_every,
                resume_from: resume,
            };
            let out = drivers::run_pigs_with_io(&cfg, &opts)?;
            println!(
                "phi_pol={:.6}±{:.6} phi_z={:.6}±{:.6} v_mid={:.6}±{:.6} e_total={:.6}±{:.6}",
                out.report.phi_pol.0,
                out.report.phi_pol.1,
                out.report.phi_z.0,
                out.report.phi_z.1,
                out.report.v_mid.0,
                out.report.v_mid.1,
                out.report.e_total.0,
                out.report.e_total.1
            );
            if out.backend_invalid {
                return Err(CoreError::Numerical(format!(
                    "negative-weight fraction {:.2e} exceeds the validity threshold",
                    out.negative_weight_fraction
                )));
            }
            Ok(())
        }
        Command::PhaseScan {
            grid,
            g_grid,
            u_grid,
            backend,
            with_meanfield,
        } => {
            let mut base = base_config(&grid)?;
            base.backend = rotorsim_core::Backend::from_str(&backend)?;
            let (csv, manifest, rows) = drivers::phase_scan_csv(&base, &g_grid, &u_grid)?;
            write(&grid.out, &csv)?;
            write(&manifest_path(&grid.out), &manifest)?;
            if with_meanfield {
                let lattice = LatticeSystem::build(
                    base.geometry,
                    base.n,
                    base.convention,
                    base.cutoff,
                    g_grid.iter().cloned().fold(1.0, f64::max),
                )?;
                let mut mf_rows = Vec::new();
                for &u in &u_grid {
                    for &g in &g_grid {
                        let (state, _) = scf_best_of_seeds(&lattice, u, g, ScfOptions::default())?;
                        mf_rows.push(drivers::MfRow {
                            geometry: base.geometry,
                            n: base.n,
                            g,
                            u,
                            phi_pol: state.phi_pol(),
                            phi_z: state.phi_z(),
                            phi_xy: state.phi_xy(&lattice).ok(),
                            phi_cb: state.phi_checkerboard(&lattice).ok(),
                            energy_per_particle: state.energy / base.n as f64,
                        });
                    }
                }
                let sha = drivers::sha256_hex(manifest.as_bytes());
                let mf_csv = drivers::meanfield_csv(&mf_rows, &sha);
                let mf_path = grid.out.with_extension("meanfield.csv");
                write(&mf_path, &mf_csv)?;
            }
            if rows.iter().any(|r| r.backend_invalid) {
                return Err(CoreError::Numerical(
                    "a scan point exceeded the negative-weight validity threshold".into(),
                ));
            }
            Ok(())
        }
        Command::ConvergenceScan {
            grid,
            g,
            u,
            vary,
            values,
        } => {
            let mut base = base_config(&grid)?;
            base.g = g;
            base.u = u;
            let vary = match vary.as_str() {
                "tau" => ScanVariable::Tau,
                "beta" => ScanVariable::Beta,
                other => return Err(CoreError::config(format!("vary must be tau|beta, got '{other}'"))),
            };
            let (csv, manifest, _) = drivers::convergence_scan_csv(&base, vary, &values)?;
            write(&grid.out, &csv)?;
            write(&manifest_path(&grid.out), &manifest)?;
            Ok(())
        }
        Command::Quantumness { grid, vary, values } => {
            let base = base_config(&grid)?;
            let vary = match vary.as_str() {
                "g" => QuantumnessVariable::G,
                "u" => QuantumnessVariable::U,
                other => return Err(CoreError::config(format!("vary must be g|u, got '{other}'"))),
            };
            let (csv, manifest, _) = drivers::quantumness_csv(&base, vary, &values)?;
            write(&grid.out, &csv)?;
            write(&manifest_path(&grid.out), &manifest)?;
            Ok(())
        }
        Command::Molecule { out } => {
            let csv = drivers::molecule_csv()?;
            match out {
                Some(path) => write(&path, &csv)?,
                None => print!("{csv}"),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CoreError::Config(_) | CoreError::Domain(_) => ExitCode::from(2),
                CoreError::Numerical(_) | CoreError::NonConvergence { .. } => ExitCode::from(3),
                CoreError::Io(_) | CoreError::Checkpoint(_) => ExitCode::from(4),
            }
        }
    }
}
