//! Ground-state path-integral Monte Carlo for dipolar rotors pinned to the
//! sites of 2D triangular and square lattices, with the classical-ordering
//! analysis, self-consistent mean-field solver, and convergence tooling
//! needed to map the orientational phase diagram.

pub mod config;
pub mod constants;
pub mod error;
pub mod estimators;
pub mod lattice;
pub mod meanfield;
pub mod numerics;
pub mod propagator;
pub mod sampler;
pub mod trial;
pub mod units;

pub mod drivers;

pub use config::{Backend, Convention, CutoffPolicy, Geometry, RunConfig, RunManifest, TrialKind};
pub use error::{Error, Result};
pub use lattice::{LatticeSystem, OrderingPattern};
pub use propagator::{MpeCoefficients, PropagatorTable};
pub use sampler::{ChainState, PathConfiguration};
pub use trial::TrialWF;
pub use units::{MoleculeParams, ReducedParams};
