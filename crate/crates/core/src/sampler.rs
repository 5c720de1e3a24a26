//! The PIGS Markov chain: path storage, Metropolis moves (multilevel
//! bisection, end-bead, rigid whole-rotor rotations), sweep scheduling, and
//! the middle-bead / end-bead measurement hooks.
//!
//! Interior beads are proposed from exact free-rotor bridges: cos γ to the
//! left neighbor is drawn from the tabulated kernel density by inverse CDF and
//! the draw is thinned against the right kernel with its maximum as a rigorous
//! envelope (the table is positive and monotone by construction). Free-kernel
//! factors therefore cancel exactly from every acceptance ratio, which keeps
//! the free path rejection-free and reduces bisection acceptances to
//! potential-action ratios.

use crate::config::{Backend, Geometry, RunConfig};
use crate::error::{Error, Result};
use crate::lattice::{classical_minimum, LatticeSystem, OrderingPattern};
use crate::propagator::{
    mpe6_group_rel_weight, mpe_coefficients, MpeCoefficients, PropagatorSet,
};
use crate::trial::TrialWF;
use nalgebra::{Rotation3, UnitQuaternion, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

/// (M+1) beads × N rotor orientations, bead-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConfiguration {
    n_rotors: usize,
    n_links: usize,
    beads: Vec<[f64; 3]>,
}

impl PathConfiguration {
    /// Straight world lines along `init`, renormalized.
    pub fn aligned(n_rotors: usize, n_links: usize, init: Vector3<f64>) -> Self {
        let v = init.normalize();
        PathConfiguration {
            n_rotors,
            n_links,
            beads: vec![[v.x, v.y, v.z]; (n_links + 1) * n_rotors],
        }
    }

    #[inline]
    pub fn n_rotors(&self) -> usize {
        self.n_rotors
    }

    #[inline]
    pub fn n_links(&self) -> usize {
        self.n_links
    }

    #[inline]
    pub fn middle(&self) -> usize {
        self.n_links / 2
    }

    #[inline]
    pub fn get(&self, bead: usize, rotor: usize) -> Vector3<f64> {
        let v = &self.beads[bead * self.n_rotors + rotor];
        Vector3::new(v[0], v[1], v[2])
    }

    /// Store an orientation, renormalizing against floating-point drift.
    #[inline]
    pub fn set(&mut self, bead: usize, rotor: usize, v: Vector3<f64>) {
        let norm = v.norm();
        debug_assert!((norm - 1.0).abs() < 1e-6, "orientation drifted: |n| = {norm}");
        let v = v / norm;
        self.beads[bead * self.n_rotors + rotor] = [v.x, v.y, v.z];
    }

    /// All rotor orientations at one bead.
    pub fn bead(&self, bead: usize) -> Vec<Vector3<f64>> {
        (0..self.n_rotors).map(|i| self.get(bead, i)).collect()
    }

    /// Path with imaginary time reversed (bead k ↔ bead M-k).
    pub fn reversed(&self) -> Self {
        let mut out = self.clone();
        for k in 0..=self.n_links {
            for i in 0..self.n_rotors {
                out.set(k, i, self.get(self.n_links - k, i));
            }
        }
        out
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.beads
            .iter()
            .map(|b| ((b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveTally {
    pub proposed: u64,
    pub accepted: u64,
}

impl MoveTally {
    fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        if accepted {
            self.accepted += 1;
        }
    }

    pub fn acceptance(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MoveStats {
    /// Indexed by bisection level - 1.
    pub bisection: Vec<MoveTally>,
    pub end_moves: MoveTally,
    pub azimuth: MoveTally,
    pub rotation: MoveTally,
    /// Bridge rejection-loop overflows (diagnostic; expected zero).
    pub bridge_overflows: u64,
}

/// Immutable per-run context shared by all chains.
pub struct SamplerContext<'a> {
    pub lattice: &'a LatticeSystem,
    pub props: &'a PropagatorSet,
    pub trial: TrialWF,
    pub u: f64,
    pub g: f64,
    /// Fine link step (τ̃ for primitive, τ̃/4 for mpe6).
    pub tau_fine: f64,
    pub backend: Backend,
    pub coeff: MpeCoefficients,
    pub levels: Vec<u32>,
    pub repeats: usize,
}

impl<'a> SamplerContext<'a> {
    pub fn new(
        config: &RunConfig,
        lattice: &'a LatticeSystem,
        props: &'a PropagatorSet,
        trial: TrialWF,
    ) -> Result<Self> {
        let tau_fine = match config.backend {
            Backend::Primitive => config.tau,
            Backend::Mpe6 => config.tau / 4.0,
        };
        if (props.tau_fine - tau_fine).abs() > 1e-12 {
            return Err(Error::config("propagator ladder does not match the run tau"));
        }
        Ok(SamplerContext {
            lattice,
            props,
            trial,
            u: config.u,
            g: config.g,
            tau_fine,
            backend: config.backend,
            coeff: mpe_coefficients(),
            levels: (1..=config.max_bisection_level).collect(),
            repeats: config.bisection_repeats,
        })
    }

    /// Fine link count of the stored path.
    pub fn fine_links(&self, config: &RunConfig) -> usize {
        match config.backend {
            Backend::Primitive => config.links(),
            Backend::Mpe6 => 4 * config.links(),
        }
    }

    /// Log of the full path weight (kernel factors, potential action, trial
    /// ends). Test and checkpoint diagnostics; the moves only ever use ratios.
    pub fn path_log_weight(&self, path: &PathConfiguration) -> f64 {
        let m = path.n_links();
        let fine = self.props.fine();
        let mut log_w = self.trial.evaluate_log(&path.bead(0))
            + self.trial.evaluate_log(&path.bead(m));
        for k in 0..m {
            for i in 0..path.n_rotors() {
                let dot = path.get(k, i).dot(&path.get(k + 1, i)).clamp(-1.0, 1.0);
                log_w += fine.log_value_unchecked(dot);
            }
        }
        match self.backend {
            Backend::Primitive => {
                for k in 0..=m {
                    let w = if k == 0 || k == m { 0.5 } else { 1.0 };
                    log_w -=
                        w * self.tau_fine * self.lattice.potential_total(&path.bead(k), self.u, self.g);
                }
            }
            Backend::Mpe6 => {
                let tau_group = 4.0 * self.tau_fine;
                for group in 0..(m / 4) {
                    let v: [f64; 5] = std::array::from_fn(|k| {
                        self.lattice
                            .potential_total(&path.bead(4 * group + k), self.u, self.g)
                    });
                    let w = mpe6_group_rel_weight(&v, tau_group, &self.coeff)
                        .expect("valid path has positive mpe6 weight");
                    log_w += w.ln();
                }
            }
        }
        log_w
    }
}

/// One Markov chain: path, RNG, statistics, caches.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainState {
    pub path: PathConfiguration,
    pub rng: ChaCha8Rng,
    pub stats: MoveStats,
    pub sweeps_done: u64,
    /// Negative-weight events / group evaluations (mpe6 validity monitor).
    pub negative_weight_events: u64,
    pub weight_evaluations: u64,
    /// Per-bead total potential cache (mpe6 only).
    #[serde(default)]
    v_cache: Vec<f64>,
}

impl ChainState {
    pub fn new(ctx: &SamplerContext, config: &RunConfig, stream: u64) -> Self {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(stream);
        // start from the classical minimum, with the chain's own draw among
        // its degenerate variants (azimuth for the polarized pattern, axis
        // and sign for stripes), so the spontaneously broken direction is
        // uniform across independent chains
        let minimum = classical_minimum(ctx.lattice, ctx.u, ctx.g)
            .expect("validated couplings always have a classical minimum");
        let pattern = match minimum.pattern {
            OrderingPattern::Striped { .. } => {
                let axes = match ctx.lattice.geometry {
                    Geometry::Triangular => 3,
                    Geometry::Square => 2,
                };
                OrderingPattern::Striped {
                    axis: rng.gen_range(0..axes),
                }
            }
            other => other,
        };
        let base = pattern
            .orientations(ctx.lattice)
            .expect("catalog patterns fit their lattice");
        let chi = minimum.cant;
        let phi = rng.gen::<f64>() * std::f64::consts::TAU;
        let spin = Rotation3::from_axis_angle(&Vector3::z_axis(), phi);
        let flip = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let m = ctx.fine_links(config);
        let mut path = PathConfiguration::aligned(ctx.lattice.n, m, Vector3::z());
        for (rotor, b) in base.iter().enumerate() {
            let canted = Vector3::new(b.x * chi.cos(), b.y * chi.cos(), chi.sin());
            let oriented = match pattern {
                // the polarized direction is continuously degenerate
                OrderingPattern::PolarizedInPlane { .. } => spin * canted,
                // stripes and checkerboards carry a global sign freedom
                _ => {
                    let mut v = canted * flip;
                    v.z = canted.z;
                    v
                }
            };
            for bead in 0..=m {
                path.set(bead, rotor, oriented);
            }
        }
        let mut chain = ChainState {
            path,
            rng,
            stats: MoveStats {
                bisection: vec![MoveTally::default(); ctx.levels.len()],
                ..Default::default()
            },
            sweeps_done: 0,
            negative_weight_events: 0,
            weight_evaluations: 0,
            v_cache: Vec::new(),
        };
        if ctx.backend == Backend::Mpe6 {
            chain.refresh_v_cache(ctx);
        }
        chain
    }

    pub fn refresh_v_cache(&mut self, ctx: &SamplerContext) {
        self.v_cache = (0..=self.path.n_links())
            .map(|k| ctx.lattice.potential_total(&self.path.bead(k), ctx.u, ctx.g))
            .collect();
    }

    /// Fraction of group evaluations that produced a non-positive weight.
    pub fn negative_weight_fraction(&self) -> f64 {
        if self.weight_evaluations == 0 {
            0.0
        } else {
            self.negative_weight_events as f64 / self.weight_evaluations as f64
        }
    }
}

/// Orientation at angular distance `acos(cos_psi)` from `axis`, azimuth `chi`.
fn orient_about(axis: &Vector3<f64>, cos_psi: f64, chi: f64) -> Vector3<f64> {
    let e1 = if axis.z.abs() < 0.9 {
        axis.cross(&Vector3::z()).normalize()
    } else {
        axis.cross(&Vector3::x()).normalize()
    };
    let e2 = axis.cross(&e1);
    let sin_psi = (1.0 - cos_psi * cos_psi).max(0.0).sqrt();
    (axis * cos_psi + (e1 * chi.cos() + e2 * chi.sin()) * sin_psi).normalize()
}

const BRIDGE_CAP: usize = 100_000;

/// Exact draw from p(n) ∝ K_left(a·n) K_right(n·b).
///
/// Proposes n ~ K_left via inverse CDF around `a` and accepts with
/// K_right(n·b)/max K_right, a true envelope by table monotonicity.
fn sample_bridge(
    rng: &mut ChaCha8Rng,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    left: &crate::propagator::PropagatorTable,
    right: &crate::propagator::PropagatorTable,
    overflows: &mut u64,
) -> Vector3<f64> {
    let right_max = right.max_value();
    for _ in 0..BRIDGE_CAP {
        let cos_psi = left.sample_cos(rng.gen::<f64>());
        let chi = rng.gen::<f64>() * std::f64::consts::TAU;
        let n = orient_about(a, cos_psi, chi);
        let ratio = right.value_unchecked(n.dot(b).clamp(-1.0, 1.0)) / right_max;
        if rng.gen::<f64>() < ratio {
            return n;
        }
    }
    // statistically unreachable from any valid state; fall back to the
    // geodesic midpoint so the chain cannot wedge
    *overflows += 1;
    (a + b).try_normalize(1e-12).unwrap_or(*a)
}

/// End selector for end-bead moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WhichEnd {
    Lower,
    Upper,
}

pub struct Sampler<'a> {
    pub ctx: SamplerContext<'a>,
}

impl<'a> Sampler<'a> {
    pub fn new(ctx: SamplerContext<'a>) -> Self {
        Sampler { ctx }
    }

    /// Potential change at one bead when rotor `i` reorients.
    #[inline]
    fn delta_v(
        &self,
        path: &PathConfiguration,
        bead: usize,
        rotor: usize,
        old: &Vector3<f64>,
        new: &Vector3<f64>,
    ) -> f64 {
        let slice = path.bead(bead);
        self.ctx
            .lattice
            .potential_delta(rotor, &slice, *old, *new, self.ctx.u, self.ctx.g)
    }

    /// Multilevel bisection of a 2^level-link segment of one rotor's path.
    pub fn bisection_move(&self, chain: &mut ChainState, rotor: usize, level: u32) -> bool {
        let m = chain.path.n_links();
        let seg = 1usize << level;
        debug_assert!(seg <= m, "segment must fit the path");
        let start = chain.rng.gen_range(0..=(m - seg));
        let accepted = match self.ctx.backend {
            Backend::Primitive => self.bisect_primitive(chain, rotor, level, start),
            Backend::Mpe6 => self.bisect_mpe6(chain, rotor, level, start),
        };
        chain.stats.bisection[(level - 1) as usize].record(accepted);
        accepted
    }

    fn bisect_primitive(
        &self,
        chain: &mut ChainState,
        rotor: usize,
        level: u32,
        start: usize,
    ) -> bool {
        let seg = 1usize << level;
        let tau = self.ctx.tau_fine;
        // working copy of the segment; index k = bead start + k
        let mut work: Vec<Vector3<f64>> = (0..=seg).map(|k| chain.path.get(start + k, rotor)).collect();
        let old: Vec<Vector3<f64>> = work.clone();
        let mut delta_prev = 0.0; // Σ ΔV over beads placed before this stage
        let mut placed: Vec<usize> = Vec::with_capacity(seg - 1);
        for stage in 1..=level {
            let half = 1usize << (level - stage);
            let table = self.ctx.props.level(level - stage);
            let mut pos = half;
            while pos < seg {
                let n = sample_bridge(
                    &mut chain.rng,
                    &work[pos - half],
                    &work[pos + half],
                    table,
                    table,
                    &mut chain.stats.bridge_overflows,
                );
                work[pos] = n;
                placed.push(pos);
                pos += 2 * half;
            }
            // stage action: τ_stage Σ_{placed so far} ΔV, telescoped against
            // the previous stage
            // τ_stage Σ_{placed so far} ΔV, telescoped against the previous
            // stage (τ_{stage-1} = 2 τ_stage)
            let tau_stage = tau * half as f64;
            let mut delta_now = 0.0;
            for &p in &placed {
                delta_now += self.delta_v(&chain.path, start + p, rotor, &old[p], &work[p]);
            }
            let log_accept = -tau_stage * delta_now + 2.0 * tau_stage * delta_prev;
            if log_accept < 0.0 && chain.rng.gen::<f64>() >= log_accept.exp() {
                return false;
            }
            delta_prev = delta_now;
        }
        for k in 1..seg {
            chain.path.set(start + k, rotor, work[k]);
        }
        true
    }

    fn bisect_mpe6(
        &self,
        chain: &mut ChainState,
        rotor: usize,
        level: u32,
        start: usize,
    ) -> bool {
        let seg = 1usize << level;
        let mut work: Vec<Vector3<f64>> = (0..=seg).map(|k| chain.path.get(start + k, rotor)).collect();
        let old: Vec<Vector3<f64>> = work.clone();
        // hierarchical free-bridge proposal of every interior bead
        for stage in 1..=level {
            let half = 1usize << (level - stage);
            let table = self.ctx.props.level(level - stage);
            let mut pos = half;
            while pos < seg {
                work[pos] = sample_bridge(
                    &mut chain.rng,
                    &work[pos - half],
                    &work[pos + half],
                    table,
                    table,
                    &mut chain.stats.bridge_overflows,
                );
                pos += 2 * half;
            }
        }
        // group-weight ratio over every mpe6 group overlapping the interior
        let interior = (start + 1)..(start + seg);
        let Some(log_ratio) = self.mpe6_log_ratio(chain, rotor, interior.clone(), |bead| {
            work[bead - start]
        }) else {
            chain.weight_evaluations += 1;
            chain.negative_weight_events += 1;
            return false;
        };
        if log_ratio < 0.0 && chain.rng.gen::<f64>() >= log_ratio.exp() {
            return false;
        }
        let deltas: Vec<(usize, f64)> = interior
            .clone()
            .map(|bead| {
                (
                    bead,
                    self.delta_v(&chain.path, bead, rotor, &old[bead - start], &work[bead - start]),
                )
            })
            .collect();
        for k in 1..seg {
            chain.path.set(start + k, rotor, work[k]);
        }
        for (bead, dv) in deltas {
            chain.v_cache[bead] += dv;
        }
        true
    }

    /// Log ratio Π w_rel(new)/w_rel(old) over groups whose beads intersect
    /// `touched`, with rotor `rotor` reoriented to `new_at(bead)` inside.
    /// Returns None if any new group weight is non-positive.
    fn mpe6_log_ratio(
        &self,
        chain: &mut ChainState,
        rotor: usize,
        touched: std::ops::Range<usize>,
        new_at: impl Fn(usize) -> Vector3<f64>,
    ) -> Option<f64> {
        let m = chain.path.n_links();
        let tau_group = 4.0 * self.ctx.tau_fine;
        // group j spans beads [4j, 4j+4]; it overlaps [start, end) iff
        // 4j+4 >= start and 4j < end
        let g_lo = touched.start.saturating_sub(4).div_ceil(4);
        let g_hi = ((touched.end - 1) / 4).min(m / 4 - 1);
        let mut log_ratio = 0.0;
        for group in g_lo..=g_hi {
            let base = 4 * group;
            // groups not overlapping the touched range contribute nothing
            if base + 4 < touched.start || base >= touched.end {
                continue;
            }
            let mut v_old = [0.0; 5];
            let mut v_new = [0.0; 5];
            for k in 0..5 {
                let bead = base + k;
                v_old[k] = chain.v_cache[bead];
                v_new[k] = if touched.contains(&bead) {
                    let old = chain.path.get(bead, rotor);
                    v_old[k] + self.delta_v(&chain.path, bead, rotor, &old, &new_at(bead))
                } else {
                    v_old[k]
                };
            }
            chain.weight_evaluations += 1;
            let w_new = mpe6_group_rel_weight(&v_new, tau_group, &self.ctx.coeff)?;
            let w_old = mpe6_group_rel_weight(&v_old, tau_group, &self.ctx.coeff)
                .expect("committed state has positive weight");
            log_ratio += (w_new / w_old).ln();
        }
        Some(log_ratio)
    }

    /// Redraw a terminal bead from the kernel bridge to its neighbor; the
    /// trial function and the end potential weight enter the acceptance.
    pub fn end_bead_move(&self, chain: &mut ChainState, rotor: usize, end: WhichEnd) -> bool {
        let m = chain.path.n_links();
        let (bead, neighbor) = match end {
            WhichEnd::Lower => (0, 1),
            WhichEnd::Upper => (m, m - 1),
        };
        let anchor = chain.path.get(neighbor, rotor);
        let table = self.ctx.props.fine();
        let cos_psi = table.sample_cos(chain.rng.gen::<f64>());
        let chi = chain.rng.gen::<f64>() * std::f64::consts::TAU;
        let new = orient_about(&anchor, cos_psi, chi);
        let old = chain.path.get(bead, rotor);
        let log_trial = self.ctx.trial.log_delta(&old, &new);
        let accepted = match self.ctx.backend {
            Backend::Primitive => {
                let dv = self.delta_v(&chain.path, bead, rotor, &old, &new);
                let log_a = log_trial - 0.5 * self.ctx.tau_fine * dv;
                log_a >= 0.0 || chain.rng.gen::<f64>() < log_a.exp()
            }
            Backend::Mpe6 => {
                match self.mpe6_log_ratio(chain, rotor, bead..bead + 1, |_| new) {
                    Some(log_ratio) => {
                        let log_a = log_trial + log_ratio;
                        log_a >= 0.0 || chain.rng.gen::<f64>() < log_a.exp()
                    }
                    None => {
                        chain.negative_weight_events += 1;
                        false
                    }
                }
            }
        };
        if accepted {
            let dv = self.delta_v(&chain.path, bead, rotor, &old, &new);
            chain.path.set(bead, rotor, new);
            if self.ctx.backend == Backend::Mpe6 {
                chain.v_cache[bead] += dv;
            }
        }
        chain.stats.end_moves.record(accepted);
        accepted
    }

    /// Rigid rotation of one rotor's whole path about ê: the kinetic action
    /// and the field term are exactly invariant, so only the interaction
    /// enters the test (rejection-free at g = 0).
    pub fn azimuth_move(&self, chain: &mut ChainState, rotor: usize) -> bool {
        let theta = chain.rng.gen::<f64>() * std::f64::consts::TAU;
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), theta);
        let accepted = self.rigid_rotation(chain, rotor, &rot);
        chain.stats.azimuth.record(accepted);
        accepted
    }

    /// Rigid uniformly-random rotation of one rotor's whole path: kinetic
    /// action invariant; field and interaction are Metropolis-tested
    /// (rejection-free at u = g = 0).
    pub fn rotation_move(&self, chain: &mut ChainState, rotor: usize) -> bool {
        let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
            rand_distr::StandardNormal.sample(&mut chain.rng),
            rand_distr::StandardNormal.sample(&mut chain.rng),
            rand_distr::StandardNormal.sample(&mut chain.rng),
            rand_distr::StandardNormal.sample(&mut chain.rng),
        ));
        let rot = q.to_rotation_matrix();
        let accepted = self.rigid_rotation(chain, rotor, &rot);
        chain.stats.rotation.record(accepted);
        accepted
    }

    fn rigid_rotation(
        &self,
        chain: &mut ChainState,
        rotor: usize,
        rot: &Rotation3<f64>,
    ) -> bool {
        let m = chain.path.n_links();
        let mut deltas = Vec::with_capacity(m + 1);
        for bead in 0..=m {
            let old = chain.path.get(bead, rotor);
            let new = rot * old;
            deltas.push(self.delta_v(&chain.path, bead, rotor, &old, &new));
        }
        let old0 = chain.path.get(0, rotor);
        let old_m = chain.path.get(m, rotor);
        let log_trial = self.ctx.trial.log_delta(&old0, &(rot * old0))
            + self.ctx.trial.log_delta(&old_m, &(rot * old_m));
        let accepted = match self.ctx.backend {
            Backend::Primitive => {
                let mut action = 0.0;
                for (bead, dv) in deltas.iter().enumerate() {
                    let w = if bead == 0 || bead == m { 0.5 } else { 1.0 };
                    action += w * dv;
                }
                let log_a = log_trial - self.ctx.tau_fine * action;
                log_a >= 0.0 || chain.rng.gen::<f64>() < log_a.exp()
            }
            Backend::Mpe6 => {
                let tau_group = 4.0 * self.ctx.tau_fine;
                let mut log_ratio = 0.0;
                let mut valid = true;
                for group in 0..(m / 4) {
                    let base = 4 * group;
                    let v_old: [f64; 5] = std::array::from_fn(|k| chain.v_cache[base + k]);
                    let v_new: [f64; 5] =
                        std::array::from_fn(|k| chain.v_cache[base + k] + deltas[base + k]);
                    chain.weight_evaluations += 1;
                    match mpe6_group_rel_weight(&v_new, tau_group, &self.ctx.coeff) {
                        Some(w_new) => {
                            let w_old = mpe6_group_rel_weight(&v_old, tau_group, &self.ctx.coeff)
                                .expect("committed state has positive weight");
                            log_ratio += (w_new / w_old).ln();
                        }
                        None => {
                            chain.negative_weight_events += 1;
                            valid = false;
                            break;
                        }
                    }
                }
                valid && {
                    let log_a = log_trial + log_ratio;
                    log_a >= 0.0 || chain.rng.gen::<f64>() < log_a.exp()
                }
            }
        };
        if accepted {
            for bead in 0..=m {
                let old = chain.path.get(bead, rotor);
                chain.path.set(bead, rotor, rot * old);
                if self.ctx.backend == Backend::Mpe6 {
                    chain.v_cache[bead] += deltas[bead];
                }
            }
        }
        accepted
    }

    /// One sweep: per rotor, `repeats` bisections at each configured level,
    /// an end move per end, and one rigid whole-path rotation.
    ///
    /// The rigid move is a uniform SO(3) rotation: rejection-free in the free
    /// case and self-suppressing in ordered phases. A large-angle azimuth
    /// rotation about ê is implemented too ([`Self::azimuth_move`]) but kept
    /// out of the default mix: it would artificially decorrelate the
    /// spontaneously broken polarization direction that the in-plane order
    /// parameter's outer mean is defined over.
    pub fn sweep(&self, chain: &mut ChainState) {
        let n = chain.path.n_rotors();
        for _ in 0..self.ctx.repeats {
            for &level in &self.ctx.levels {
                for rotor in 0..n {
                    self.bisection_move(chain, rotor, level);
                }
            }
        }
        for rotor in 0..n {
            self.end_bead_move(chain, rotor, WhichEnd::Lower);
            self.end_bead_move(chain, rotor, WhichEnd::Upper);
        }
        for rotor in 0..n {
            self.rotation_move(chain, rotor);
        }
        if self.ctx.backend == Backend::Mpe6 {
            chain.refresh_v_cache(&self.ctx);
        }
        chain.sweeps_done += 1;
    }

    /// Middle-bead diagonal observables and end-bead local energy.
    pub fn measure(&self, chain: &ChainState) -> SampleRow {
        let path = &chain.path;
        let mid = path.bead(path.middle());
        let n = path.n_rotors() as f64;
        let mut mean = Vector3::zeros();
        for v in &mid {
            mean += v;
        }
        mean /= n;
        let (stripe_x, stripe_y, checker) = if self.ctx.lattice.geometry == Geometry::Square {
            let mut sx = 0.0;
            let mut sy = 0.0;
            let mut cb = 0.0;
            for (v, &(row, col)) in mid.iter().zip(&self.ctx.lattice.coords) {
                let sr = if row.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let sc = if col.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                sx += sr * v.x;
                sy += sc * v.y;
                cb += sr * sc * v.z;
            }
            (Some((sx / n).abs()), Some((sy / n).abs()), Some((cb / n).abs()))
        } else {
            (None, None, None)
        };
        let v_mid = self.ctx.lattice.potential_total(&mid, self.ctx.u, self.ctx.g) / n;
        let e_end = 0.5
            * (self
                .ctx
                .trial
                .local_energy(&path.bead(0), self.ctx.lattice, self.ctx.u, self.ctx.g)
                + self.ctx.trial.local_energy(
                    &path.bead(path.n_links()),
                    self.ctx.lattice,
                    self.ctx.u,
                    self.ctx.g,
                ))
            / n;
        SampleRow {
            mean_x: mean.x,
            mean_y: mean.y,
            mean_z: mean.z,
            stripe_x,
            stripe_y,
            checker,
            v_mid,
            e_end,
        }
    }
}

/// Per-sweep measurement record (middle bead unless noted; per-particle units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub mean_x: f64,
    pub mean_y: f64,
    pub mean_z: f64,
    pub stripe_x: Option<f64>,
    pub stripe_y: Option<f64>,
    pub checker: Option<f64>,
    /// Potential per particle at the middle bead.
    pub v_mid: f64,
    /// Trial local energy per particle averaged over both ends.
    pub e_end: f64,
}

/// Versioned snapshot sufficient for bitwise-reproducible resume.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub manifest_sha: String,
    pub chain_stream: u64,
    pub equilibrated: bool,
    pub chain: ChainState,
    pub samples: Vec<SampleRow>,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Checkpoint(format!("unreadable checkpoint: {e}")))
    }
}
