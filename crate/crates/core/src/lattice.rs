//! Lattice geometry, periodic-image bookkeeping, precomputed anisotropic
//! interaction tensors, the classical ordering catalog, and classical
//! energies.
//!
//! Pair couplings are stored as 3x3 tensors
//!
//!   S_ij = Σ_v [ |r_ij+v|⁻³ I − 3 |r_ij+v|⁻⁵ (r_ij+v)(r_ij+v)ᵀ ],
//!
//! summed over periodic copies `v` of the simulation cell out to a cutoff
//! radius. Under the periodic-sum convention each dipole also interacts with
//! its own periodic copies; that per-site term is what removes the finite-size
//! bias of the bare pair sum, so it is kept as a separate `self_tensor` and
//! enters every energy as ½ Σ_i n_i·S_self·n_i. The minimum-image convention
//! has no self copies and reproduces the (biased) textbook sums.

use crate::config::{Convention, CutoffPolicy, Geometry};
use crate::error::{Error, Result};
use nalgebra::{Matrix3, Vector2, Vector3};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Triangular lattice primitive vectors (spacing 1).
pub const TRI_A1: Vector2<f64> = Vector2::new(1.0, 0.0);
pub const TRI_A2: Vector2<f64> = Vector2::new(0.5, SQRT3 / 2.0);

/// Is `n` an admissible filling for the geometry?
///
/// Triangular cells are hexagonal supercells with N = 3L² sites (L even so
/// the striped orderings are commensurate); square cells are m×m with m even.
pub fn check_admissible(geometry: Geometry, n: usize) -> Result<()> {
    match geometry {
        Geometry::Triangular => {
            let l = ((n as f64) / 3.0).sqrt().round() as usize;
            if l >= 2 && l % 2 == 0 && 3 * l * l == n {
                Ok(())
            } else {
                Err(Error::config(format!(
                    "triangular N must be 3L^2 with even L >= 2 (12, 48, 108, ...), got {n}"
                )))
            }
        }
        Geometry::Square => {
            let m = (n as f64).sqrt().round() as usize;
            if m >= 2 && m % 2 == 0 && m * m == n {
                Ok(())
            } else {
                Err(Error::config(format!(
                    "square N must be m^2 with even m >= 2 (4, 16, 36, 64, ...), got {n}"
                )))
            }
        }
    }
}

/// Admissible sizes in increasing order, starting from the smallest.
pub fn admissible_sizes(geometry: Geometry, count: usize) -> Vec<usize> {
    (1..)
        .map(|k| match geometry {
            Geometry::Triangular => 3 * (2 * k) * (2 * k),
            Geometry::Square => (2 * (k + 1)) * (2 * (k + 1)),
        })
        .take(count)
        .collect()
}

/// All superlattice vectors i·T1 + j·T2 with |v| <= r_max + cell diameter.
///
/// Includes the zero vector. The index bounds come from the row spacings of
/// the image lattice, so no vector inside the disc is missed even for the
/// 60-degree rhombic generators.
pub fn image_vectors(t1: Vector2<f64>, t2: Vector2<f64>, r_max: f64) -> Vec<Vector2<f64>> {
    let lim = r_max + t1.norm() + t2.norm();
    let cross = (t1.x * t2.y - t1.y * t2.x).abs();
    let n1 = (lim * t2.norm() / cross).ceil() as i64 + 1;
    let n2 = (lim * t1.norm() / cross).ceil() as i64 + 1;
    let mut out = Vec::new();
    for i in -n1..=n1 {
        for j in -n2..=n2 {
            let v = t1 * i as f64 + t2 * j as f64;
            if v.norm() <= lim {
                out.push(v);
            }
        }
    }
    out
}

fn dipole_term(r: Vector2<f64>) -> Matrix3<f64> {
    let d2 = r.norm_squared();
    let d = d2.sqrt();
    let inv3 = 1.0 / (d2 * d);
    let inv5 = inv3 / d2;
    let mut m = Matrix3::zeros();
    m[(0, 0)] = inv3 - 3.0 * r.x * r.x * inv5;
    m[(1, 1)] = inv3 - 3.0 * r.y * r.y * inv5;
    m[(2, 2)] = inv3;
    m[(0, 1)] = -3.0 * r.x * r.y * inv5;
    m[(1, 0)] = m[(0, 1)];
    m
}

/// Periodic-sum pair tensor for displacement `rij`, keeping image terms with
/// |rij + v| <= r_max.
pub fn interaction_tensor(
    rij: Vector2<f64>,
    images: &[Vector2<f64>],
    r_max: f64,
) -> Result<Matrix3<f64>> {
    if rij.norm() < 1e-12 {
        return Err(Error::domain("coincident sites have no pair tensor"));
    }
    let mut s = Matrix3::zeros();
    for v in images {
        let r = rij + v;
        let d = r.norm();
        if d <= r_max && d > 1e-12 {
            s += dipole_term(r);
        }
    }
    Ok(s)
}

/// Interaction of a dipole with its own periodic copies: Σ_{v≠0} term(v).
pub fn self_image_tensor(images: &[Vector2<f64>], r_max: f64) -> Matrix3<f64> {
    let mut s = Matrix3::zeros();
    for v in images {
        let d = v.norm();
        if d > 1e-12 && d <= r_max {
            s += dipole_term(*v);
        }
    }
    s
}

/// Nearest-image pair tensor (single term).
pub fn minimum_image_tensor(
    rij: Vector2<f64>,
    t1: Vector2<f64>,
    t2: Vector2<f64>,
) -> Result<Matrix3<f64>> {
    let mut best = rij;
    let mut best_d = f64::INFINITY;
    for i in -2..=2i64 {
        for j in -2..=2i64 {
            let r = rij + t1 * i as f64 + t2 * j as f64;
            let d = r.norm();
            if d < best_d {
                best_d = d;
                best = r;
            }
        }
    }
    if best_d < 1e-12 {
        return Err(Error::domain("coincident sites have no pair tensor"));
    }
    Ok(dipole_term(best))
}

/// A lattice with all pair tensors precomputed.
#[derive(Debug, Clone)]
pub struct LatticeSystem {
    pub geometry: Geometry,
    pub n: usize,
    /// Site positions, nearest-neighbor spacing 1.
    pub sites: Vec<Vector2<f64>>,
    /// Integer site labels: (p, q) in primitive-vector coordinates for the
    /// triangular lattice, (row, col) for the square lattice.
    pub coords: Vec<(i64, i64)>,
    pub t1: Vector2<f64>,
    pub t2: Vector2<f64>,
    pub convention: Convention,
    pub r_max: f64,
    /// Row-major n*n pair tensors; diagonal entries are zero.
    pair: Vec<Matrix3<f64>>,
    /// Self-image tensor (zero under minimum-image).
    pub self_tensor: Matrix3<f64>,
}

impl LatticeSystem {
    pub fn build(
        geometry: Geometry,
        n: usize,
        convention: Convention,
        cutoff: CutoffPolicy,
        g: f64,
    ) -> Result<Self> {
        check_admissible(geometry, n)?;
        let (sites, coords, t1, t2) = match geometry {
            Geometry::Triangular => triangular_cell(n),
            Geometry::Square => square_cell(n),
        };
        let r_max = cutoff.resolve(g);
        let mut pair = vec![Matrix3::zeros(); n * n];
        let mut self_tensor = Matrix3::zeros();
        match convention {
            Convention::PeriodicSum => {
                let images = image_vectors(t1, t2, r_max);
                for i in 0..n {
                    for j in 0..i {
                        let s = interaction_tensor(sites[i] - sites[j], &images, r_max)?;
                        pair[i * n + j] = s;
                        pair[j * n + i] = s;
                    }
                }
                self_tensor = self_image_tensor(&images, r_max);
            }
            Convention::MinimumImage => {
                for i in 0..n {
                    for j in 0..i {
                        let s = minimum_image_tensor(sites[i] - sites[j], t1, t2)?;
                        pair[i * n + j] = s;
                        pair[j * n + i] = s;
                    }
                }
            }
        }
        Ok(LatticeSystem {
            geometry,
            n,
            sites,
            coords,
            t1,
            t2,
            convention,
            r_max,
            pair,
            self_tensor,
        })
    }

    #[inline]
    pub fn s(&self, i: usize, j: usize) -> &Matrix3<f64> {
        &self.pair[i * self.n + j]
    }

    /// Total potential −u Σ n_z + g [Σ_{j<i} n_i·S_ij·n_j + ½ Σ_i n_i·S_self·n_i],
    /// in hB units. No unit-norm validation; hot path.
    pub fn potential_total(&self, orientations: &[Vector3<f64>], u: f64, g: f64) -> f64 {
        debug_assert_eq!(orientations.len(), self.n);
        let mut field = 0.0;
        let mut pair = 0.0;
        let mut selfe = 0.0;
        for (i, ni) in orientations.iter().enumerate() {
            field += ni.z;
            selfe += (self.self_tensor * ni).dot(ni);
            for (j, nj) in orientations.iter().enumerate().take(i) {
                pair += (self.s(i, j) * nj).dot(ni);
            }
        }
        -u * field + g * (pair + 0.5 * selfe)
    }

    /// Interaction field Σ_{j≠i} S_ij n_j seen by rotor `i` (self term excluded).
    #[inline]
    pub fn pair_field(&self, i: usize, orientations: &[Vector3<f64>]) -> Vector3<f64> {
        let mut h = Vector3::zeros();
        for (j, nj) in orientations.iter().enumerate() {
            if j != i {
                h += self.s(i, j) * nj;
            }
        }
        h
    }

    /// Potential change when rotor `i` turns from `old` to `new`, all other
    /// rotors fixed at `orientations` (which still holds `old` at slot i).
    pub fn potential_delta(
        &self,
        i: usize,
        orientations: &[Vector3<f64>],
        old: Vector3<f64>,
        new: Vector3<f64>,
        u: f64,
        g: f64,
    ) -> f64 {
        let h = self.pair_field(i, orientations);
        let d = new - old;
        let self_old = (self.self_tensor * old).dot(&old);
        let self_new = (self.self_tensor * new).dot(&new);
        -u * d.z + g * (h.dot(&d) + 0.5 * (self_new - self_old))
    }

    /// Classical potential energy per particle of a static configuration.
    pub fn classical_energy(&self, orientations: &[Vector3<f64>], u: f64, g: f64) -> Result<f64> {
        if orientations.len() != self.n {
            return Err(Error::domain(format!(
                "expected {} orientations, got {}",
                self.n,
                orientations.len()
            )));
        }
        for v in orientations {
            if (v.norm() - 1.0).abs() > 1e-8 {
                return Err(Error::domain("orientations must be unit vectors"));
            }
        }
        Ok(self.potential_total(orientations, u, g) / self.n as f64)
    }

    /// Distance between sites i and j under the nearest-image metric.
    pub fn min_image_distance(&self, i: usize, j: usize) -> f64 {
        let rij = self.sites[i] - self.sites[j];
        let mut best = f64::INFINITY;
        for a in -2..=2i64 {
            for b in -2..=2i64 {
                let d = (rij + self.t1 * a as f64 + self.t2 * b as f64).norm();
                if d < best {
                    best = d;
                }
            }
        }
        best
    }
}

/// Hexagonal supercell of the triangular lattice: N = 3L² sites, rhombic
/// generators T1 = L(a1+a2), T2 = L(2a2−a1) whose Wigner-Seitz cell is the
/// regular hexagon.
fn triangular_cell(n: usize) -> (Vec<Vector2<f64>>, Vec<(i64, i64)>, Vector2<f64>, Vector2<f64>) {
    let l = ((n as f64) / 3.0).sqrt().round() as i64;
    let period = 3 * l;
    let t1 = (TRI_A1 + TRI_A2) * l as f64;
    let t2 = (TRI_A2 * 2.0 - TRI_A1) * l as f64;
    let mut sites = Vec::with_capacity(n);
    let mut coords = Vec::with_capacity(n);
    // fundamental-domain residues: x = r1/3L, y = r2/3L with r1 ≡ r2 (mod 3)
    for r1 in 0..period {
        for r2 in 0..period {
            if r1 % 3 != r2 % 3 {
                continue;
            }
            let p = (r1 - r2) / 3;
            let q = (r1 + 2 * r2) / 3;
            sites.push(TRI_A1 * p as f64 + TRI_A2 * q as f64);
            coords.push((p, q));
        }
    }
    debug_assert_eq!(sites.len(), n);
    (sites, coords, t1, t2)
}

fn square_cell(n: usize) -> (Vec<Vector2<f64>>, Vec<(i64, i64)>, Vector2<f64>, Vector2<f64>) {
    let m = (n as f64).sqrt().round() as i64;
    let mut sites = Vec::with_capacity(n);
    let mut coords = Vec::with_capacity(n);
    for row in 0..m {
        for col in 0..m {
            sites.push(Vector2::new(col as f64, row as f64));
            coords.push((row, col));
        }
    }
    (
        sites,
        coords,
        Vector2::new(m as f64, 0.0),
        Vector2::new(0.0, m as f64),
    )
}

/// Catalog of candidate classical orderings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrderingPattern {
    /// Everything aligned along one in-plane direction.
    PolarizedInPlane { angle: f64 },
    /// Rows along a lattice axis, alternating head-to-tail direction.
    /// Axes 0..3 on the triangular lattice, 0..2 (x, y) on the square one.
    Striped { axis: usize },
    /// Out-of-plane antiferro pattern (square lattice only).
    Checkerboard,
}

impl OrderingPattern {
    pub fn label(&self) -> String {
        match self {
            OrderingPattern::PolarizedInPlane { angle } => {
                format!("polarized({:.0}deg)", angle.to_degrees())
            }
            OrderingPattern::Striped { axis } => format!("striped(axis{axis})"),
            OrderingPattern::Checkerboard => "checkerboard".to_string(),
        }
    }

    /// Per-site unit orientations of the pattern on `lattice`.
    pub fn orientations(&self, lattice: &LatticeSystem) -> Result<Vec<Vector3<f64>>> {
        let n = lattice.n;
        match *self {
            OrderingPattern::PolarizedInPlane { angle } => {
                let v = Vector3::new(angle.cos(), angle.sin(), 0.0);
                Ok(vec![v; n])
            }
            OrderingPattern::Striped { axis } => match lattice.geometry {
                Geometry::Triangular => {
                    if axis > 2 {
                        return Err(Error::domain("triangular stripe axis must be 0..3"));
                    }
                    let dir2 = match axis {
                        0 => TRI_A1,
                        1 => TRI_A2,
                        _ => TRI_A2 - TRI_A1,
                    };
                    let dir2 = dir2 / dir2.norm();
                    let dir = Vector3::new(dir2.x, dir2.y, 0.0);
                    Ok(lattice
                        .coords
                        .iter()
                        .map(|&(p, q)| {
                            let phase = match axis {
                                0 => q,
                                1 => p,
                                _ => p + q,
                            };
                            if phase.rem_euclid(2) == 0 {
                                dir
                            } else {
                                -dir
                            }
                        })
                        .collect())
                }
                Geometry::Square => {
                    if axis > 1 {
                        return Err(Error::domain("square stripe axis must be 0 or 1"));
                    }
                    Ok(lattice
                        .coords
                        .iter()
                        .map(|&(row, col)| {
                            let (dir, phase) = if axis == 0 {
                                (Vector3::new(1.0, 0.0, 0.0), row)
                            } else {
                                (Vector3::new(0.0, 1.0, 0.0), col)
                            };
                            if phase.rem_euclid(2) == 0 {
                                dir
                            } else {
                                -dir
                            }
                        })
                        .collect())
                }
            },
            OrderingPattern::Checkerboard => {
                if lattice.geometry != Geometry::Square {
                    return Err(Error::domain("checkerboard ordering needs a square lattice"));
                }
                Ok(lattice
                    .coords
                    .iter()
                    .map(|&(row, col)| {
                        let z = if (row + col).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                        Vector3::new(0.0, 0.0, z)
                    })
                    .collect())
            }
        }
    }
}

/// Default ordering catalog for a geometry.
pub fn ordering_catalog(geometry: Geometry) -> Vec<OrderingPattern> {
    match geometry {
        Geometry::Triangular => vec![
            OrderingPattern::PolarizedInPlane { angle: 0.0 },
            OrderingPattern::Striped { axis: 0 },
            OrderingPattern::Striped { axis: 1 },
            OrderingPattern::Striped { axis: 2 },
        ],
        Geometry::Square => vec![
            OrderingPattern::PolarizedInPlane { angle: 0.0 },
            OrderingPattern::Striped { axis: 0 },
            OrderingPattern::Striped { axis: 1 },
            OrderingPattern::Checkerboard,
        ],
    }
}

/// One row of the classical ordering-energy report.
#[derive(Debug, Clone)]
pub struct OrderingEnergyRow {
    pub geometry: Geometry,
    pub convention: Convention,
    pub n: usize,
    pub ordering: String,
    pub energy_per_particle: f64,
}

/// Classical E/N of every catalog ordering at u = 0, g = 1, per size.
pub fn ordering_energy_report(
    geometry: Geometry,
    sizes: &[usize],
    convention: Convention,
    cutoff: CutoffPolicy,
) -> Result<Vec<OrderingEnergyRow>> {
    if sizes.is_empty() {
        return Err(Error::config("size list must not be empty"));
    }
    let mut rows = Vec::new();
    for &n in sizes {
        let lattice = LatticeSystem::build(geometry, n, convention, cutoff, 1.0)?;
        for pattern in ordering_catalog(geometry) {
            let orient = pattern.orientations(&lattice)?;
            let e = lattice.classical_energy(&orient, 0.0, 1.0)?;
            rows.push(OrderingEnergyRow {
                geometry,
                convention,
                n,
                ordering: pattern.label(),
                energy_per_particle: e,
            });
        }
    }
    Ok(rows)
}

/// Result of the classical minimization used as the quantumness reference.
#[derive(Debug, Clone)]
pub struct ClassicalMinimum {
    pub pattern: OrderingPattern,
    /// Uniform cant of the in-plane pattern toward ê, radians.
    pub cant: f64,
    pub energy_per_particle: f64,
}

/// Minimum classical energy over the ordering catalog, each in-plane pattern
/// augmented by a uniform cant toward the field axis.
pub fn classical_minimum(lattice: &LatticeSystem, u: f64, g: f64) -> Result<ClassicalMinimum> {
    if u < 0.0 || g < 0.0 {
        return Err(Error::domain("u and g must be non-negative"));
    }
    let mut best: Option<ClassicalMinimum> = None;
    for pattern in ordering_catalog(lattice.geometry) {
        let base = pattern.orientations(lattice)?;
        let (cant, energy) = match pattern {
            OrderingPattern::Checkerboard => {
                (0.0, lattice.classical_energy(&base, u, g)?)
            }
            _ => {
                let energy_at = |chi: f64| {
                    let canted: Vec<_> = base
                        .iter()
                        .map(|m| {
                            Vector3::new(m.x * chi.cos(), m.y * chi.cos(), chi.sin())
                        })
                        .collect();
                    lattice.potential_total(&canted, u, g) / lattice.n as f64
                };
                let chi = crate::numerics::golden_section_min(
                    energy_at,
                    0.0,
                    std::f64::consts::FRAC_PI_2,
                    1e-6,
                );
                // the boundary (fully field-aligned) competes with the interior
                let mut candidates = vec![(chi, energy_at(chi))];
                candidates.push((0.0, energy_at(0.0)));
                candidates.push((std::f64::consts::FRAC_PI_2, energy_at(std::f64::consts::FRAC_PI_2)));
                candidates
                    .into_iter()
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap()
            }
        };
        if best.as_ref().map_or(true, |b| energy < b.energy_per_particle) {
            best = Some(ClassicalMinimum {
                pattern,
                cant,
                energy_per_particle: energy,
            });
        }
    }
    Ok(best.expect("catalog is never empty"))
}
