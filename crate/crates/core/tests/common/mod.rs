//! Shared test oracles: these deliberately re-derive everything they check
//! through routes independent of the library code under test.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Legendre P_0..P_lmax at x (plain upward recurrence).
pub fn legendre_all(l_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(l_max + 1);
    out.push(1.0);
    if l_max == 0 {
        return out;
    }
    out.push(x);
    for l in 1..l_max {
        let next = ((2 * l + 1) as f64 * x * out[l] - l as f64 * out[l - 1]) / (l + 1) as f64;
        out.push(next);
    }
    out
}

/// Gauss-Legendre rule (independent reimplementation for oracle use).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut pm1, mut p) = (1.0_f64, x);
            for k in 1..n {
                let next = ((2 * k + 1) as f64 * x * p - k as f64 * pm1) / (k + 1) as f64;
                pm1 = p;
                p = next;
            }
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[n - 1 - i] = weights[i];
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Single rotor in a transverse field: H = l(l+1) − u cos θ in the m = 0
/// sector, levels l = 0..=l_max.
pub fn rotor_hamiltonian(u: f64, l_max: usize) -> DMatrix<f64> {
    let n = l_max + 1;
    let mut h = DMatrix::<f64>::zeros(n, n);
    for l in 0..n {
        h[(l, l)] = (l * (l + 1)) as f64;
    }
    for l in 0..(n - 1) {
        let a = (l as f64 + 1.0) / (((2 * l + 1) as f64) * ((2 * l + 3) as f64)).sqrt();
        h[(l, l + 1)] = -u * a;
        h[(l + 1, l)] = -u * a;
    }
    h
}

/// Lowest `count` eigenpairs of a symmetric matrix by deflated shift-invert
/// power iteration; machine-accurate for the well-gapped rotor spectra used
/// in these tests.
pub fn lowest_eigenpairs(h: &DMatrix<f64>, count: usize) -> Vec<(f64, DVector<f64>)> {
    let n = h.nrows();
    let mut lower = f64::INFINITY;
    for i in 0..n {
        let mut radius = 0.0;
        for j in 0..n {
            if i != j {
                radius += h[(i, j)].abs();
            }
        }
        lower = lower.min(h[(i, i)] - radius);
    }
    let mut found: Vec<(f64, DVector<f64>)> = Vec::new();
    for k in 0..count {
        let mut v = DVector::<f64>::from_fn(n, |i, _| 1.0 / (1.0 + (i + k) as f64));
        for (_, w) in &found {
            let proj = v.dot(w);
            v -= w * proj;
        }
        v /= v.norm();
        let mut sigma = lower - 0.1;
        let mut lambda = v.dot(&(h * &v));
        for phase in 0..4 {
            let lu = (h - DMatrix::<f64>::identity(n, n) * sigma).lu();
            let iters = if phase == 0 { 80 } else { 15 };
            for _ in 0..iters {
                let mut next = match lu.solve(&v) {
                    Some(x) => x,
                    None => break,
                };
                for (_, w) in &found {
                    let proj = next.dot(w);
                    next -= w * proj;
                }
                let next = next.normalize();
                let delta = (next.clone() - &v).norm().min((next.clone() + &v).norm());
                v = next;
                if delta < 1e-15 {
                    break;
                }
            }
            lambda = v.dot(&(h * &v));
            sigma = lambda - 0.01;
        }
        found.push((lambda, v.clone()));
    }
    found
}

/// Ground-state energy and ⟨cos θ⟩ of the single rotor (oracle route).
pub fn rotor_ground(u: f64, l_max: usize) -> (f64, f64) {
    let h = rotor_hamiltonian(u, l_max);
    let pair = lowest_eigenpairs(&h, 1);
    let (e0, c) = (&pair[0].0, &pair[0].1);
    let mut ct = 0.0;
    for l in 0..l_max {
        let a = (l as f64 + 1.0) / (((2 * l + 1) as f64) * ((2 * l + 3) as f64)).sqrt();
        ct += 2.0 * a * c[l] * c[l + 1];
    }
    (*e0, ct)
}

/// Deterministic single-rotor path-integral evaluator on a cos θ quadrature
/// grid (azimuth integrated analytically). Every ingredient is in closed
/// form: the free kernel in its spectral form, the potential as a diagonal
/// multiplication, the trial function and its local energy pointwise. This
/// evaluates exactly what the Monte Carlo estimates, without sampling noise,
/// so time-step scaling laws are resolvable to ~1e-12.
pub struct MatrixPigs {
    pub u: f64,
    pub alpha: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    l_cut: usize,
}

impl MatrixPigs {
    pub fn new(u: f64, alpha: f64) -> Self {
        let (nodes, weights) = gauss_legendre(128);
        MatrixPigs {
            u,
            alpha,
            nodes,
            weights,
            l_cut: 64,
        }
    }

    /// Azimuth-integrated kernel matrix element Σ_l (2l+1)/2 P_l(x)P_l(x') e^{−τ l(l+1)}.
    fn kernel(&self, tau: f64) -> DMatrix<f64> {
        let n = self.nodes.len();
        let pl: Vec<Vec<f64>> = self.nodes.iter().map(|x| legendre_all(self.l_cut, *x)).collect();
        let mut k = DMatrix::<f64>::zeros(n, n);
        for l in 0..=self.l_cut {
            let w = (2 * l + 1) as f64 / 2.0 * (-tau * (l * (l + 1)) as f64).exp();
            if w < 1e-18 {
                break;
            }
            for a in 0..n {
                let pa = pl[a][l] * w;
                for b in 0..n {
                    k[(a, b)] += pa * pl[b][l];
                }
            }
        }
        k
    }

    /// One primitive link as a matrix acting on quadrature coefficients.
    fn primitive_link(&self, tau: f64) -> DMatrix<f64> {
        let n = self.nodes.len();
        let mut link = self.kernel(tau);
        for a in 0..n {
            let ea = (0.5 * tau * self.u * self.nodes[a]).exp();
            for b in 0..n {
                let eb = (0.5 * tau * self.u * self.nodes[b]).exp() * self.weights[b];
                link[(a, b)] *= ea * eb;
            }
        }
        link
    }

    /// Sixth-order multi-product combination of primitive links.
    fn mpe6_link(&self, tau: f64) -> DMatrix<f64> {
        let g1 = self.primitive_link(tau);
        let g2 = self.primitive_link(tau / 2.0);
        let g4 = self.primitive_link(tau / 4.0);
        let g2sq = &g2 * &g2;
        let g4q = {
            let s = &g4 * &g4;
            &s * &s
        };
        g1 * (1.0 / 45.0) + g2sq * (-4.0 / 9.0) + g4q * (64.0 / 45.0)
    }

    /// Mixed energy estimate ⟨ψ_T|H G^M|ψ_T⟩ / ⟨ψ_T|G^M|ψ_T⟩ for the
    /// requested backend at path length beta = M tau.
    pub fn energy(&self, tau: f64, links: usize, mpe6: bool) -> f64 {
        let link = if mpe6 { self.mpe6_link(tau) } else { self.primitive_link(tau) };
        let n = self.nodes.len();
        let mut f = DVector::<f64>::from_fn(n, |a, _| (self.alpha * self.nodes[a]).exp());
        for _ in 0..links {
            f = &link * &f;
            let norm = f.norm();
            f /= norm;
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for a in 0..n {
            let x = self.nodes[a];
            let psi = (self.alpha * x).exp();
            let local =
                2.0 * self.alpha * x - self.alpha * self.alpha * (1.0 - x * x) - self.u * x;
            num += self.weights[a] * psi * local * f[a];
            den += self.weights[a] * psi * f[a];
        }
        num / den
    }

    /// Reference energy at the same beta with no time-step error, from the
    /// lowest eigenpairs of the exact Hamiltonian.
    pub fn reference_energy(&self, beta: f64) -> f64 {
        let l_max = 40;
        let h = rotor_hamiltonian(self.u, l_max);
        let pairs = lowest_eigenpairs(&h, 6);
        // trial coefficients in the normalized-Legendre basis
        let (xs, ws) = gauss_legendre(200);
        let coeff: Vec<f64> = (0..=l_max)
            .map(|l| {
                let mut acc = 0.0;
                for (x, w) in xs.iter().zip(&ws) {
                    let pl = legendre_all(l, *x)[l];
                    acc += w * (self.alpha * x).exp() * pl;
                }
                ((2 * l + 1) as f64 / 2.0).sqrt() * acc
            })
            .collect();
        let e0 = pairs[0].0;
        let mut num = 0.0;
        let mut den = 0.0;
        for (e, v) in &pairs {
            let overlap: f64 = coeff.iter().zip(v.iter()).map(|(c, vi)| c * vi).sum();
            let w = overlap * overlap * (-(beta) * (e - e0)).exp();
            num += w * e;
            den += w;
        }
        num / den
    }
}

/// Summarize a simple mean ± stderr of an f64 slice.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
