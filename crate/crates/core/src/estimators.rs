//! Order parameters, energy estimators, and blocking-based error bars.
//!
//! Scalar series are reduced by the standard blocking transformation
//! (recursive pairwise averaging); derived order parameters built from several
//! series means (φ_pol, φ_xy) get their errors from a block jackknife so the
//! cross-correlations are kept.

use crate::error::{Error, Result};
use crate::sampler::SampleRow;

/// A named per-sweep scalar record.
#[derive(Debug, Clone)]
pub struct ScalarSeries {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct BlockingResult {
    pub mean: f64,
    pub error: f64,
    /// Blocking level at which the plateau criterion fired.
    pub plateau_level: usize,
    /// False when the error never settled (reported error is the last level).
    pub converged: bool,
}

/// Flyvbjerg-Petersen blocking: the reported error is the first level whose
/// estimate moves by less than 5% over two successive doublings.
pub fn blocking_error(values: &[f64]) -> Result<BlockingResult> {
    if values.len() < 64 {
        return Err(Error::numerical(format!(
            "blocking needs at least 64 samples, got {}",
            values.len()
        )));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut level_errors = Vec::new();
    let mut current: Vec<f64> = values.to_vec();
    while current.len() >= 8 {
        let n = current.len() as f64;
        let m = current.iter().sum::<f64>() / n;
        let var = current.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
        level_errors.push((var / n).sqrt());
        let mut next = Vec::with_capacity(current.len() / 2);
        for pair in current.chunks_exact(2) {
            next.push(0.5 * (pair[0] + pair[1]));
        }
        current = next;
    }
    let rel_change = |a: f64, b: f64| {
        if a == 0.0 && b == 0.0 {
            0.0
        } else if a == 0.0 {
            f64::INFINITY
        } else {
            ((b - a) / a).abs()
        }
    };
    for k in 0..level_errors.len().saturating_sub(2) {
        if rel_change(level_errors[k], level_errors[k + 1]) < 0.05
            && rel_change(level_errors[k + 1], level_errors[k + 2]) < 0.05
        {
            return Ok(BlockingResult {
                mean,
                error: level_errors[k + 2],
                plateau_level: k,
                converged: true,
            });
        }
    }
    Ok(BlockingResult {
        mean,
        error: level_errors.last().copied().unwrap_or(0.0),
        plateau_level: level_errors.len().saturating_sub(1),
        converged: false,
    })
}

/// Integrated autocorrelation time with a self-consistent window.
pub fn integrated_autocorr_time(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 8 {
        return 1.0;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var: f64 = series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for t in 1..(n / 4) {
        let mut c = 0.0;
        for k in 0..(n - t) {
            c += (series[k] - mean) * (series[k + t] - mean);
        }
        c /= (n - t) as f64 * var;
        if c < 0.05 {
            break;
        }
        tau += 2.0 * c;
        if (t as f64) > 5.0 * tau {
            break;
        }
    }
    tau
}

/// Contiguous block means with `blocks` equal blocks (remainder dropped).
fn block_means(values: &[f64], blocks: usize) -> Vec<f64> {
    let size = values.len() / blocks;
    (0..blocks)
        .map(|b| values[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect()
}

fn default_block_count(n: usize) -> usize {
    if n >= 2048 {
        32
    } else if n >= 512 {
        16
    } else {
        8
    }
}

/// Block jackknife of f(series means...) over joint contiguous blocks.
fn jackknife(series: &[&[f64]], f: impl Fn(&[f64]) -> f64) -> Result<(f64, f64)> {
    let n = series.first().map_or(0, |s| s.len());
    if n < 64 {
        return Err(Error::numerical("jackknife needs at least 64 samples"));
    }
    let blocks = default_block_count(n);
    let per_series_blocks: Vec<Vec<f64>> = series.iter().map(|s| block_means(s, blocks)).collect();
    let totals: Vec<f64> = per_series_blocks.iter().map(|b| b.iter().sum::<f64>()).collect();
    let full_means: Vec<f64> = totals.iter().map(|t| t / blocks as f64).collect();
    let theta_hat = f(&full_means);
    let mut partials = Vec::with_capacity(blocks);
    for leave in 0..blocks {
        let means: Vec<f64> = per_series_blocks
            .iter()
            .zip(&totals)
            .map(|(bm, t)| (t - bm[leave]) / (blocks - 1) as f64)
            .collect();
        partials.push(f(&means));
    }
    let pm = partials.iter().sum::<f64>() / blocks as f64;
    let var: f64 = partials.iter().map(|p| (p - pm) * (p - pm)).sum::<f64>();
    let err = ((blocks - 1) as f64 / blocks as f64 * var).sqrt();
    Ok((theta_hat, err))
}

/// Measurement stream of one chain plus the derived order parameters.
#[derive(Debug, Clone, Default)]
pub struct Accumulator {
    samples: Vec<SampleRow>,
}

impl Accumulator {
    pub fn new() -> Self {
        Accumulator { samples: Vec::new() }
    }

    pub fn from_samples(samples: Vec<SampleRow>) -> Self {
        Accumulator { samples }
    }

    pub fn push(&mut self, row: SampleRow) {
        self.samples.push(row);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[SampleRow] {
        &self.samples
    }

    fn require_nonempty(&self) -> Result<()> {
        if self.samples.len() < 64 {
            return Err(Error::numerical(
                "estimator accumulator needs at least 64 samples",
            ));
        }
        Ok(())
    }

    fn series(&self, f: impl Fn(&SampleRow) -> f64) -> Vec<f64> {
        self.samples.iter().map(f).collect()
    }

    fn stripe_series(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.samples.iter().any(|s| s.stripe_x.is_none()) {
            return Err(Error::domain(
                "stripe order parameters are defined on the square lattice only",
            ));
        }
        Ok((
            self.series(|s| s.stripe_x.unwrap()),
            self.series(|s| s.stripe_y.unwrap()),
        ))
    }

    /// In-plane polarization √(⟨m_x⟩² + ⟨m_y⟩²) with jackknife error.
    pub fn phi_pol(&self) -> Result<(f64, f64)> {
        self.require_nonempty()?;
        let sx = self.series(|s| s.mean_x);
        let sy = self.series(|s| s.mean_y);
        jackknife(&[&sx, &sy], |m| (m[0] * m[0] + m[1] * m[1]).sqrt())
    }

    /// Signed transverse polarization ⟨m_z⟩.
    pub fn phi_z(&self) -> Result<(f64, f64)> {
        self.require_nonempty()?;
        let s = self.series(|s| s.mean_z);
        let b = blocking_error(&s)?;
        Ok((b.mean, b.error))
    }

    /// Stripe order parameter √(⟨n_x-stripe⟩² + ⟨n_y-stripe⟩²).
    pub fn phi_xy(&self) -> Result<(f64, f64)> {
        self.require_nonempty()?;
        let (sx, sy) = self.stripe_series()?;
        jackknife(&[&sx, &sy], |m| (m[0] * m[0] + m[1] * m[1]).sqrt())
    }

    /// Checkerboard order parameter ⟨|Σ (−1)^{i+j} n_z|⟩/N.
    pub fn phi_checkerboard(&self) -> Result<(f64, f64)> {
        self.require_nonempty()?;
        if self.samples.iter().any(|s| s.checker.is_none()) {
            return Err(Error::domain(
                "checkerboard order parameter is defined on the square lattice only",
            ));
        }
        let s = self.series(|s| s.checker.unwrap());
        let b = blocking_error(&s)?;
        Ok((b.mean, b.error))
    }

    /// Middle-bead potential per particle.
    pub fn v_mid(&self) -> Result<(f64, f64)> {
        self.require_nonempty()?;
        let s = self.series(|s| s.v_mid);
        let b = blocking_error(&s)?;
        Ok((b.mean, b.error))
    }

    /// End-bead local energy per particle.
    pub fn e_total(&self) -> Result<(f64, f64)> {
        self.require_nonempty()?;
        let s = self.series(|s| s.e_end);
        let b = blocking_error(&s)?;
        Ok((b.mean, b.error))
    }
}

/// Final per-run estimator values, merged across chains.
#[derive(Debug, Clone)]
pub struct EstimatorReport {
    pub phi_pol: (f64, f64),
    pub phi_z: (f64, f64),
    pub phi_xy: Option<(f64, f64)>,
    pub phi_checkerboard: Option<(f64, f64)>,
    pub v_mid: (f64, f64),
    pub e_total: (f64, f64),
    pub samples: usize,
}

fn merge(parts: Vec<(f64, f64)>) -> (f64, f64) {
    let c = parts.len() as f64;
    let mean = parts.iter().map(|p| p.0).sum::<f64>() / c;
    let err = parts.iter().map(|p| p.1 * p.1).sum::<f64>().sqrt() / c;
    (mean, err)
}

/// Combine independent chains: equal-weight mean of chain estimates with
/// errors added in quadrature (the combination is associative and
/// order-independent up to float rounding; chains are always merged in
/// stream order for bitwise determinism).
pub fn analyze_chains(chains: &[Accumulator]) -> Result<EstimatorReport> {
    if chains.is_empty() {
        return Err(Error::numerical("no chains to analyze"));
    }
    let square = chains[0]
        .samples()
        .first()
        .map_or(false, |s| s.stripe_x.is_some());
    let mut phi_pol = Vec::new();
    let mut phi_z = Vec::new();
    let mut phi_xy = Vec::new();
    let mut phi_cb = Vec::new();
    let mut v_mid = Vec::new();
    let mut e_total = Vec::new();
    let mut samples = 0;
    for c in chains {
        samples += c.len();
        phi_pol.push(c.phi_pol()?);
        phi_z.push(c.phi_z()?);
        if square {
            phi_xy.push(c.phi_xy()?);
            phi_cb.push(c.phi_checkerboard()?);
        }
        v_mid.push(c.v_mid()?);
        e_total.push(c.e_total()?);
    }
    Ok(EstimatorReport {
        phi_pol: merge(phi_pol),
        phi_z: merge(phi_z),
        phi_xy: if square { Some(merge(phi_xy)) } else { None },
        phi_checkerboard: if square { Some(merge(phi_cb)) } else { None },
        v_mid: merge(v_mid),
        e_total: merge(e_total),
        samples,
    })
}
