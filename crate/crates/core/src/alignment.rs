//! In-plane rotation estimates from multi-frequency spectral data.
//!
//! For a pair `(i, j)` the weighted least-squares fit of
//! `u_l^(k)(i) ≈ e^{ikα} u_l^(k)(j)` over all frequencies reduces to
//! maximizing the trigonometric polynomial
//!
//! ```text
//! f(α) = Re Σ_k z(k) e^{-ikα},   z(k) = ⟨φ_k(i), φ_k(j)⟩
//! ```
//!
//! which is sampled on a uniform grid with one zero-padded FFT and refined
//! by a three-point parabola through the peak.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::angle::{negate, wrap_to_tau};
use crate::embedding::{EmbeddingSet, NeighborList};
use crate::error::{Error, Result};

/// `z(k)` for one ordered pair, indexed by frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentSequence {
    pub i: usize,
    pub j: usize,
    pub frequencies: Vec<u32>,
    pub z: Vec<Complex64>,
}

impl AlignmentSequence {
    pub fn k_max(&self) -> u32 {
        self.frequencies.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleEstimate {
    /// Estimated `α̂_ij ∈ [0, 2π)`.
    pub alpha: f64,
    /// Objective `f(α̂)` at the refined peak.
    pub objective: f64,
    pub grid_len: usize,
}

/// `z(k) = Σ_l (λ_l^(k))^{2t} u_l^(k)(i) conj(u_l^(k)(j))` for every frequency
/// in the embedding.
pub fn alignment_sequence(embeddings: &EmbeddingSet, i: usize, j: usize) -> Result<AlignmentSequence> {
    if !embeddings.method().supports_alignment() {
        return Err(Error::param("DM embeddings carry no phase information"));
    }
    let n = embeddings.n();
    if i >= n || j >= n {
        return Err(Error::param(format!("pair ({i}, {j}) out of range for n = {n}")));
    }
    let feats = embeddings.features();
    Ok(AlignmentSequence {
        i,
        j,
        frequencies: feats.iter().map(|f| f.k).collect(),
        z: feats.iter().map(|f| f.inner(i, j)).collect(),
    })
}

/// Reusable FFT plan for one grid length.
#[derive(Clone)]
pub struct AngleEstimator {
    fft: Arc<dyn Fft<f64>>,
    len: usize,
}

impl std::fmt::Debug for AngleEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AngleEstimator").field("len", &self.len).finish()
    }
}

impl AngleEstimator {
    pub fn new(grid_len: usize) -> Result<Self> {
        if grid_len < 4 || !grid_len.is_power_of_two() {
            return Err(Error::param(format!(
                "FFT length must be a power of two ≥ 4, got {grid_len}"
            )));
        }
        let fft = FftPlanner::new().plan_fft_forward(grid_len);
        Ok(AngleEstimator { fft, len: grid_len })
    }

    pub fn grid_len(&self) -> usize {
        self.len
    }

    /// Evaluate `f(2πm/T)` for all `m`.
    pub fn objective_grid(&self, z: &AlignmentSequence) -> Result<Vec<f64>> {
        let k_max = z.k_max() as usize;
        if self.len < 4 * k_max {
            return Err(Error::param(format!(
                "FFT length {} must be at least 4·k_max = {}",
                self.len,
                4 * k_max
            )));
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        for (&k, &v) in z.frequencies.iter().zip(&z.z) {
            buf[k as usize] += v;
        }
        // forward transform: X[m] = Σ_k z(k) e^{-2πi km/T}
        self.fft.process(&mut buf);
        Ok(buf.iter().map(|c| c.re).collect())
    }

    pub fn estimate(&self, z: &AlignmentSequence) -> Result<AngleEstimate> {
        if z.z.iter().all(|c| *c == Complex64::new(0.0, 0.0)) {
            return Err(Error::UndefinedAlignment);
        }
        let f = self.objective_grid(z)?;
        let t = self.len;
        let mut peak = 0;
        for (m, &v) in f.iter().enumerate() {
            if v > f[peak] {
                peak = m;
            }
        }
        let left = f[(peak + t - 1) % t];
        let right = f[(peak + 1) % t];
        let centre = f[peak];
        let curvature = left - 2.0 * centre + right;
        let (offset, objective) = if curvature < 0.0 {
            let d = 0.5 * (left - right) / curvature;
            (d, centre - 0.25 * (left - right) * d)
        } else {
            (0.0, centre)
        };
        Ok(AngleEstimate {
            alpha: wrap_to_tau((peak as f64 + offset) * TAU / t as f64),
            objective,
            grid_len: t,
        })
    }
}

/// Maximizer of `Re Σ_k z(k) e^{-ikα}` on a `T`-point grid with parabolic
/// refinement.
pub fn estimate_angle(z: &AlignmentSequence, grid_len: usize) -> Result<AngleEstimate> {
    AngleEstimator::new(grid_len)?.estimate(z)
}

/// One estimate for an ordered `(node, neighbor)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEstimate {
    pub i: usize,
    pub j: usize,
    pub estimate: AngleEstimate,
}

/// Estimate `α̂` for every `(node, neighbor)` pair of a neighbor list.
///
/// Each unordered pair is solved in its `i < j` orientation; the reversed
/// orientation reports `-α̂ mod 2π` with the same objective.
pub fn align_neighbors(
    embeddings: &EmbeddingSet,
    neighbors: &NeighborList,
    grid_len: usize,
) -> Result<Vec<PairEstimate>> {
    let estimator = AngleEstimator::new(grid_len)?;
    let per_node: Vec<Vec<PairEstimate>> = (0..neighbors.n())
        .into_par_iter()
        .map(|i| {
            neighbors
                .of(i)
                .iter()
                .map(|&(j, _)| {
                    let (a, b) = (i.min(j), i.max(j));
                    let est = estimator.estimate(&alignment_sequence(embeddings, a, b)?)?;
                    let estimate = if i <= j {
                        est
                    } else {
                        AngleEstimate {
                            alpha: negate(est.alpha),
                            ..est
                        }
                    };
                    Ok(PairEstimate { i, j, estimate })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_node.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::wrap_to_pi;
    use rand::Rng;

    fn seq(z: Vec<Complex64>) -> AlignmentSequence {
        AlignmentSequence {
            i: 0,
            j: 1,
            frequencies: (1..=z.len() as u32).collect(),
            z,
        }
    }

    #[test]
    fn single_harmonic_peak() {
        let beta = 1.0;
        let z = seq(vec![Complex64::from_polar(1.0, beta)]);
        let est = estimate_angle(&z, 1024).unwrap();
        assert!(wrap_to_pi(est.alpha - beta).abs() < 1e-4);
        // before refinement the grid peak is within one cell
        let f = AngleEstimator::new(1024).unwrap().objective_grid(&z).unwrap();
        let peak = (0..1024).max_by(|&a, &b| f[a].total_cmp(&f[b])).unwrap();
        assert!(wrap_to_pi(peak as f64 * TAU / 1024.0 - beta).abs() <= TAU / 1024.0);
    }

    #[test]
    fn coherent_harmonics_peak() {
        let beta = 2.5;
        let z = seq((1..=10).map(|k| Complex64::from_polar(1.0, k as f64 * beta)).collect());
        let est = estimate_angle(&z, 1024).unwrap();
        assert!(wrap_to_pi(est.alpha - beta).abs() < 1e-4, "{}", est.alpha);
        assert!((est.objective - 10.0).abs() < 1e-3);
    }

    #[test]
    fn grid_errors() {
        let z = seq(vec![Complex64::new(1.0, 0.0); 10]);
        assert!(matches!(estimate_angle(&z, 32), Err(Error::InvalidParameter(_))));
        assert!(matches!(estimate_angle(&z, 100), Err(Error::InvalidParameter(_))));
        let zero = seq(vec![Complex64::new(0.0, 0.0); 3]);
        assert!(matches!(estimate_angle(&zero, 64), Err(Error::UndefinedAlignment)));
    }

    #[test]
    fn real_positive_sequence_peaks_at_zero() {
        let z = seq(vec![Complex64::new(3.0, 0.0), Complex64::new(1.0, 0.0)]);
        assert_eq!(estimate_angle(&z, 64).unwrap().alpha, 0.0);
    }

    #[test]
    fn matches_dense_grid_oracle() {
        let mut rng = crate::rng::substream(3, "align-oracle", 0);
        let grid = 1_000_000;
        for _ in 0..5 {
            let z: Vec<Complex64> = (0..10)
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let objective = |a: f64| -> f64 {
                z.iter()
                    .enumerate()
                    .map(|(k, c)| (c * Complex64::from_polar(1.0, -((k + 1) as f64) * a)).re)
                    .sum()
            };
            let best = (0..grid)
                .map(|g| TAU * g as f64 / grid as f64)
                .max_by(|a, b| objective(*a).total_cmp(&objective(*b)))
                .unwrap();
            let est = estimate_angle(&seq(z.clone()), 1024).unwrap();
            let err = wrap_to_pi(est.alpha - best).abs();
            assert!(err < TAU / grid as f64 + 1e-3, "fft {} oracle {best}", est.alpha);
            assert!((objective(est.alpha) - objective(best)).abs() < 1e-5);
        }
    }
}
