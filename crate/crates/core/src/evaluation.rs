//! Scoring against ground truth and spectral checks on the sphere.

use serde::{Deserialize, Serialize};

use crate::alignment::PairEstimate;
use crate::angle::wrapped_error_degrees;
use crate::embedding::NeighborList;
use crate::error::{Error, Result};
use crate::sampling::{GroundTruth, ManifoldKind};
use crate::spectral::SpectralBundle;

pub const NN_BINS: usize = 50;
pub const ALIGNMENT_BINS: usize = 72;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        let width = (hi - lo) / bins as f64;
        Histogram {
            edges: (0..=bins).map(|b| lo + width * b as f64).collect(),
            counts: vec![0; bins],
        }
    }

    /// Add a value; values at or beyond the ends land in the end bins.
    pub fn add(&mut self, x: f64) {
        let bins = self.counts.len();
        let (lo, hi) = (self.edges[0], self.edges[bins]);
        let pos = ((x - lo) / (hi - lo) * bins as f64).floor();
        let b = if pos.is_nan() { 0 } else { pos.clamp(0.0, (bins - 1) as f64) as usize };
        self.counts[b] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Total count in bins lying entirely inside `[lo, hi]`.
    pub fn mass_within(&self, lo: f64, hi: f64) -> usize {
        self.counts
            .iter()
            .enumerate()
            .filter(|(b, _)| self.edges[*b] >= lo - 1e-12 && self.edges[b + 1] <= hi + 1e-12)
            .map(|(_, c)| c)
            .sum()
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnScore {
    /// Geodesic distances of retrieved pairs, `[0, max geodesic]`.
    pub histogram: Histogram,
    pub mean: f64,
    pub median: f64,
    /// Mean in degrees (sphere only; geodesic distance is the view angle).
    pub mean_degrees: Option<f64>,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentScore {
    /// Wrapped signed errors `α - α̂` in degrees over `[-180, 180]`.
    pub histogram: Histogram,
    pub median_abs_error_deg: f64,
    pub mean_abs_error_deg: f64,
    /// Fraction of pairs with `|error| ≤ 10°`.
    pub fraction_within_10_deg: f64,
    pub pairs: usize,
    /// Pairs with no defined true alignment (antipodal views).
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub nn: Option<NnScore>,
    pub alignment: Option<AlignmentScore>,
    /// Parameter echo (the resolved configuration).
    pub params: serde_json::Value,
}

impl EvalReport {
    pub fn new(method: impl Into<String>, params: serde_json::Value) -> Self {
        EvalReport {
            method: method.into(),
            nn: None,
            alignment: None,
            params,
        }
    }
}

/// Geodesic distances between every node and its retrieved neighbors.
pub fn score_nn(neighbors: &NeighborList, truth: &GroundTruth) -> Result<NnScore> {
    if neighbors.n() != truth.n() {
        return Err(Error::param(format!(
            "neighbor list has n = {}, ground truth n = {}",
            neighbors.n(),
            truth.n()
        )));
    }
    let mut hist = Histogram::new(0.0, truth.max_geodesic(), NN_BINS);
    let mut dists: Vec<f64> = neighbors
        .iter()
        .map(|(i, _, j, _)| truth.geodesic_distance(i, j))
        .collect();
    dists.iter().for_each(|&d| hist.add(d));
    let mean = dists.iter().sum::<f64>() / dists.len() as f64;
    Ok(NnScore {
        histogram: hist,
        mean,
        median: median(&mut dists),
        mean_degrees: (truth.kind() == ManifoldKind::Sphere).then(|| mean.to_degrees()),
        pairs: neighbors.n() * neighbors.kappa(),
    })
}

/// Wrapped alignment errors against ground truth.
pub fn score_alignment(estimates: &[PairEstimate], truth: &GroundTruth) -> Result<AlignmentScore> {
    let mut hist = Histogram::new(-180.0, 180.0, ALIGNMENT_BINS);
    let mut abs_errors = Vec::with_capacity(estimates.len());
    let mut skipped = 0;
    for e in estimates {
        if e.i >= truth.n() || e.j >= truth.n() {
            return Err(Error::param(format!("pair ({}, {}) out of range", e.i, e.j)));
        }
        match truth.alignment(e.i, e.j) {
            Ok(alpha) => {
                let err = wrapped_error_degrees(alpha, e.estimate.alpha);
                hist.add(err);
                abs_errors.push(err.abs());
            }
            Err(Error::DegenerateAlignment) => skipped += 1,
            Err(other) => return Err(other),
        }
    }
    let pairs = abs_errors.len();
    let within = abs_errors.iter().filter(|&&x| x <= 10.0).count();
    let mean = abs_errors.iter().sum::<f64>() / pairs.max(1) as f64;
    Ok(AlignmentScore {
        histogram: hist,
        median_abs_error_deg: median(&mut abs_errors),
        mean_abs_error_deg: mean,
        fraction_within_10_deg: within as f64 / pairs.max(1) as f64,
        pairs,
        skipped,
    })
}

/// Two-term expansion `λ_l^(k)(h) = h/2 - (k + (l-1)(l+2k)) h²/8`.
pub fn theoretical_eigenvalue(k: u32, l: u32, h: f64) -> Result<f64> {
    if k == 0 || l == 0 {
        return Err(Error::param("theoretical eigenvalues need k ≥ 1 and l ≥ 1"));
    }
    if !(h > 0.0 && h <= 2.0) {
        return Err(Error::param(format!("cap parameter h must lie in (0, 2], got {h}")));
    }
    let (k, l) = (k as f64, l as f64);
    Ok(0.5 * h - (k + (l - 1.0) * (l + 2.0 * k)) * h * h / 8.0)
}

/// Multiplicity `2(l + k) - 1` of the `l`-th eigenvalue at frequency `k`.
pub fn theoretical_multiplicity(k: u32, l: u32) -> usize {
    (2 * (l + k) - 1) as usize
}

/// Leading gap `λ_1 - λ_2 ≈ (1 + k) h² / 4`.
pub fn theoretical_gap(k: u32, h: f64) -> f64 {
    (1.0 + k as f64) * h * h / 4.0
}

/// Cap parameter from κ-NN sparsity: the cap area `2πh` is the fraction
/// `κ/n` of the sphere area `4π`.
pub fn cap_parameter(kappa: usize, n: usize) -> f64 {
    2.0 * kappa as f64 / n as f64
}

/// Split ascending values into clusters.
///
/// A new cluster starts when the gap to the previous value exceeds
/// `CLUSTER_GAP_FACTOR` times the larger of the median consecutive gap of
/// the whole sequence and the mean consecutive gap of the current cluster.
/// Every threshold is a ratio of gaps, so the partition is invariant to
/// positive rescaling.
pub fn detect_clusters(values: &[f64]) -> Vec<std::ops::Range<usize>> {
    if values.is_empty() {
        return Vec::new();
    }
    let gaps: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let mut sorted = gaps.clone();
    let reference = median(&mut sorted);
    let mut clusters = Vec::new();
    let mut start = 0;
    for (idx, &gap) in gaps.iter().enumerate() {
        let end = idx + 1;
        let members = end - start;
        let typical = if members >= 2 {
            reference.max((values[end - 1] - values[start]) / (members - 1) as f64)
        } else {
            reference
        };
        if gap > CLUSTER_GAP_FACTOR * typical {
            clusters.push(start..end);
            start = end;
        }
    }
    clusters.push(start..values.len());
    clusters
}

pub const CLUSTER_GAP_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterInfo {
    pub start: usize,
    pub size: usize,
    pub mean: f64,
    /// `max - min` within the cluster.
    pub spread: f64,
    /// Gap from this cluster's largest value to the next cluster's smallest.
    pub gap_after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryLevel {
    pub l: u32,
    pub multiplicity: usize,
    /// `1 - λ_l(h) / (h/2)`, comparable with the degree-normalized spectrum.
    pub normalized_laplacian_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub k: u32,
    pub n: usize,
    pub kappa_build: usize,
    pub h: f64,
    /// `1 - λ`, ascending.
    pub laplacian_eigenvalues: Vec<f64>,
    pub clusters: Vec<ClusterInfo>,
    pub theory: Vec<TheoryLevel>,
    /// `(μ₂ - μ₁) / (1 - μ₁)` with `μ` the first two cluster means of `1 - λ`.
    pub leading_relative_gap: Option<f64>,
    /// Same ratio from the two-term expansion.
    pub theoretical_relative_gap: f64,
    /// `λ₁ - 1`, the numerical relative second-order correction.
    pub leading_correction: f64,
    /// `λ₁^(k)(h) / (h/2) - 1 = -k h / 4`.
    pub theoretical_leading_correction: f64,
}

impl SpectralReport {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c.size).collect()
    }
}

/// Compare the spectrum of `I - S_k` on the sphere with the predicted
/// multiplicities and the second-order eigenvalue expansion.
pub fn spectral_report(
    bundle: &SpectralBundle,
    manifold: ManifoldKind,
    kappa_build: usize,
    n: usize,
) -> Result<SpectralReport> {
    if manifold != ManifoldKind::Sphere {
        return Err(Error::UnsupportedManifold(format!(
            "spectral report needs sphere data, got {}",
            manifold.name()
        )));
    }
    if bundle.k == 0 {
        return Err(Error::param("spectral report is defined for k ≥ 1"));
    }
    if kappa_build == 0 || kappa_build >= n {
        return Err(Error::param("κ_build must satisfy 1 ≤ κ < n"));
    }
    let h = cap_parameter(kappa_build, n);
    let k = bundle.k;
    let lap: Vec<f64> = bundle.eigenvalues.iter().map(|l| 1.0 - l).collect();
    let ranges = detect_clusters(&lap);
    let clusters: Vec<ClusterInfo> = ranges
        .iter()
        .enumerate()
        .map(|(c, r)| {
            let vals = &lap[r.clone()];
            ClusterInfo {
                start: r.start,
                size: r.len(),
                mean: vals.iter().sum::<f64>() / vals.len() as f64,
                spread: vals[vals.len() - 1] - vals[0],
                gap_after: ranges.get(c + 1).map(|next| lap[next.start] - lap[r.end - 1]),
            }
        })
        .collect();
    let mut theory = Vec::new();
    let mut covered = 0;
    let mut l = 1;
    while covered < lap.len() {
        let lam = theoretical_eigenvalue(k, l, h)?;
        let mult = theoretical_multiplicity(k, l);
        theory.push(TheoryLevel {
            l,
            multiplicity: mult,
            normalized_laplacian_value: 1.0 - lam / (0.5 * h),
        });
        covered += mult;
        l += 1;
    }
    let leading_relative_gap = (clusters.len() >= 2)
        .then(|| (clusters[1].mean - clusters[0].mean) / (1.0 - clusters[0].mean));
    let t1 = theoretical_eigenvalue(k, 1, h)? / (0.5 * h);
    let t2 = theoretical_eigenvalue(k, 2, h)? / (0.5 * h);
    Ok(SpectralReport {
        k,
        n,
        kappa_build,
        h,
        laplacian_eigenvalues: lap,
        clusters,
        theory,
        leading_relative_gap,
        theoretical_relative_gap: (t1 - t2) / t1,
        leading_correction: bundle.eigenvalues[0] - 1.0,
        theoretical_leading_correction: t1 - 1.0,
    })
}
