//! Spectral features, affinities and exact nearest-neighbor search.
//!
//! The frequency-`k` mapping `V̂_t^(k)(i)` lives in `m_k²` dimensions, but its
//! inner products factor through the compact features
//! `φ_k(i)_l = λ_l^t u_l(i)`:
//!
//! ```text
//! ⟨V̂_t^(k)(i), V̂_t^(k)(j)⟩ = |⟨φ_k(i), φ_k(j)⟩|² = |Ŝ_k^{2t}(i, j)|²
//! ```
//!
//! so only the `n × m_k` feature matrices are ever stored.

use std::cmp::Ordering;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::SpectralBundle;

/// Row-major `n × m` features `φ_k(i)_l = λ_l^t u_l(i)` of one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyFeatures {
    pub k: u32,
    pub t: u32,
    n: usize,
    m: usize,
    data: Vec<Complex64>,
}

impl FrequencyFeatures {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.data[i * self.m..(i + 1) * self.m]
    }

    /// `⟨φ(i), φ(j)⟩ = Σ_l φ(i)_l conj(φ(j)_l)`, the truncated `S_k^{2t}(i, j)`.
    #[inline]
    pub fn inner(&self, i: usize, j: usize) -> Complex64 {
        inner(self.row(i), self.row(j))
    }

    /// `‖φ(i)‖²`.
    pub fn norm_sqr(&self, i: usize) -> f64 {
        self.row(i).iter().map(|x| x.norm_sqr()).sum()
    }
}

#[inline]
fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        // x · conj(y)
        re += x.re * y.re + x.im * y.im;
        im += x.im * y.re - x.re * y.im;
    }
    Complex64::new(re, im)
}

/// Scale eigenvector columns by `λ_l^t` (integer power, sign kept for odd `t`).
pub fn build_features(bundle: &SpectralBundle, t: u32) -> Result<FrequencyFeatures> {
    if t == 0 {
        return Err(Error::param("diffusion time t must be at least 1"));
    }
    let (n, m) = (bundle.n(), bundle.m());
    let scale: Vec<f64> = bundle.eigenvalues.iter().map(|l| l.powi(t as i32)).collect();
    let mut data = Vec::with_capacity(n * m);
    for i in 0..n {
        for (l, s) in scale.iter().enumerate() {
            data.push(bundle.eigenvectors[(i, l)] * *s);
        }
    }
    Ok(FrequencyFeatures {
        k: bundle.k,
        t,
        n,
        m,
        data,
    })
}

/// `|⟨φ_k(i), φ_k(j)⟩|²`.
pub fn affinity_k(features: &FrequencyFeatures, i: usize, j: usize) -> f64 {
    features.inner(i, j).norm_sqr()
}

/// Which affinity an [`EmbeddingSet`] realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// All frequencies `1..=k_max`.
    Mfvdm,
    /// Frequency 1 only.
    Vdm,
    /// A single frequency `k`.
    Frequency(u32),
    /// Real scalar diffusion maps from `S_0`.
    Dm,
}

impl Method {
    pub fn tag(&self) -> String {
        match self {
            Method::Mfvdm => "mfvdm".into(),
            Method::Vdm => "vdm".into(),
            Method::Frequency(k) => format!("freq{k}"),
            Method::Dm => "dm".into(),
        }
    }

    /// Whether the embedding carries phases usable for alignment.
    pub fn supports_alignment(&self) -> bool {
        !matches!(self, Method::Dm)
    }
}

/// Features for a set of frequencies together with per-node norms.
///
/// For the phase-carrying methods the norm is `‖V̂_t(i)‖ = √(Σ_k ‖φ_k(i)‖⁴)`
/// and the affinity is `Σ_k |⟨φ_k(i), φ_k(j)⟩|²`. For [`Method::Dm`] the
/// single real feature block is compared with the plain Euclidean inner
/// product, normalized the same way.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    method: Method,
    t: u32,
    features: Vec<FrequencyFeatures>,
    norms: Vec<f64>,
}

impl EmbeddingSet {
    /// Assemble from one bundle per frequency.
    pub fn new(method: Method, bundles: &[&SpectralBundle], t: u32) -> Result<Self> {
        if bundles.is_empty() {
            return Err(Error::EmptyInput("embedding needs at least one spectral bundle"));
        }
        let n = bundles[0].n();
        if bundles.iter().any(|b| b.n() != n) {
            return Err(Error::param("spectral bundles disagree on n"));
        }
        if method == Method::Dm && (bundles.len() != 1 || bundles[0].k != 0) {
            return Err(Error::param("DM embedding takes exactly the k = 0 bundle"));
        }
        if method != Method::Dm && bundles.iter().any(|b| b.k == 0) {
            return Err(Error::param("phase embeddings use frequencies k ≥ 1"));
        }
        let features = bundles
            .iter()
            .map(|b| build_features(b, t))
            .collect::<Result<Vec<_>>>()?;
        let norms = EmbeddingSet::norms_of(method, &features);
        if let Some(node) = norms.iter().position(|&x| !(x > 0.0)) {
            return Err(Error::DegenerateEmbedding { node });
        }
        Ok(EmbeddingSet {
            method,
            t,
            features,
            norms,
        })
    }

    /// MFVDM over every supplied bundle (frequencies `1..=k_max`).
    pub fn mfvdm(bundles: &[SpectralBundle], t: u32) -> Result<Self> {
        let refs: Vec<&SpectralBundle> = bundles.iter().collect();
        EmbeddingSet::new(Method::Mfvdm, &refs, t)
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn n(&self) -> usize {
        self.norms.len()
    }

    pub fn features(&self) -> &[FrequencyFeatures] {
        &self.features
    }

    pub fn features_mut(&mut self) -> &mut [FrequencyFeatures] {
        &mut self.features
    }

    /// Largest frequency present.
    pub fn k_max(&self) -> u32 {
        self.features.iter().map(|f| f.k).max().unwrap_or(0)
    }

    pub fn norm(&self, i: usize) -> f64 {
        self.norms[i]
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// Recompute norms after features were modified in place.
    pub fn refresh_norms(&mut self) {
        let refreshed = EmbeddingSet::norms_of(self.method, &self.features);
        self.norms = refreshed;
    }

    fn norms_of(method: Method, features: &[FrequencyFeatures]) -> Vec<f64> {
        let n = features[0].n();
        (0..n)
            .map(|i| {
                if method == Method::Dm {
                    features[0].norm_sqr(i).sqrt()
                } else {
                    features.iter().map(|f| f.norm_sqr(i).powi(2)).sum::<f64>().sqrt()
                }
            })
            .collect()
    }

    /// Unnormalized affinity: `Σ_k |⟨φ_k(i), φ_k(j)⟩|²`, or `Re⟨ψ(i), ψ(j)⟩` for DM.
    pub fn affinity(&self, i: usize, j: usize) -> f64 {
        match self.method {
            Method::Dm => self.features[0].inner(i, j).re,
            _ => self.features.iter().map(|f| affinity_k(f, i, j)).sum(),
        }
    }

    /// `N_t(i, j) = affinity / (‖V̂_t(i)‖ ‖V̂_t(j)‖)`, exactly 1 on the diagonal.
    pub fn normalized_affinity(&self, i: usize, j: usize) -> Result<f64> {
        for node in [i, j] {
            if !(self.norms[node] > 0.0) {
                return Err(Error::DegenerateEmbedding { node });
            }
        }
        if i == j {
            return Ok(1.0);
        }
        Ok(self.affinity(i, j) / (self.norms[i] * self.norms[j]))
    }

    /// Squared diffusion distance `d² = 2 - 2 N_t(i, j)`.
    pub fn distance(&self, i: usize, j: usize) -> Result<f64> {
        Ok(2.0 - 2.0 * self.normalized_affinity(i, j)?)
    }
}

/// `Σ_k |Ŝ_k^{2t}(i, j)|²` over the frequencies of `embeddings`.
pub fn mfvdm_affinity(embeddings: &EmbeddingSet, i: usize, j: usize) -> f64 {
    embeddings.affinity(i, j)
}

pub fn normalized_affinity(embeddings: &EmbeddingSet, i: usize, j: usize) -> Result<f64> {
    embeddings.normalized_affinity(i, j)
}

/// Squared distance `d²_MFVDM,t(i, j)`.
pub fn mfvdm_distance(embeddings: &EmbeddingSet, i: usize, j: usize) -> Result<f64> {
    embeddings.distance(i, j)
}

/// DM (`k = 0` bundle) or VDM (`k = 1` bundle) baseline with the leading `m`
/// eigenpairs.
pub fn baseline_embedding(bundle: &SpectralBundle, t: u32, m: usize) -> Result<EmbeddingSet> {
    let b = bundle.truncated(m);
    match bundle.k {
        0 => EmbeddingSet::new(Method::Dm, &[&b], t),
        1 => EmbeddingSet::new(Method::Vdm, &[&b], t),
        k => Err(Error::param(format!(
            "baselines use the k = 0 (DM) or k = 1 (VDM) bundle, got k = {k}"
        ))),
    }
}

/// Per-node `κ` nearest neighbors with squared distances, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    kappa: usize,
    lists: Vec<Vec<(usize, f64)>>,
}

impl NeighborList {
    pub fn new(kappa: usize, lists: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        for (i, list) in lists.iter().enumerate() {
            if list.len() != kappa {
                return Err(Error::param(format!("node {i} lists {} neighbors, expected {kappa}", list.len())));
            }
            if list.iter().any(|&(j, _)| j == i || j >= lists.len()) {
                return Err(Error::param(format!("node {i} has an invalid neighbor")));
            }
            if list.windows(2).any(|w| w[0].1 > w[1].1) {
                return Err(Error::param(format!("node {i} neighbors not sorted")));
            }
        }
        Ok(NeighborList { kappa, lists })
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn n(&self) -> usize {
        self.lists.len()
    }

    pub fn of(&self, i: usize) -> &[(usize, f64)] {
        &self.lists[i]
    }

    /// `(node, rank, neighbor, squared distance)` in node-then-rank order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        self.lists
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.iter().enumerate().map(move |(r, &(j, d))| (i, r, j, d)))
    }
}

fn by_distance_then_index(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))
}

/// Exact κ-NN under the squared diffusion distance; ties go to the lower index.
///
/// Rows are processed independently in parallel; each row is a sequential
/// scan, so the result does not depend on the thread count.
pub fn nn_search(embeddings: &EmbeddingSet, kappa: usize) -> Result<NeighborList> {
    let n = embeddings.n();
    if kappa == 0 || kappa >= n {
        return Err(Error::param(format!(
            "κ must satisfy 1 ≤ κ < n, got κ = {kappa}, n = {n}"
        )));
    }
    let lists = (0..n)
        .into_par_iter()
        .map(|i| {
            let inv_i = embeddings.norm(i).recip();
            let mut cand: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let nt = embeddings.affinity(i, j) * inv_i / embeddings.norm(j);
                    (j, 2.0 - 2.0 * nt)
                })
                .collect();
            cand.select_nth_unstable_by(kappa - 1, by_distance_then_index);
            cand.truncate(kappa);
            cand.sort_by(by_distance_then_index);
            cand
        })
        .collect();
    NeighborList::new(kappa, lists)
}
