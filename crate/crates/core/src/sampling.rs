//! Synthetic datasets with known alignments.
//!
//! Two base manifolds are supported. On the sphere, every node is a
//! Haar-random rotation `R ∈ SO(3)`; its third column is the viewing
//! direction and the pairwise angle is the closest in-plane rotation
//! between frames. On the torus every node gets an independent frame angle
//! `α_i` and pairwise angles are `α_i - α_j`, which is globally consistent.

use std::collections::BTreeSet;
use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::angle::wrap_to_tau;
use crate::error::{Error, Result};
use crate::graph::{AlignmentGraph, Edge};
use crate::rng::{substream, StreamRng};

/// Samples are drawn in fixed-size chunks, each from its own substream, so
/// the output does not depend on the number of worker threads.
const CHUNK: usize = 1024;

fn sample_chunked<T, F>(n: usize, seed: u64, name: &str, draw: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut StreamRng) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Vec<T>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, name, c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len).map(|_| draw(&mut rng)).collect()
        })
        .collect();
    parts.into_iter().flatten().collect()
}

/// A rotation matrix `R = [R¹, R², R³]`; the viewing direction is `R³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationSample {
    matrix: Matrix3<f64>,
}

impl RotationSample {
    /// Wrap a matrix after checking it is a proper rotation to 1e-12.
    pub fn new(matrix: Matrix3<f64>) -> Result<Self> {
        let ortho = (matrix * matrix.transpose() - Matrix3::identity()).amax();
        let det = matrix.determinant();
        if ortho > 1e-12 || (det - 1.0).abs() > 1e-12 {
            return Err(Error::param(format!(
                "not a rotation: |RRᵀ - I| = {ortho:.2e}, det = {det}"
            )));
        }
        Ok(RotationSample { matrix })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    pub fn view(&self) -> Vector3<f64> {
        self.matrix.column(2).into_owned()
    }
}

/// Draw `n` i.i.d. Haar-uniform rotations.
///
/// Uses the normalized 4-D Gaussian quaternion, which is uniform on `S³`
/// and hence Haar on `SO(3)`.
pub fn sample_so3_uniform(n: usize, seed: u64) -> Result<Vec<RotationSample>> {
    if n == 0 {
        return Err(Error::EmptyInput("rotation sample count must be positive"));
    }
    Ok(sample_chunked(n, seed, "so3", |rng| loop {
        let q = Quaternion::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        if q.norm() > 1e-8 {
            let r = UnitQuaternion::from_quaternion(q).to_rotation_matrix();
            break RotationSample {
                matrix: r.into_inner(),
            };
        }
    }))
}

/// Closest in-plane rotation angle between two frames.
///
/// With `Q` the upper-left 2×2 block of `R_iᵀ R_j`, the rotation `Rot(α)`
/// minimizing `‖Q - Rot(α)‖_F` is `α = atan2(Q₂₁ - Q₁₂, Q₁₁ + Q₂₂)`.
pub fn optimal_inplane_angle(ri: &RotationSample, rj: &RotationSample) -> Result<f64> {
    let q = ri.matrix.transpose() * rj.matrix;
    let s = q[(1, 0)] - q[(0, 1)];
    let c = q[(0, 0)] + q[(1, 1)];
    if s.hypot(c) < 1e-12 {
        return Err(Error::DegenerateAlignment);
    }
    Ok(wrap_to_tau(s.atan2(c)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusRadii {
    pub major: f64,
    pub minor: f64,
}

impl TorusRadii {
    pub fn new(major: f64, minor: f64) -> Result<Self> {
        if !(minor > 0.0 && major > minor && major.is_finite()) {
            return Err(Error::InvalidGeometry { major, minor });
        }
        Ok(TorusRadii { major, minor })
    }

    /// Embedding `((R + r cos u) cos v, (R + r cos u) sin v, r sin u)`.
    pub fn point(&self, u: f64, v: f64) -> Vector3<f64> {
        let ring = self.major + self.minor * u.cos();
        Vector3::new(ring * v.cos(), ring * v.sin(), self.minor * u.sin())
    }
}

impl Default for TorusRadii {
    fn default() -> Self {
        TorusRadii {
            major: 1.0,
            minor: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusSample {
    pub u: f64,
    pub v: f64,
    pub position: Vector3<f64>,
    pub frame_angle: f64,
    pub radii: TorusRadii,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TorusSampling {
    /// Uniform with respect to surface area.
    #[default]
    AreaUniform,
    /// Uniform in the `(u, v)` parameter square.
    ParameterUniform,
}

/// Area-uniform torus samples with i.i.d. uniform frame angles.
pub fn sample_torus_uniform(
    n: usize,
    major: f64,
    minor: f64,
    seed: u64,
) -> Result<Vec<TorusSample>> {
    sample_torus(n, TorusRadii::new(major, minor)?, TorusSampling::AreaUniform, seed)
}

/// Torus samples. The area element is `r (R + r cos u) du dv`, so the
/// area-uniform `u` marginal is drawn by rejection against `R + r`.
pub fn sample_torus(
    n: usize,
    radii: TorusRadii,
    mode: TorusSampling,
    seed: u64,
) -> Result<Vec<TorusSample>> {
    let radii = TorusRadii::new(radii.major, radii.minor)?;
    if n == 0 {
        return Err(Error::EmptyInput("torus sample count must be positive"));
    }
    Ok(sample_chunked(n, seed, "torus", |rng| {
        let u = match mode {
            TorusSampling::ParameterUniform => rng.random::<f64>() * TAU,
            TorusSampling::AreaUniform => loop {
                let u = rng.random::<f64>() * TAU;
                let accept = rng.random::<f64>() * (radii.major + radii.minor);
                if accept < radii.major + radii.minor * u.cos() {
                    break u;
                }
            },
        };
        let v = rng.random::<f64>() * TAU;
        let frame_angle = rng.random::<f64>() * TAU;
        TorusSample {
            u,
            v,
            position: radii.point(u, v),
            frame_angle,
            radii,
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldKind {
    Sphere,
    Torus,
}

impl ManifoldKind {
    pub fn name(self) -> &'static str {
        match self {
            ManifoldKind::Sphere => "sphere",
            ManifoldKind::Torus => "torus",
        }
    }
}

/// Per-node base points and frames with the true pairwise quantities.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruth {
    Sphere { rotations: Vec<RotationSample> },
    Torus { samples: Vec<TorusSample>, radii: TorusRadii },
}

impl GroundTruth {
    pub fn sphere(n: usize, seed: u64) -> Result<Self> {
        Ok(GroundTruth::Sphere {
            rotations: sample_so3_uniform(n, seed)?,
        })
    }

    pub fn torus(n: usize, radii: TorusRadii, mode: TorusSampling, seed: u64) -> Result<Self> {
        Ok(GroundTruth::Torus {
            samples: sample_torus(n, radii, mode, seed)?,
            radii,
        })
    }

    pub fn kind(&self) -> ManifoldKind {
        match self {
            GroundTruth::Sphere { .. } => ManifoldKind::Sphere,
            GroundTruth::Torus { .. } => ManifoldKind::Torus,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            GroundTruth::Sphere { rotations } => rotations.len(),
            GroundTruth::Torus { samples, .. } => samples.len(),
        }
    }

    /// True alignment `α_ij ∈ [0, 2π)`.
    pub fn alignment(&self, i: usize, j: usize) -> Result<f64> {
        match self {
            GroundTruth::Sphere { rotations } => {
                optimal_inplane_angle(&rotations[i], &rotations[j])
            }
            GroundTruth::Torus { samples, .. } => {
                Ok(wrap_to_tau(samples[i].frame_angle - samples[j].frame_angle))
            }
        }
    }

    /// Geodesic distance on the base manifold.
    ///
    /// The torus uses the flat wrap-around metric `√(r²Δu² + R²Δv²)`.
    pub fn geodesic_distance(&self, i: usize, j: usize) -> f64 {
        match self {
            GroundTruth::Sphere { rotations } => {
                if i == j {
                    return 0.0;
                }
                // same as arccos of the clamped dot product, but exact near 0 and π
                let (a, b) = (rotations[i].view(), rotations[j].view());
                a.cross(&b).norm().atan2(a.dot(&b))
            }
            GroundTruth::Torus { samples, radii } => {
                let du = crate::angle::wrap_to_pi(samples[i].u - samples[j].u);
                let dv = crate::angle::wrap_to_pi(samples[i].v - samples[j].v);
                (radii.minor * radii.minor * du * du + radii.major * radii.major * dv * dv).sqrt()
            }
        }
    }

    /// Largest possible geodesic distance.
    pub fn max_geodesic(&self) -> f64 {
        match self {
            GroundTruth::Sphere { .. } => PI,
            GroundTruth::Torus { radii, .. } => PI * radii.minor.hypot(radii.major),
        }
    }
}

/// Clean κ-NN graph under the geodesic distance, unit weights, true angles.
///
/// `(i, j)` is an edge iff `j` is among the `kappa` nearest nodes of `i` or
/// vice versa. Distance ties are broken by the lower node index.
pub fn build_clean_knn_graph(truth: &GroundTruth, kappa: usize) -> Result<AlignmentGraph> {
    let n = truth.n();
    if kappa == 0 || kappa >= n {
        return Err(Error::param(format!(
            "κ_build must satisfy 1 ≤ κ < n, got κ = {kappa}, n = {n}"
        )));
    }
    let lists: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (truth.geodesic_distance(i, j), j))
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            cand.select_nth_unstable_by(kappa - 1, cmp);
            cand.truncate(kappa);
            cand.into_iter().map(|(_, j)| j).collect()
        })
        .collect();
    let mut pairs = BTreeSet::new();
    for (i, list) in lists.iter().enumerate() {
        for &j in list {
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    let edges = pairs
        .into_iter()
        .map(|(i, j)| Ok(Edge::new(i, j, 1.0, truth.alignment(i, j)?)))
        .collect::<Result<Vec<_>>>()?;
    AlignmentGraph::new(n, edges)
}

/// Counters from one rewiring pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RewireStats {
    /// Original edges kept by the Bernoulli(p) draw.
    pub kept: usize,
    /// Original edges removed and replaced by a random edge.
    pub rewired: usize,
    /// Original edges removed without replacement because the lower
    /// endpoint was already connected to every other node.
    pub skipped: usize,
    /// Original edges kept despite a failed draw because removing them would
    /// have isolated a node.
    pub kept_to_avoid_isolation: usize,
}

/// Random rewiring noise.
///
/// Each undirected edge `(i, j)`, `i < j`, independently survives with
/// probability `p`. Otherwise it is removed and `i` is linked to a node
/// drawn uniformly from those not currently adjacent to `i` (and not `i`),
/// carrying the old weight and a uniform random angle. Edges are processed
/// in `(i, j)` order from a single named substream.
pub fn rewire_graph(
    graph: &AlignmentGraph,
    p: f64,
    seed: u64,
) -> Result<(AlignmentGraph, RewireStats)> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(format!("rewiring probability must lie in [0, 1], got {p}")));
    }
    let n = graph.n();
    let mut rng = substream(seed, "rewire", 0);
    let mut adj = graph.adjacency();
    let mut stats = RewireStats::default();
    let mut out: Vec<Edge> = Vec::with_capacity(graph.num_edges());

    for e in graph.edges() {
        let draw: f64 = rng.random();
        if draw < p {
            stats.kept += 1;
            out.push(*e);
            continue;
        }
        let (i, j) = (e.i, e.j);
        let free = n - 1 - adj[i].len();
        if adj[j].len() == 1 || (free == 0 && adj[i].len() == 1) {
            stats.kept_to_avoid_isolation += 1;
            out.push(*e);
            continue;
        }
        adj[i].remove(&j);
        adj[j].remove(&i);
        if free == 0 {
            stats.skipped += 1;
            continue;
        }
        let target = if 2 * free >= n - 1 {
            loop {
                let c = rng.random_range(0..n);
                if c != i && c != j && !adj[i].contains(&c) {
                    break c;
                }
            }
        } else {
            let cand: Vec<usize> = (0..n)
                .filter(|&c| c != i && c != j && !adj[i].contains(&c))
                .collect();
            cand[rng.random_range(0..cand.len())]
        };
        let angle = rng.random::<f64>() * TAU;
        adj[i].insert(target);
        adj[target].insert(i);
        out.push(Edge::new(i, target, e.weight, angle));
        stats.rewired += 1;
    }
    Ok((AlignmentGraph::new(n, out)?, stats))
}
