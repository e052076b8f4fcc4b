//! Undirected graphs with an SO(2) angle on every edge.

use std::collections::HashSet;

use crate::angle::{negate, wrap_to_tau};
use crate::error::{Error, Result};

/// One undirected edge, stored with `i < j`.
///
/// `angle` is the alignment `α_ij` read in the `i → j` direction; the reverse
/// direction carries `α_ji = -α_ij mod 2π` and the same weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
    pub angle: f64,
}

impl Edge {
    pub fn new(i: usize, j: usize, weight: f64, angle: f64) -> Self {
        Edge { i, j, weight, angle }
    }

    /// Same edge with endpoints ordered `i < j`.
    fn canonical(self) -> Self {
        if self.i > self.j {
            Edge {
                i: self.j,
                j: self.i,
                weight: self.weight,
                angle: negate(self.angle),
            }
        } else {
            Edge {
                angle: wrap_to_tau(self.angle),
                ..self
            }
        }
    }
}

/// Weighted undirected graph with one angle per edge.
///
/// Edges are sorted lexicographically by `(i, j)`. Construction enforces: no
/// self-loops, no duplicates, strictly positive finite weights, angles in
/// `[0, 2π)`, and degree at least one for every node.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentGraph {
    n: usize,
    edges: Vec<Edge>,
}

impl AlignmentGraph {
    /// Build and validate a graph. Edges given with `i > j` are flipped
    /// (angle negated); angles are wrapped to `[0, 2π)`.
    pub fn new(n: usize, edges: Vec<Edge>) -> Result<Self> {
        let mut edges: Vec<Edge> = edges.into_iter().map(Edge::canonical).collect();
        edges.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)));
        let graph = AlignmentGraph { n, edges };
        graph.validate()?;
        Ok(graph)
    }

    /// Check every structural invariant.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::EmptyInput("graph has no nodes"));
        }
        let mut degree = vec![0usize; self.n];
        for (idx, e) in self.edges.iter().enumerate() {
            if e.i == e.j {
                return Err(Error::InvalidGraph(format!("self-loop at node {}", e.i)));
            }
            if e.i > e.j {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) not stored with i < j",
                    e.i, e.j
                )));
            }
            if e.j >= self.n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) out of range for n = {}",
                    e.i, e.j, self.n
                )));
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) has non-positive weight {}",
                    e.i, e.j, e.weight
                )));
            }
            if !(e.angle.is_finite() && (0.0..std::f64::consts::TAU).contains(&e.angle)) {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) has angle {} outside [0, 2π)",
                    e.i, e.j, e.angle
                )));
            }
            if idx > 0 {
                let prev = &self.edges[idx - 1];
                if (prev.i, prev.j) == (e.i, e.j) {
                    return Err(Error::InvalidGraph(format!(
                        "duplicate edge ({}, {})",
                        e.i, e.j
                    )));
                }
                if (prev.i, prev.j) > (e.i, e.j) {
                    return Err(Error::InvalidGraph("edges not sorted".into()));
                }
            }
            degree[e.i] += 1;
            degree[e.j] += 1;
        }
        if let Some(node) = degree.iter().position(|&d| d == 0) {
            return Err(Error::ZeroDegree { node });
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Number of incident edges per node.
    pub fn edge_counts(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for e in &self.edges {
            d[e.i] += 1;
            d[e.j] += 1;
        }
        d
    }

    /// Neighbor sets, one per node.
    pub fn adjacency(&self) -> Vec<HashSet<usize>> {
        let mut adj = vec![HashSet::new(); self.n];
        for e in &self.edges {
            adj[e.i].insert(e.j);
            adj[e.j].insert(e.i);
        }
        adj
    }

    /// Look up an edge and return `(weight, α)` read in the `a → b` direction.
    pub fn directed(&self, a: usize, b: usize) -> Option<(f64, f64)> {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        let pos = self
            .edges
            .binary_search_by(|e| (e.i, e.j).cmp(&(i, j)))
            .ok()?;
        let e = &self.edges[pos];
        Some(if a < b {
            (e.weight, e.angle)
        } else {
            (e.weight, negate(e.angle))
        })
    }

    /// Replace every weight by a Gaussian kernel `exp(-d_ij² / σ)` of the
    /// supplied pairwise distance.
    pub fn with_gaussian_weights<F>(&self, sigma: f64, distance: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> f64,
    {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::param(format!("gaussian width must be positive, got {sigma}")));
        }
        let edges = self
            .edges
            .iter()
            .map(|e| {
                let d = distance(e.i, e.j);
                Edge {
                    weight: (-d * d / sigma).exp(),
                    ..*e
                }
            })
            .collect();
        AlignmentGraph::new(self.n, edges)
    }
}
