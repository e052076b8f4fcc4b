#![allow(dead_code)]

use std::f64::consts::TAU;

use mfvdm::graph::{AlignmentGraph, Edge};
use mfvdm::rng::substream;
use mfvdm::sampling::{build_clean_knn_graph, rewire_graph, GroundTruth};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

/// A ring plus random chords with random weights and inconsistent angles.
pub fn random_graph(n: usize, chords: usize, seed: u64) -> AlignmentGraph {
    let mut rng = substream(seed, "test-graph", 0);
    let mut edges: Vec<Edge> = (0..n)
        .map(|i| Edge::new(i, (i + 1) % n, rng.random_range(0.5..2.0), rng.random::<f64>() * TAU))
        .collect();
    let mut seen: std::collections::HashSet<(usize, usize)> =
        edges.iter().map(|e| (e.i.min(e.j), e.i.max(e.j))).collect();
    while seen.len() < n + chords {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b && seen.insert((a.min(b), a.max(b))) {
            edges.push(Edge::new(a, b, rng.random_range(0.5..2.0), rng.random::<f64>() * TAU));
        }
    }
    AlignmentGraph::new(n, edges).unwrap()
}

pub fn sphere_graph(n: usize, kappa: usize, p: f64, seed: u64) -> (GroundTruth, AlignmentGraph) {
    let truth = GroundTruth::sphere(n, seed).unwrap();
    let clean = build_clean_knn_graph(&truth, kappa).unwrap();
    let g = if p < 1.0 { rewire_graph(&clean, p, seed).unwrap().0 } else { clean };
    (truth, g)
}

pub fn matrix_power(a: &DMatrix<Complex64>, mut e: u32) -> DMatrix<Complex64> {
    let mut result = DMatrix::identity(a.nrows(), a.ncols());
    let mut base = a.clone();
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    result
}
