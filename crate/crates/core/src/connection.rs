//! Per-frequency connection matrices.
//!
//! `W_k(i, j) = w_ij e^{ikα_ij}` on edges, `D = diag(deg)`, and the
//! normalized operator `S_k = D^{-1/2} W_k D^{-1/2}`. Only the strict upper
//! triangle is stored; the lower triangle is read back as the conjugate, so
//! Hermitian symmetry holds by construction.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::graph::AlignmentGraph;

/// Hermitian matrix with zero diagonal, stored as its strict upper triangle
/// in compressed rows, plus an index of the mirrored lower entries per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHermitian {
    n: usize,
    k: u32,
    /// `upper_ptr[i]..upper_ptr[i+1]` indexes the entries `(i, j)`, `j > i`.
    upper_ptr: Vec<usize>,
    upper_col: Vec<usize>,
    values: Vec<Complex64>,
    /// `lower_ptr[i]..lower_ptr[i+1]` indexes `(row j < i, position in values)`
    /// for the conjugated entries of row `i`.
    lower_ptr: Vec<usize>,
    lower_src: Vec<(usize, usize)>,
}

impl SparseHermitian {
    fn from_graph<F>(graph: &AlignmentGraph, k: u32, value: F) -> Self
    where
        F: Fn(usize, usize, f64, f64) -> Complex64,
    {
        let n = graph.n();
        let edges = graph.edges();
        let mut upper_ptr = vec![0usize; n + 1];
        let mut lower_count = vec![0usize; n + 1];
        for e in edges {
            upper_ptr[e.i + 1] += 1;
            lower_count[e.j + 1] += 1;
        }
        for i in 0..n {
            upper_ptr[i + 1] += upper_ptr[i];
            lower_count[i + 1] += lower_count[i];
        }
        let lower_ptr = lower_count.clone();
        let mut fill = lower_count;
        let mut upper_col = Vec::with_capacity(edges.len());
        let mut values = Vec::with_capacity(edges.len());
        let mut lower_src = vec![(0, 0); edges.len()];
        // edges are sorted by (i, j), so pushing in order fills rows in order
        for (pos, e) in edges.iter().enumerate() {
            upper_col.push(e.j);
            values.push(value(e.i, e.j, e.weight, e.angle));
            lower_src[fill[e.j]] = (e.i, pos);
            fill[e.j] += 1;
        }
        SparseHermitian {
            n,
            k,
            upper_ptr,
            upper_col,
            values,
            lower_ptr,
            lower_src,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Frequency this matrix was built for.
    pub fn frequency(&self) -> u32 {
        self.k
    }

    /// Number of stored (upper) entries.
    pub fn nnz_upper(&self) -> usize {
        self.values.len()
    }

    /// Entry `(i, j)`; zero off the sparsity pattern.
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if i == j {
            return Complex64::new(0.0, 0.0);
        }
        let (r, c, conj) = if i < j { (i, j, false) } else { (j, i, true) };
        let row = &self.upper_col[self.upper_ptr[r]..self.upper_ptr[r + 1]];
        match row.binary_search(&c) {
            Ok(p) => {
                let v = self.values[self.upper_ptr[r] + p];
                if conj {
                    v.conj()
                } else {
                    v
                }
            }
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// Stored upper entries as `(i, j, value)`, `i < j`.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (self.upper_ptr[i]..self.upper_ptr[i + 1])
                .map(move |p| (i, self.upper_col[p], self.values[p]))
        })
    }

    /// Full row `i` as `(column, value)`, lower part first.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let lower = self.lower_src[self.lower_ptr[i]..self.lower_ptr[i + 1]]
            .iter()
            .map(|&(r, p)| (r, self.values[p].conj()));
        let upper = (self.upper_ptr[i]..self.upper_ptr[i + 1])
            .map(move |p| (self.upper_col[p], self.values[p]));
        lower.chain(upper)
    }

    /// `y = A x`. Each output entry is a sequential sum over its row, so the
    /// result is independent of how rows are scheduled.
    pub fn matvec_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(r, p) in &self.lower_src[self.lower_ptr[i]..self.lower_ptr[i + 1]] {
                acc += self.values[p].conj() * x[r];
            }
            for p in self.upper_ptr[i]..self.upper_ptr[i + 1] {
                acc += self.values[p] * x[self.upper_col[p]];
            }
            *yi = acc;
        }
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.upper_entries() {
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
        m
    }
}

/// Weighted node degrees, shared by every frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVector {
    deg: Vec<f64>,
}

impl DegreeVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.deg
    }

    pub fn get(&self, i: usize) -> f64 {
        self.deg[i]
    }
}

/// `W_k(i, j) = w_ij e^{ikα_ij}`. `k = 0` gives the real weight matrix.
pub fn build_wk(graph: &AlignmentGraph, k: u32) -> SparseHermitian {
    let kf = k as f64;
    SparseHermitian::from_graph(graph, k, |_, _, w, a| Complex64::from_polar(w, kf * a))
}

/// `deg(i) = Σ_j w_ij`.
pub fn degrees(graph: &AlignmentGraph) -> Result<DegreeVector> {
    let mut deg = vec![0.0; graph.n()];
    for e in graph.edges() {
        deg[e.i] += e.weight;
        deg[e.j] += e.weight;
    }
    if let Some(node) = deg.iter().position(|&d| d <= 0.0) {
        return Err(Error::ZeroDegree { node });
    }
    Ok(DegreeVector { deg })
}

/// `S_k = D^{-1/2} W_k D^{-1/2}`.
pub fn build_sk(graph: &AlignmentGraph, k: u32) -> Result<SparseHermitian> {
    let deg = degrees(graph)?;
    let scale: Vec<f64> = deg.deg.iter().map(|d| d.sqrt().recip()).collect();
    let kf = k as f64;
    Ok(SparseHermitian::from_graph(graph, k, |i, j, w, a| {
        Complex64::from_polar(w * scale[i] * scale[j], kf * a)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;
    use crate::sampling::{build_clean_knn_graph, rewire_graph, GroundTruth};
    use nalgebra::SymmetricEigen;
    use rand::Rng;
    use std::f64::consts::PI;

    fn noisy_graph(n: usize, seed: u64) -> AlignmentGraph {
        let truth = GroundTruth::sphere(n, seed).unwrap();
        let g = build_clean_knn_graph(&truth, 6).unwrap();
        rewire_graph(&g, 0.5, seed).unwrap().0
    }

    #[test]
    fn zero_frequency_is_real_weights() {
        let g = noisy_graph(80, 1);
        let w0 = build_wk(&g, 0);
        for (i, j, v) in w0.upper_entries() {
            assert_eq!(v.im, 0.0);
            assert_eq!(v.re, g.directed(i, j).unwrap().0);
        }
    }

    #[test]
    fn single_edge_phase() {
        let g = AlignmentGraph::new(2, vec![Edge::new(0, 1, 1.0, PI / 2.0)]).unwrap();
        let w2 = build_wk(&g, 2);
        let v = w2.get(0, 1);
        assert!((v - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn hermitian_symmetry_is_exact() {
        let g = noisy_graph(120, 2);
        for k in 0..=10 {
            let w = build_wk(&g, k);
            let s = build_sk(&g, k).unwrap();
            for m in [&w, &s] {
                let d = m.to_dense();
                for i in 0..g.n() {
                    assert_eq!(d[(i, i)], Complex64::new(0.0, 0.0));
                    for j in 0..g.n() {
                        assert_eq!(d[(i, j)], d[(j, i)].conj());
                        assert_eq!(m.get(i, j), d[(i, j)]);
                    }
                }
            }
        }
    }

    #[test]
    fn sparsity_pattern_is_edge_set() {
        let g = noisy_graph(100, 3);
        for k in [1, 4, 9] {
            let w = build_wk(&g, k);
            let pattern: Vec<(usize, usize)> = w.upper_entries().map(|(i, j, _)| (i, j)).collect();
            let edges: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.i, e.j)).collect();
            assert_eq!(pattern, edges);
        }
    }

    #[test]
    fn degrees_from_triangle() {
        let g = AlignmentGraph::new(
            3,
            vec![
                Edge::new(0, 1, 1.0, 0.1),
                Edge::new(0, 2, 2.0, 0.2),
                Edge::new(1, 2, 3.0, 0.3),
            ],
        )
        .unwrap();
        assert_eq!(degrees(&g).unwrap().as_slice(), &[3.0, 4.0, 5.0]);
    }

    #[test]
    fn degrees_match_every_frequency_modulus() {
        let g = noisy_graph(90, 4);
        let deg = degrees(&g).unwrap();
        for k in [1, 5] {
            let w = build_wk(&g, k);
            for i in 0..g.n() {
                let s: f64 = w.row(i).map(|(_, v)| v.norm()).sum();
                assert!((s - deg.get(i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unit_weight_degree_counts_edges() {
        let truth = GroundTruth::sphere(400, 8).unwrap();
        let g = build_clean_knn_graph(&truth, 150).unwrap();
        let deg = degrees(&g).unwrap();
        let counts = g.edge_counts();
        for i in 0..g.n() {
            assert_eq!(deg.get(i), counts[i] as f64);
        }
    }

    #[test]
    fn two_node_operator() {
        let g = AlignmentGraph::new(2, vec![Edge::new(0, 1, 1.0, 0.0)]).unwrap();
        let s = build_sk(&g, 1).unwrap().to_dense();
        assert_eq!(s[(0, 1)], Complex64::new(1.0, 0.0));
        assert_eq!(s[(1, 0)], Complex64::new(1.0, 0.0));
        let eig = SymmetricEigen::new(s).eigenvalues;
        let mut ev: Vec<f64> = eig.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] + 1.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn spectrum_within_unit_interval() {
        for seed in 0..3 {
            let g = noisy_graph(150, 10 + seed);
            for k in 0..=10 {
                let s = build_sk(&g, k).unwrap().to_dense();
                for &l in SymmetricEigen::new(s).eigenvalues.iter() {
                    assert!((-1.0 - 1e-10..=1.0 + 1e-10).contains(&l), "k={k} λ={l}");
                }
            }
        }
    }

    #[test]
    fn zero_frequency_top_eigenvector_is_sqrt_degree() {
        let truth = GroundTruth::sphere(120, 12).unwrap();
        let g = build_clean_knn_graph(&truth, 5).unwrap();
        let s = build_sk(&g, 0).unwrap();
        let deg = degrees(&g).unwrap();
        let v: Vec<Complex64> = deg.as_slice().iter().map(|d| Complex64::new(d.sqrt(), 0.0)).collect();
        let sv = s.matvec(&v);
        for (a, b) in sv.iter().zip(&v) {
            assert!((a - b).norm() < 1e-12);
        }
        let top = SymmetricEigen::new(s.to_dense())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((top - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_forms_are_nonnegative() {
        let g = noisy_graph(100, 13);
        let mut rng = crate::rng::substream(1, "psd", 0);
        for k in 0..=6 {
            let s = build_sk(&g, k).unwrap();
            for _ in 0..100 {
                let z: Vec<Complex64> = (0..g.n())
                    .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                    .collect();
                let sz = s.matvec(&z);
                let zz: f64 = z.iter().map(|v| v.norm_sqr()).sum();
                let zsz: f64 = z.iter().zip(&sz).map(|(a, b)| (a.conj() * b).re).sum();
                assert!(zz + zsz >= -1e-10);
                assert!(zz - zsz >= -1e-10);
            }
        }
    }

    #[test]
    fn random_walk_factorization() {
        // D^{-1} W_k = D^{-1/2} S_k D^{1/2}
        let g = noisy_graph(60, 14);
        let deg = degrees(&g).unwrap();
        for k in [1, 3] {
            let w = build_wk(&g, k).to_dense();
            let s = build_sk(&g, k).unwrap().to_dense();
            for i in 0..g.n() {
                for j in 0..g.n() {
                    let lhs = w[(i, j)] / deg.get(i);
                    let rhs = s[(i, j)] * (deg.get(j).sqrt() / deg.get(i).sqrt());
                    assert!((lhs - rhs).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn matvec_matches_dense() {
        let g = noisy_graph(70, 15);
        let s = build_sk(&g, 3).unwrap();
        let d = s.to_dense();
        let x: Vec<Complex64> = (0..g.n()).map(|i| Complex64::new(i as f64, 1.0 / (1.0 + i as f64))).collect();
        let y = s.matvec(&x);
        let yd = &d * nalgebra::DVector::from_vec(x);
        for i in 0..g.n() {
            assert!((y[i] - yd[i]).norm() < 1e-12);
        }
    }
}
