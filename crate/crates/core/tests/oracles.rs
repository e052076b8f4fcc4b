//! Spectral quantities checked against dense linear algebra.

mod common;

use std::f64::consts::TAU;

use common::{matrix_power, random_graph};
use mfvdm::alignment::{alignment_sequence, estimate_angle, AlignmentSequence};
use mfvdm::angle::wrap_to_pi;
use mfvdm::connection::build_sk;
use mfvdm::embedding::{
    affinity_k, mfvdm_affinity, mfvdm_distance, nn_search, normalized_affinity, EmbeddingSet,
    Method,
};
use mfvdm::graph::AlignmentGraph;
use mfvdm::rng::substream;
use mfvdm::spectral::{top_eigenpairs, EigenOptions, SpectralBundle};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

fn full_bundles(g: &AlignmentGraph, ks: &[u32]) -> Vec<SpectralBundle> {
    ks.iter()
        .map(|&k| top_eigenpairs(&build_sk(g, k).unwrap(), g.n(), &EigenOptions::default()).unwrap())
        .collect()
}

#[test]
fn untruncated_affinity_and_z_match_dense_powers() {
    let g = random_graph(80, 160, 1);
    let ks = [1, 2, 5];
    let bundles = full_bundles(&g, &ks);
    for t in [1, 2, 10] {
        let emb = EmbeddingSet::mfvdm(&bundles, t).unwrap();
        let powers: Vec<DMatrix<Complex64>> = ks
            .iter()
            .map(|&k| matrix_power(&build_sk(&g, k).unwrap().to_dense(), 2 * t))
            .collect();
        for i in 0..g.n() {
            for j in 0..g.n() {
                let z = alignment_sequence(&emb, i, j).unwrap();
                let mut total = 0.0;
                for (c, p) in powers.iter().enumerate() {
                    let expect = p[(i, j)];
                    assert!((z.z[c] - expect).norm() < 1e-10, "t={t} k={} ({i},{j})", ks[c]);
                    let a = affinity_k(&emb.features()[c], i, j);
                    assert!((a - expect.norm_sqr()).abs() < 1e-10);
                    total += expect.norm_sqr();
                }
                assert!((mfvdm_affinity(&emb, i, j) - total).abs() < 1e-10);
            }
        }
    }
}

/// Explicit `m²`-dimensional map `V(i)_{l,l'} = (λ_l λ_l')^t u_l(i) conj(u_l'(i))`
/// concatenated over frequencies.
fn explicit_map(bundles: &[SpectralBundle], t: u32, i: usize) -> Vec<Complex64> {
    let mut v = Vec::new();
    for b in bundles {
        for l in 0..b.m() {
            for lp in 0..b.m() {
                let scale = (b.eigenvalues[l] * b.eigenvalues[lp]).powi(t as i32);
                v.push(b.eigenvectors[(i, l)] * b.eigenvectors[(i, lp)].conj() * scale);
            }
        }
    }
    v
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

#[test]
fn normalized_affinity_matches_explicit_map() {
    let g = random_graph(60, 120, 2);
    let bundles: Vec<SpectralBundle> = full_bundles(&g, &[1, 2, 3])
        .into_iter()
        .map(|b| b.truncated(12))
        .collect();
    let t = 2;
    let emb = EmbeddingSet::mfvdm(&bundles, t).unwrap();
    let maps: Vec<Vec<Complex64>> = (0..g.n()).map(|i| explicit_map(&bundles, t, i)).collect();
    let unit: Vec<Vec<Complex64>> = maps
        .iter()
        .map(|v| {
            let norm = cdot(v, v).re.sqrt();
            v.iter().map(|x| x / norm).collect()
        })
        .collect();
    for i in 0..g.n() {
        assert!((emb.norm(i) - cdot(&maps[i], &maps[i]).re.sqrt()).abs() < 1e-12);
        assert_eq!(normalized_affinity(&emb, i, i).unwrap(), 1.0);
        for j in 0..g.n() {
            let n_ij = normalized_affinity(&emb, i, j).unwrap();
            let oracle = cdot(&unit[i], &unit[j]);
            assert!((n_ij - oracle.re).abs() < 1e-10 && oracle.im.abs() < 1e-10);
            assert!((-1e-12..=1.0 + 1e-12).contains(&n_ij));
            let d2 = mfvdm_distance(&emb, i, j).unwrap();
            assert!((d2 - (2.0 - 2.0 * n_ij)).abs() < 1e-12);
            let diff: Vec<Complex64> = unit[i].iter().zip(&unit[j]).map(|(a, b)| a - b).collect();
            assert!((d2 - cdot(&diff, &diff).re).abs() < 1e-10);
        }
    }
}

#[test]
fn distance_satisfies_triangle_inequality() {
    let g = random_graph(100, 300, 3);
    let bundles: Vec<SpectralBundle> = full_bundles(&g, &[1, 2])
        .into_iter()
        .map(|b| b.truncated(20))
        .collect();
    let emb = EmbeddingSet::mfvdm(&bundles, 1).unwrap();
    let d = |a, b| mfvdm_distance(&emb, a, b).unwrap().max(0.0).sqrt();
    let mut rng = substream(3, "triangle", 0);
    for _ in 0..5000 {
        let (i, j, l) = (rng.random_range(0..100), rng.random_range(0..100), rng.random_range(0..100));
        assert!(d(i, j) <= d(i, l) + d(l, j) + 1e-10);
    }
}

#[test]
fn truncation_error_shrinks_with_more_eigenpairs() {
    let g = random_graph(70, 140, 4);
    let full = &full_bundles(&g, &[2])[0];
    let t = 1;
    let power = matrix_power(&build_sk(&g, 2).unwrap().to_dense(), 2 * t);
    let mut rng = substream(4, "pairs", 0);
    let pairs: Vec<(usize, usize)> = (0..10).map(|_| (rng.random_range(0..70), rng.random_range(0..70))).collect();
    let mut previous_frobenius = f64::INFINITY;
    for m in [5, 10, 20, 35, 50, 70] {
        let emb = EmbeddingSet::new(Method::Frequency(2), &[&full.truncated(m)], t).unwrap();
        // whole-matrix error is the discarded tail Σ_{l>m} λ_l^{4t}
        let mut frob = 0.0;
        for i in 0..70 {
            for j in 0..70 {
                frob += (emb.features()[0].inner(i, j) - power[(i, j)]).norm_sqr();
            }
        }
        let tail: f64 = full.eigenvalues[m..].iter().map(|l| l.powi(4 * t as i32)).sum();
        assert!((frob - tail).abs() < 1e-9, "m={m}: {frob} vs {tail}");
        assert!(frob <= previous_frobenius + 1e-12);
        previous_frobenius = frob;
        for &(i, j) in &pairs {
            let err = (affinity_k(&emb.features()[0], i, j) - power[(i, j)].norm_sqr()).abs();
            let bound: f64 = (m..70)
                .map(|l| {
                    full.eigenvalues[l].powi(2 * t as i32)
                        * full.eigenvectors[(i, l)].norm()
                        * full.eigenvectors[(j, l)].norm()
                })
                .sum();
            // ||a|² - |b|²| ≤ |a - b| (|a| + |b|)
            let a = emb.features()[0].inner(i, j).norm();
            assert!(err <= bound * (a + power[(i, j)].norm()) + 1e-12);
        }
    }
    assert!(previous_frobenius < 1e-20);
}

#[test]
fn fft_estimate_matches_fine_grid_argmax() {
    let mut rng = substream(5, "grid-oracle", 0);
    let grid = 1_000_000;
    for _ in 0..3 {
        let z: Vec<Complex64> = (0..10)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let f = |a: f64| -> f64 {
            z.iter()
                .enumerate()
                .map(|(k, c)| (c * Complex64::from_polar(1.0, -((k + 1) as f64) * a)).re)
                .sum()
        };
        let best = (0..grid)
            .map(|g| TAU * g as f64 / grid as f64)
            .max_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap();
        let seq = AlignmentSequence {
            i: 0,
            j: 1,
            frequencies: (1..=10).collect(),
            z: z.clone(),
        };
        let est = estimate_angle(&seq, 1024).unwrap();
        assert!(wrap_to_pi(est.alpha - best).abs() < TAU / grid as f64 + 1e-3);
    }
}

#[test]
fn neighbor_search_matches_exhaustive_scan() {
    let g = random_graph(300, 900, 6);
    let bundles: Vec<SpectralBundle> = (1..=3)
        .map(|k| top_eigenpairs(&build_sk(&g, k).unwrap(), 15, &EigenOptions::default()).unwrap())
        .collect();
    let emb = EmbeddingSet::mfvdm(&bundles, 1).unwrap();
    let nn = nn_search(&emb, 7).unwrap();
    for i in 0..300 {
        let mut all: Vec<(f64, usize)> = (0..300)
            .filter(|&j| j != i)
            .map(|j| (mfvdm_distance(&emb, i, j).unwrap(), j))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let expect: Vec<usize> = all[..7].iter().map(|x| x.1).collect();
        let got: Vec<usize> = nn.of(i).iter().map(|x| x.0).collect();
        assert_eq!(got, expect, "node {i}");
    }
}
