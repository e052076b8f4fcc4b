//! Thick-restart Lanczos for the algebraically largest eigenpairs of a
//! Hermitian operator.
//!
//! Block size one, full reorthogonalization (two classical Gram-Schmidt
//! passes per step). After each sweep the leading Ritz vectors are kept and
//! the projected matrix becomes "arrowhead + tridiagonal", which stays real
//! symmetric because the Lanczos coefficients of a Hermitian operator are real.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::connection::SparseHermitian;
use crate::error::{Error, Result};
use crate::rng::substream;

pub(crate) struct LanczosOutput {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<Complex64>>,
    pub matvecs: usize,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    // ⟨a, b⟩ = Σ conj(a) b
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthogonalize `w` against `basis` twice; returns the accumulated
/// projection coefficients.
fn reorthogonalize(basis: &[Vec<Complex64>], w: &mut [Complex64]) -> Vec<Complex64> {
    let mut total = vec![Complex64::new(0.0, 0.0); basis.len()];
    for _ in 0..2 {
        for (b, t) in basis.iter().zip(total.iter_mut()) {
            let h = dot(b, w);
            *t += h;
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= h * bi;
            }
        }
    }
    total
}

fn random_unit(n: usize, seed: u64, k: u32, attempt: u64) -> Vec<Complex64> {
    let mut rng = substream(seed, &format!("lanczos-{k}"), attempt);
    let mut v: Vec<Complex64> = (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect();
    let s = norm(&v).recip();
    v.iter_mut().for_each(|x| *x *= s);
    v
}

fn combine(basis: &[Vec<Complex64>], coeffs: impl Iterator<Item = f64>, n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (b, c) in basis.iter().zip(coeffs) {
        if c != 0.0 {
            for (o, x) in out.iter_mut().zip(b) {
                *o += x * c;
            }
        }
    }
    out
}

pub(crate) fn top_eigenpairs(
    a: &SparseHermitian,
    m: usize,
    tol: f64,
    max_matvecs: usize,
    krylov_dim: usize,
    seed: u64,
) -> Result<LanczosOutput> {
    let n = a.n();
    let k = a.frequency();
    let ncv = krylov_dim.clamp((m + 1).min(n), n);
    let mut restarts = 0u64;

    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(ncv + 1);
    basis.push(random_unit(n, seed, k, restarts));
    let mut h = DMatrix::<f64>::zeros(ncv, ncv);
    let mut kept = 0usize;
    let mut matvecs = 0usize;
    let mut w = vec![Complex64::new(0.0, 0.0); n];

    loop {
        let mut beta = 0.0;
        for j in kept..ncv {
            a.matvec_into(&basis[j], &mut w);
            matvecs += 1;
            let coeffs = reorthogonalize(&basis, &mut w);
            h[(j, j)] = coeffs[j].re;
            beta = norm(&w);
            if j + 1 < ncv {
                if beta > 1e-12 {
                    let s = beta.recip();
                    basis.push(w.iter().map(|x| x * s).collect());
                } else {
                    // invariant subspace found: continue with a fresh direction
                    beta = 0.0;
                    loop {
                        restarts += 1;
                        let mut v = random_unit(n, seed, k, restarts);
                        reorthogonalize(&basis, &mut v);
                        let nv = norm(&v);
                        if nv > 1e-8 {
                            v.iter_mut().for_each(|x| *x /= nv);
                            basis.push(v);
                            break;
                        }
                    }
                }
                h[(j, j + 1)] = beta;
                h[(j + 1, j)] = beta;
            } else if beta > 1e-12 && ncv < n {
                let s = beta.recip();
                basis.push(w.iter().map(|x| x * s).collect());
            } else {
                beta = 0.0;
            }
        }

        let eig = SymmetricEigen::new(h.clone());
        let mut order: Vec<usize> = (0..ncv).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]).then(x.cmp(&y)));
        let residual = |c: usize| (beta * eig.eigenvectors[(ncv - 1, c)]).abs();
        let residuals: Vec<f64> = order[..m].iter().map(|&c| residual(c)).collect();
        let max_residual = residuals.iter().copied().fold(0.0, f64::max);

        if max_residual <= tol {
            let vectors = order[..m]
                .iter()
                .map(|&c| combine(&basis[..ncv], eig.eigenvectors.column(c).iter().copied(), n))
                .collect();
            let values = order[..m].iter().map(|&c| eig.eigenvalues[c]).collect();
            return Ok(LanczosOutput {
                values,
                vectors,
                matvecs,
            });
        }
        if matvecs >= max_matvecs {
            return Err(Error::Convergence {
                k,
                iterations: matvecs,
                max_residual,
                tol,
                residuals,
            });
        }

        // thick restart: keep the leading Ritz vectors plus the residual
        let keep = (m + (ncv - m) / 2).min(ncv - 1).max(m);
        let residual_vec = basis.pop().expect("residual vector present");
        let mut fresh: Vec<Vec<Complex64>> = order[..keep]
            .iter()
            .map(|&c| combine(&basis[..ncv], eig.eigenvectors.column(c).iter().copied(), n))
            .collect();
        h.fill(0.0);
        for (a_idx, &c) in order[..keep].iter().enumerate() {
            h[(a_idx, a_idx)] = eig.eigenvalues[c];
            let s = beta * eig.eigenvectors[(ncv - 1, c)];
            h[(a_idx, keep)] = s;
            h[(keep, a_idx)] = s;
        }
        fresh.push(residual_vec);
        basis = fresh;
        kept = keep;
    }
}
