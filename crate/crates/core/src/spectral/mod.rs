//! Top eigenpairs of the normalized connection operators.

mod lanczos;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::connection::SparseHermitian;
use crate::error::{Error, Result};

/// Solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenOptions {
    /// Residual tolerance `‖S u - λ u‖`.
    pub tol: f64,
    /// Matrices of dimension at most this are solved densely.
    pub dense_threshold: usize,
    /// Cap on matrix-vector products; `None` means `50·m`.
    pub max_matvecs: Option<usize>,
    /// Krylov subspace size; `None` picks `max(2m + 20, m + 40)`.
    pub krylov_dim: Option<usize>,
    /// Seed for the random start vector.
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-8,
            dense_threshold: 500,
            max_matvecs: None,
            krylov_dim: None,
            seed: 0,
        }
    }
}

/// Leading eigenvalues (descending) and eigenvectors of one `S_k`.
///
/// Each eigenvector is gauge-fixed so that its largest-modulus entry is real
/// and positive. Vectors inside a (near-)degenerate cluster come in no
/// particular order or basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBundle {
    pub k: u32,
    pub eigenvalues: Vec<f64>,
    /// `n × m`, column `l` is `u_l`.
    pub eigenvectors: DMatrix<Complex64>,
    /// Achieved residual norms.
    pub residuals: Vec<f64>,
}

impl SpectralBundle {
    pub fn n(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn m(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Keep only the leading `m` pairs.
    pub fn truncated(&self, m: usize) -> SpectralBundle {
        let m = m.min(self.m());
        SpectralBundle {
            k: self.k,
            eigenvalues: self.eigenvalues[..m].to_vec(),
            eigenvectors: self.eigenvectors.columns(0, m).into_owned(),
            residuals: self.residuals[..m].to_vec(),
        }
    }
}

/// Rotate a vector so its largest-modulus entry is real positive.
pub fn fix_gauge(v: &mut [Complex64]) {
    let mut best = 0;
    let mut best_mod = -1.0;
    for (i, x) in v.iter().enumerate() {
        let m = x.norm_sqr();
        if m > best_mod {
            best_mod = m;
            best = i;
        }
    }
    if best_mod > 0.0 {
        let phase = v[best].conj() / v[best].norm();
        v.iter_mut().for_each(|x| *x *= phase);
        v[best] = Complex64::new(v[best].norm(), 0.0);
    }
}

fn residual_norm(s: &SparseHermitian, lambda: f64, u: &[Complex64]) -> f64 {
    let su = s.matvec(u);
    su.iter()
        .zip(u)
        .map(|(a, b)| (a - b * lambda).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// The `m` algebraically largest eigenpairs of `s`.
///
/// Dense Hermitian decomposition when `n ≤ dense_threshold`, otherwise
/// thick-restart Lanczos from a seeded random start.
pub fn top_eigenpairs(s: &SparseHermitian, m: usize, opts: &EigenOptions) -> Result<SpectralBundle> {
    let n = s.n();
    if m == 0 || m > n {
        return Err(Error::param(format!(
            "number of eigenpairs must satisfy 1 ≤ m ≤ n, got m = {m}, n = {n}"
        )));
    }
    let (values, mut vectors) = if n <= opts.dense_threshold {
        dense_top(&s.to_dense(), m)
    } else {
        let krylov = opts.krylov_dim.unwrap_or((2 * m + 20).max(m + 40));
        let max_matvecs = opts.max_matvecs.unwrap_or(50 * m);
        let out = lanczos::top_eigenpairs(s, m, opts.tol, max_matvecs, krylov, opts.seed)?;
        log::debug!("k = {}: Lanczos converged after {} matvecs", s.frequency(), out.matvecs);
        (out.values, out.vectors)
    };
    let mut residuals = Vec::with_capacity(m);
    for (u, &l) in vectors.iter_mut().zip(&values) {
        fix_gauge(u);
        residuals.push(residual_norm(s, l, u));
    }
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    if worst > opts.tol + 1e-12 {
        return Err(Error::Convergence {
            k: s.frequency(),
            iterations: 0,
            max_residual: worst,
            tol: opts.tol,
            residuals,
        });
    }
    let eigenvectors = DMatrix::from_fn(n, m, |i, l| vectors[l][i]);
    Ok(SpectralBundle {
        k: s.frequency(),
        eigenvalues: values,
        eigenvectors,
        residuals,
    })
}

/// Dense Hermitian eigendecomposition, top `m` pairs in descending order.
pub fn dense_top(a: &DMatrix<Complex64>, m: usize) -> (Vec<f64>, Vec<Vec<Complex64>>) {
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]).then(x.cmp(&y)));
    let values = order[..m].iter().map(|&c| eig.eigenvalues[c]).collect();
    let vectors = order[..m]
        .iter()
        .map(|&c| eig.eigenvectors.column(c).iter().copied().collect())
        .collect();
    (values, vectors)
}
