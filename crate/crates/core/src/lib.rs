//! Multi-frequency vector diffusion maps (MFVDM).
//!
//! Noise-robust nearest-neighbor search and pairwise in-plane rotational
//! alignment for graphs whose edges carry SO(2) transformations. For each
//! angular frequency `k` the edge angles are lifted to phases `e^{ikα}`, the
//! degree-normalized Hermitian operator `S_k` is diagonalized, and the
//! truncated spectral features of all frequencies are combined into a single
//! rotation-invariant affinity. The same features yield the alignment angles
//! through an FFT over frequencies.
//!
//! Module map:
//!
//! - [`sampling`]: synthetic sphere/torus datasets, ground truth, clean
//!   κ-NN graphs, random rewiring noise.
//! - [`graph`]: the [`AlignmentGraph`](graph::AlignmentGraph) input type.
//! - [`connection`]: per-frequency affinity `W_k`, degrees and `S_k`.
//! - [`spectral`]: top eigenpairs of `S_k` (dense or Lanczos).
//! - [`embedding`]: MFVDM/VDM/DM features, affinities and exact κ-NN search.
//! - [`alignment`]: FFT-based angle estimation.
//! - [`evaluation`]: scoring against ground truth and spectral reports.
//! - [`io`], [`config`], [`pipeline`]: file formats and the command-line
//!   orchestration.

pub mod alignment;
pub mod angle;
pub mod config;
pub mod connection;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod io;
pub mod pipeline;
pub mod rng;
pub mod sampling;
pub mod spectral;

pub use error::{Error, Result};
