//! Product-manifold tree/forest index for unsupervised clustering and
//! nearest-neighbor search, with sparse-coding and anti-sparse (ℓ∞) coding
//! layers for binarized approximate search and manifold-based novelty
//! detection.
//!
//! The building blocks are:
//!
//! - [`partition`] — binary space-partitioning trees (axis-aligned and
//!   random-projection median splits) with exact backtracking k-NN, plus a
//!   convex-difference classifier that handles XOR-style label layouts with
//!   two linear separators.
//! - [`product`] — the product-manifold tree/forest: one partition tree per
//!   coordinate block, queries answered by intersecting per-block leaf
//!   neighborhoods.
//! - [`sparse`] — multi-layer thresholding cascades, iterative-shrinkage
//!   basis pursuit, and composite dictionaries built over direct-sum or
//!   product-atom spaces.
//! - [`antisparse`] — ℓ∞-minimal spread representations, their ±1 sign
//!   codes, and Hamming-space ANN indices (flat and block-decomposed).
//! - [`novelty`] — residual-calibrated novelty scoring over a product tree
//!   and the escape mechanism that folds novel samples back into the index.
//! - [`dataset`], [`metrics`], [`io`] — synthetic manifold datasets,
//!   oracle-anchored evaluation metrics, and the on-disk formats.

pub mod antisparse;
pub mod config;
pub mod dataset;
pub mod error;
pub mod io;
pub mod metrics;
pub mod novelty;
pub mod numerics;
pub mod partition;
pub mod product;
pub mod sparse;

pub use error::{Error, Result};
pub use numerics::{DenseMatrix, DenseVector, SeededRng};
