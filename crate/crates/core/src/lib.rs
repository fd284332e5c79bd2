//! Identification of evolutionary PDEs with spatially varying coefficients
//! from noisy gridded data.
//!
//! The pipeline multiplies the unknown equation
//! `u_t = sum_k c_k(x) d^{a_k}/dx^{a_k} f_k(u)` by tensor-product B-spline
//! test functions, moves every derivative onto the test functions by parts,
//! expands each `c_k` in a periodic B-spline basis and solves the resulting
//! group-sparse least-squares problem for every sparsity level. Candidates
//! are then trimmed group-wise and the sparsity is chosen by the relative
//! reduction in residual.
//!
//! Module map:
//! - [`grid`]: sampled fields, noise model, grid file format
//! - [`bspline`]: uniform B-spline bases (periodic and interior)
//! - [`spectrum`]: noise cutoff estimation and test-function sizing
//! - [`weak`]: feature dictionary and weak-form system assembly
//! - [`gpsp`]: group projected subspace pursuit
//! - [`select`]: group trimming, sparsity selection, coefficient curves
//! - [`metrics`]: evaluation metrics against a known truth
//! - [`simulate`]: pseudo-spectral benchmark generators
//! - [`pipeline`]: the end-to-end identification driver

pub mod bspline;
pub mod error;
pub mod expr;
pub mod gpsp;
pub mod grid;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod select;
pub mod simulate;
pub mod spectrum;
pub mod weak;

pub use error::{Error, Result};
