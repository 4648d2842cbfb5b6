//! Spectral norms of large random rectangular Toeplitz and circulant matrices.
//!
//! The crate is organised bottom-up:
//!
//! * [`dft`] — unitary arbitrary-length DFT, linear convolution, autocorrelation.
//! * [`structured`] — random symbols, circulant embedding, fast and dense products.
//! * [`norm`] — matrix-free power iteration for the largest singular value.
//! * [`sinekernel`] — the limiting constant `K_{1,n/p}` via alternating singular vectors.
//! * [`extremes`] — Gumbel shift `θ_c`, Gumbel CDF/quantiles and the `B_{p,n}` bound.
//! * [`montecarlo`] — seeded, schedule-independent replication and quantile summaries.
//! * [`cli`] — the `specnorm` command-line front end.

pub mod cli;
pub mod csvfmt;
pub mod dft;
pub mod error;
pub mod extremes;
pub mod montecarlo;
pub mod norm;
pub mod rng;
pub mod sinekernel;
pub mod structured;

pub use error::{Error, Result};
