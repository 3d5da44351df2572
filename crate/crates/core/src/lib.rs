//! Numerical laboratory for Gaussian randomizations of Hardy-space series.
//!
//! A series `f = Σ a_n z^n` is randomized coefficientwise by a centered
//! Gaussian process `X_n`, giving `Rf = Σ a_n X_n z^n`. The crate evaluates
//! `H^p` norms of truncated series on the boundary grid, builds and factors
//! covariance kernels, samples the process reproducibly, and estimates the
//! mixed norms `‖Rf‖_{L^q(Ω, H^p)}` against explicit bounds.
//!
//! Almost-sure statements about infinite series cannot be decided from
//! finitely many samples. Everything here works at a fixed truncation degree
//! and reports moment estimates with standard errors, or trend diagnostics
//! under `N`-doubling.

pub mod acceptance;
pub mod covops;
pub mod error;
pub mod gp;
pub mod hardy;
pub mod littlewood;
pub mod multipliers;
pub mod report;
pub mod sequence;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
