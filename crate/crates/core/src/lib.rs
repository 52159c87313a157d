//! Numerical laboratory for the symmetric exclusion process with reservoirs
//! on arbitrary finite networks.
//!
//! The model lives on a finite network `(V, c, kappa)`: occupancies in
//! `{0,1}^V` are exchanged along the edge `{i,j}` at rate `c(i,j)`, and every
//! vertex `i` in contact with a particle reservoir (`kappa(i) > 0`) has its
//! occupancy resampled to a fresh Bernoulli(rho) value at rate `kappa(i)`.
//! The chain is reversible with respect to the product measure
//! `pi = Bernoulli(rho)^{(x)V}`.
//!
//! Everything here is organized around a single `|V|`-dimensional object: the
//! Laplace matrix `Delta` of one random walker killed at rate `kappa`, whose
//! semigroup acting on the all-ones vector,
//!
//! ```text
//! z(t) = exp(t Delta) 1,        z_i(t) = P_i(walker alive at time t),
//! ```
//!
//! controls the mixing of the full `2^|V|`-state chain in both directions.
//! The crate computes the spectral data of `-Delta` ([`spectral`]), evaluates
//! the distance bounds and the mixing-time estimates they imply ([`bounds`]),
//! solves small systems exactly on the `2^n` configuration space to verify
//! every bound ([`exact`]), and simulates the coupled graphical construction
//! ([`mcsim`]). The [`battery`] module packages the cross-module verification
//! checks used by the test suite and the `verify` subcommand of the CLI.
//!
//! Conventions used throughout:
//!
//! * vertices are indexed `0..n-1`; box vertices in row-major order of the
//!   coordinate tuple (the last axis varies fastest);
//! * `rho_star = min(rho, 1 - rho)` and the extremal start `x_star` is the
//!   all-ones configuration when `rho <= 1/2`, all-zeros otherwise;
//! * eigenvalues of `-Delta` are sorted ascending, `0 < lambda_1 <= ...`,
//!   and `(lambda, psi)` denotes the Perron pair.

pub mod battery;
pub mod bounds;
pub mod exact;
pub mod mcsim;
pub mod network;
pub mod spectral;

use thiserror::Error;

/// Crate-wide error type.
///
/// Validation variants mirror the network invariants; the numeric variants
/// signal caps and convergence failures from the spectral and exact engines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(String),
    #[error("conductance matrix is not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error("negative or non-finite rate: {0}")]
    NegativeRate(String),
    #[error("reservoir density must lie strictly inside (0, 1), got {0}")]
    BadDensity(f64),
    #[error("network is not connected")]
    Disconnected,
    #[error("network has an empty boundary (kappa is identically zero)")]
    EmptyBoundary,
    #[error("size cap exceeded: {0}")]
    CapExceeded(String),
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("event budget exhausted: {0}")]
    RuntimeCap(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Strictly increasing log-spaced grid of `points >= 2` times in `[lo, hi]`.
///
/// Both endpoints are included; `lo` must be positive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2 && lo > 0.0 && hi > lo, "need points >= 2 and 0 < lo < hi");
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Linearly spaced grid of `points >= 2` times in `[lo, hi]`, endpoints included.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2 && hi > lo, "need points >= 2 and lo < hi");
    (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect()
}
