//! Dense numerical kernels shared by the rest of the crate.
//!
//! Everything here is deterministic: no randomized pivoting, fixed sweep
//! orders, and ties broken by index.

mod eig;
mod lp;
mod scalar;
mod subgradient;

pub use eig::{psd_sqrt, sym_eig, SpectralDecomposition};
pub use lp::{ConstraintSense, LinearProgram, LpSolution, LpStatus};
pub use scalar::{bisect_root, minimize_scalar_convex, Bound, Interval, ScalarMinimum};
pub use subgradient::{subgradient_minimize, SubgradientOptions, SubgradientResult};

use thiserror::Error;

/// Absolute/relative tolerance and an iteration cap.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-10, max_iter: 10_000 }
    }
}

impl Tolerance {
    pub fn new(abs_tol: f64, rel_tol: f64, max_iter: usize) -> Self {
        Self { abs_tol, rel_tol, max_iter }
    }

    /// Same tolerances with every component set to `tol`.
    pub fn uniform(tol: f64) -> Self {
        Self { abs_tol: tol, rel_tol: tol, max_iter: 10_000 }
    }

    /// `|a - b| <= abs_tol + rel_tol * max(|a|, |b|)`
    pub fn close(&self, a: f64, b: f64) -> bool {
        (a - b).abs() <= self.abs_tol + self.rel_tol * a.abs().max(b.abs())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("no sign change found while expanding bracket [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("objective decreases without bound")]
    Unbounded,
    #[error("iteration limit reached (best value {best_value}, gap estimate {gap})")]
    MaxIterExceeded { best_x: Vec<f64>, best_value: f64, gap: f64 },
    #[error("matrix is not symmetric (max asymmetry {asymmetry})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value encountered at x = {x}")]
    NonFinite { x: f64 },
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
}

pub type Result<T> = std::result::Result<T, NumericsError>;
