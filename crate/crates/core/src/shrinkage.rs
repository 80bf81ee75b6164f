//! Robust inverse covariance estimation over a Wasserstein ball of
//! Gaussian distributions.
//!
//! The estimate keeps the eigenvectors of the sample covariance and maps
//! each eigenvalue `l` to `x(l) = g [1 - (sqrt(l^2 g^2 + 4 l g) - l g) / 2]`,
//! where the scalar `g` solves a monotone equation in the radius.

use crate::distribution::{DistributionError, MomentPair};
use crate::numerics::{bisect_root, sym_eig, NumericsError, Tolerance};
use crate::{Mat, Vector};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShrinkageError {
    #[error("radius {0} must be finite and positive")]
    InvalidRadius(f64),
    #[error("need at least one sample")]
    EmptySample,
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, ShrinkageError>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShrinkageResult {
    pub mean: Vector,
    /// Estimated inverse covariance.
    pub precision: Mat,
    pub gamma: f64,
    /// `(sample eigenvalue, estimated precision eigenvalue)`, descending in the first
    pub eigen_map: Vec<(f64, f64)>,
    pub eigenvectors: Mat,
}

impl ShrinkageResult {
    /// `lambda_max / lambda_min` of the precision estimate.
    pub fn condition_number(&self) -> f64 {
        let (lo, hi) = self.eigen_map.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &(_, x)| (lo.min(x), hi.max(x)));
        hi / lo
    }
}

/// Mean and biased (divide by N) covariance of the rows of `samples`.
pub fn sample_moments(samples: &[Vector]) -> Result<MomentPair> {
    if samples.is_empty() {
        return Err(ShrinkageError::EmptySample);
    }
    let d = crate::DiscreteDistribution::empirical(samples.to_vec())?;
    Ok(d.moments())
}

/// `sqrt(l^2 g^2 + 4 l g) - l g`, written without cancellation.
fn gap_term(l: f64, g: f64) -> f64 {
    if l <= 0.0 {
        return 0.0;
    }
    let lg = l * g;
    4.0 * lg / ((lg * lg + 4.0 * lg).sqrt() + lg)
}

/// `x(l)` for a given `g`; `g` itself when `l = 0`.
pub fn shrink_eigenvalue(l: f64, g: f64) -> f64 {
    if l <= 0.0 {
        return g;
    }
    let lg = l * g;
    let s = (lg * lg + 4.0 * lg).sqrt();
    // g (s - lg) / (s + lg) = 4 l g^2 / (s + lg)^2
    4.0 * l * g * g / ((s + lg) * (s + lg))
}

/// `(eps^2 - sum l / 2) g - m + sum sqrt(l^2 g^2 + 4 l g) / 2`
pub fn gamma_residual(eigenvalues: &[f64], eps: f64, g: f64) -> f64 {
    let m = eigenvalues.len() as f64;
    eps * eps * g - m + 0.5 * eigenvalues.iter().map(|&l| gap_term(l, g)).sum::<f64>()
}

/// Robust precision matrix estimate for radius `eps > 0`.
pub fn wasserstein_shrinkage(moments: &MomentPair, eps: f64) -> Result<ShrinkageResult> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(ShrinkageError::InvalidRadius(eps));
    }
    let eig = sym_eig(&moments.cov)?;
    let lambdas: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0)).collect();
    let f = |g: f64| if g <= 0.0 { -(lambdas.len() as f64) } else { gamma_residual(&lambdas, eps, g) };
    let hi = (lambdas.len() as f64).max(1.0) / (eps * eps);
    let gamma = bisect_root(f, 0.0, hi, Tolerance::new(0.0, 0.0, 5_000))?;
    let xs: Vec<f64> = lambdas.iter().map(|&l| shrink_eigenvalue(l, gamma)).collect();
    let mut scaled = eig.vectors.clone();
    for (k, &x) in xs.iter().enumerate() {
        scaled.column_mut(k).scale_mut(x);
    }
    let precision = &scaled * eig.vectors.transpose();
    let precision = (&precision + precision.transpose()) * 0.5;
    Ok(ShrinkageResult {
        mean: moments.mean.clone(),
        precision,
        gamma,
        eigen_map: lambdas.into_iter().zip(xs).collect(),
        eigenvectors: eig.vectors,
    })
}
