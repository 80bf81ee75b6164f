//! Discrete distributions and first/second moment pairs.

use crate::numerics::{sym_eig, Tolerance};
use crate::{Mat, Vector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("distribution has no atoms")]
    Empty,
    #[error("atom {index} has dimension {found}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, found: usize },
    #[error("weights must be nonnegative and sum to one (sum = {sum})")]
    BadWeights { sum: f64 },
    #[error("covariance is not symmetric positive semidefinite")]
    NotPsd,
    #[error("non-finite entry")]
    NonFinite,
}

/// Finitely supported probability distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    atoms: Vec<Vector>,
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(atoms: Vec<Vector>, weights: Vec<f64>) -> Result<Self, DistributionError> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(DistributionError::Empty);
        }
        let m = atoms[0].len();
        for (i, a) in atoms.iter().enumerate() {
            if a.len() != m {
                return Err(DistributionError::DimensionMismatch { index: i, expected: m, found: a.len() });
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(DistributionError::NonFinite);
            }
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|&w| !(w >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(DistributionError::BadWeights { sum });
        }
        Ok(Self { atoms, weights })
    }

    /// Uniform weights `1/N`.
    pub fn empirical(atoms: Vec<Vector>) -> Result<Self, DistributionError> {
        let n = atoms.len();
        if n == 0 {
            return Err(DistributionError::Empty);
        }
        Self::new(atoms, vec![1.0 / n as f64; n])
    }

    /// Weights are rescaled to sum to one before validation.
    pub fn normalized(atoms: Vec<Vector>, weights: Vec<f64>) -> Result<Self, DistributionError> {
        let s: f64 = weights.iter().sum();
        if !(s > 0.0) {
            return Err(DistributionError::BadWeights { sum: s });
        }
        Self::new(atoms, weights.iter().map(|w| w / s).collect())
    }

    pub fn dirac(atom: Vector) -> Self {
        Self { atoms: vec![atom], weights: vec![1.0] }
    }

    pub fn atoms(&self) -> &[Vector] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vector, f64)> {
        self.atoms.iter().zip(self.weights.iter().copied())
    }

    /// `E[f(xi)]`
    pub fn expect<F: Fn(&Vector) -> f64>(&self, f: F) -> f64 {
        self.iter().map(|(a, w)| w * f(a)).sum()
    }

    pub fn mean(&self) -> Vector {
        let mut m = Vector::zeros(self.dim());
        for (a, w) in self.iter() {
            m.axpy(w, a, 1.0);
        }
        m
    }

    /// Mean and (biased) covariance.
    pub fn moments(&self) -> MomentPair {
        let mu = self.mean();
        let d = self.dim();
        let mut cov = Mat::zeros(d, d);
        for (a, w) in self.iter() {
            let c = a - &mu;
            cov.ger(w, &c, &c, 1.0);
        }
        MomentPair { mean: mu, cov: (&cov + cov.transpose()) * 0.5 }
    }

    /// Merges atoms closer than `tol` in max-norm, keeping first-seen order.
    pub fn merged(&self, tol: f64) -> Self {
        let mut atoms: Vec<Vector> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (a, w) in self.iter() {
            match atoms.iter().position(|b| (b - a).amax() <= tol) {
                Some(k) => weights[k] += w,
                None => {
                    atoms.push(a.clone());
                    weights.push(w);
                }
            }
        }
        Self { atoms, weights }
    }

    /// Drops atoms whose weight is at most `tol` and renormalizes.
    pub fn pruned(&self, tol: f64) -> Self {
        let (atoms, weights): (Vec<Vector>, Vec<f64>) =
            self.iter().filter(|(_, w)| *w > tol).map(|(a, w)| (a.clone(), w)).unzip();
        let s: f64 = weights.iter().sum();
        Self { atoms, weights: weights.into_iter().map(|w| w / s).collect() }
    }
}

/// Mean vector and covariance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentPair {
    pub mean: Vector,
    pub cov: Mat,
}

impl MomentPair {
    /// Validates dimensions, symmetry and positive semidefiniteness.
    pub fn new(mean: Vector, cov: Mat) -> Result<Self, DistributionError> {
        let m = mean.len();
        if cov.nrows() != m || cov.ncols() != m {
            return Err(DistributionError::DimensionMismatch { index: 0, expected: m, found: cov.nrows() });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(DistributionError::NonFinite);
        }
        let eig = sym_eig(&cov).map_err(|_| DistributionError::NotPsd)?;
        let scale = eig.values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if eig.min_value() < -1e-10 * scale {
            return Err(DistributionError::NotPsd);
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Second moment `cov + mean mean^T`.
    pub fn second_moment(&self) -> Mat {
        &self.cov + &self.mean * self.mean.transpose()
    }

    pub fn approx_eq(&self, other: &MomentPair, tol: Tolerance) -> bool {
        self.mean.iter().zip(other.mean.iter()).all(|(a, b)| tol.close(*a, *b))
            && self.cov.iter().zip(other.cov.iter()).all(|(a, b)| tol.close(*a, *b))
    }
}
