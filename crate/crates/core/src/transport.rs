//! Wasserstein distances between discrete distributions and the Gelbrich
//! distance between moment pairs.

use crate::convex::NormSpec;
use crate::distribution::{DiscreteDistribution, MomentPair};
use crate::numerics::{psd_sqrt, ConstraintSense, LinearProgram, LpStatus, NumericsError};
use crate::Mat;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("order p = {0} must be finite and >= 1")]
    InvalidOrder(f64),
    #[error("transport LP ended with status {0:?}")]
    Lp(LpStatus),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, TransportError>;

/// Coupling between two discrete distributions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportPlan {
    /// `coupling[(i, j)]` is the mass moved from source atom `i` to target atom `j`.
    pub coupling: Mat,
    /// `sum_ij coupling_ij ||x_i - y_j||^p`
    pub cost: f64,
}

impl TransportPlan {
    /// Largest deviation of the row and column sums from the marginals.
    pub fn marginal_error(&self, source: &DiscreteDistribution, target: &DiscreteDistribution) -> f64 {
        let mut worst = 0.0f64;
        for (i, w) in source.weights().iter().enumerate() {
            worst = worst.max((self.coupling.row(i).sum() - w).abs());
        }
        for (j, w) in target.weights().iter().enumerate() {
            worst = worst.max((self.coupling.column(j).sum() - w).abs());
        }
        worst
    }
}

/// Potentials with `psi_j - phi_i <= ||x_i - y_j||^p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualPotentials {
    /// one per source atom
    pub phi: Vec<f64>,
    /// one per target atom
    pub psi: Vec<f64>,
}

impl DualPotentials {
    /// `sum_j psi_j w'_j - sum_i phi_i w_i`
    pub fn value(&self, source: &DiscreteDistribution, target: &DiscreteDistribution) -> f64 {
        let a: f64 = self.psi.iter().zip(target.weights()).map(|(p, w)| p * w).sum();
        let b: f64 = self.phi.iter().zip(source.weights()).map(|(p, w)| p * w).sum();
        a - b
    }

    /// Largest violation of `psi_j - phi_i <= cost_ij`.
    pub fn max_violation(&self, cost: &Mat) -> f64 {
        let mut worst = 0.0f64;
        for (i, phi) in self.phi.iter().enumerate() {
            for (j, psi) in self.psi.iter().enumerate() {
                worst = worst.max(psi - phi - cost[(i, j)]);
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WassersteinResult {
    /// `(optimal transport cost)^(1/p)`
    pub distance: f64,
    pub plan: TransportPlan,
    pub duals: DualPotentials,
    /// primal minus dual transport cost, before taking the root
    pub duality_gap: f64,
}

/// Matrix of `||x_i - y_j||^p`.
pub fn cost_matrix(source: &DiscreteDistribution, target: &DiscreteDistribution, p: f64, norm: &NormSpec) -> Mat {
    Mat::from_fn(source.len(), target.len(), |i, j| {
        let diff = &source.atoms()[i] - &target.atoms()[j];
        norm.eval_vec(&diff).powf(p)
    })
}

/// Type-p Wasserstein distance, with an optimal plan and optimal potentials.
pub fn wasserstein_p(
    source: &DiscreteDistribution,
    target: &DiscreteDistribution,
    p: f64,
    norm: &NormSpec,
) -> Result<WassersteinResult> {
    if source.dim() != target.dim() {
        return Err(TransportError::DimensionMismatch(source.dim(), target.dim()));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(TransportError::InvalidOrder(p));
    }
    let (n, m) = (source.len(), target.len());
    let cost = cost_matrix(source, target, p, norm);

    let mut lp = LinearProgram::new();
    let mut var = vec![0usize; n * m];
    for i in 0..n {
        for j in 0..m {
            var[i * m + j] = lp.add_nonneg_var(cost[(i, j)]);
        }
    }
    for i in 0..n {
        lp.add_constraint((0..m).map(|j| (var[i * m + j], 1.0)).collect(), ConstraintSense::Eq, source.weights()[i]);
    }
    for j in 0..m {
        lp.add_constraint((0..n).map(|i| (var[i * m + j], 1.0)).collect(), ConstraintSense::Eq, target.weights()[j]);
    }
    let sol = lp.solve();
    if sol.status != LpStatus::Optimal {
        return Err(TransportError::Lp(sol.status));
    }
    // roundoff-level mass would show up as sqrt(1e-16) in the p = 2 distance
    let dust = 1e-13 * source.weights().iter().fold(0.0f64, |a, &w| a.max(w));
    let coupling = Mat::from_fn(n, m, |i, j| {
        let v = sol.x[var[i * m + j]];
        if v > dust {
            v
        } else {
            0.0
        }
    });
    let plan_cost: f64 = coupling.iter().zip(cost.iter()).map(|(a, b)| a * b).sum();
    // row multipliers a_i, column multipliers b_j with a_i + b_j <= c_ij
    let phi: Vec<f64> = (0..n).map(|i| -sol.row_duals[i]).collect();
    let psi: Vec<f64> = (0..m).map(|j| sol.row_duals[n + j]).collect();
    let duals = DualPotentials { phi, psi };
    let dual_value = duals.value(source, target);
    let plan = TransportPlan { coupling, cost: plan_cost };
    Ok(WassersteinResult { distance: plan_cost.max(0.0).powf(1.0 / p), plan, duals, duality_gap: plan_cost - dual_value })
}

/// Outcome of [`kr_verify`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KrCheck {
    pub feasible: bool,
    pub dual_value: f64,
    /// `max_ij (psi_j - phi_i - ||x_i - y_j||)`, nonpositive when feasible
    pub worst_violation: f64,
}

/// Checks type-1 potentials against the distance constraints on all atom
/// pairs and reports their dual value.
pub fn kr_verify(
    source: &DiscreteDistribution,
    target: &DiscreteDistribution,
    norm: &NormSpec,
    duals: &DualPotentials,
    tol: f64,
) -> KrCheck {
    let cost = cost_matrix(source, target, 1.0, norm);
    let worst = duals.max_violation(&cost);
    KrCheck { feasible: worst <= tol, dual_value: duals.value(source, target), worst_violation: worst }
}

/// `sqrt(||m1 - m2||^2 + tr(S1 + S2 - 2 (S1^{1/2} S2 S1^{1/2})^{1/2}))`
pub fn gelbrich_distance(a: &MomentPair, b: &MomentPair) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(TransportError::DimensionMismatch(a.dim(), b.dim()));
    }
    let mean_sq = (&a.mean - &b.mean).norm_squared();
    Ok((mean_sq + bures_squared(&a.cov, &b.cov)?).sqrt())
}

/// `tr(S1 + S2 - 2 (S1^{1/2} S2 S1^{1/2})^{1/2})`, clipped at zero.
pub fn bures_squared(s1: &Mat, s2: &Mat) -> Result<f64> {
    let r = psd_sqrt(s1, 1e-10)?;
    let inner = &r * s2 * &r;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross = psd_sqrt(&inner, 1e-10)?;
    let t = s1.trace() + s2.trace() - 2.0 * cross.trace();
    let scale = s1.trace().abs() + s2.trace().abs();
    if t < -1e-8 * scale - 1e-12 {
        return Err(TransportError::Numerics(NumericsError::NotPsd { min_eigenvalue: t }));
    }
    Ok(t.max(0.0))
}
