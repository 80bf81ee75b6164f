//! Minimax affine estimation of `x` from `y` when the joint distribution
//! ranges over a Gelbrich ball, solved by Frank-Wolfe on the covariance.

use crate::distribution::{DistributionError, MomentPair};
use crate::numerics::{bisect_root, sym_eig, NumericsError, Tolerance};
use crate::transport::bures_squared;
use crate::transport::TransportError;
use crate::{Mat, Vector};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MmseError {
    #[error("block sizes {mx} + {my} do not match dimension {dim}")]
    BlockMismatch { mx: usize, my: usize, dim: usize },
    #[error("radius {0} must be finite and nonnegative")]
    InvalidRadius(f64),
    #[error("observation covariance block is singular")]
    SingularBlock,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

pub type Result<T> = std::result::Result<T, MmseError>;

/// Nominal moments of the stacked vector `(x, y)`, `x` first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointMoments {
    pub mx: usize,
    pub my: usize,
    pub moments: MomentPair,
}

impl JointMoments {
    pub fn new(mx: usize, my: usize, moments: MomentPair) -> Result<Self> {
        if mx + my != moments.dim() || mx == 0 || my == 0 {
            return Err(MmseError::BlockMismatch { mx, my, dim: moments.dim() });
        }
        Ok(Self { mx, my, moments })
    }
}

/// `psi(y) = gain y + offset`
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineEstimator {
    pub gain: Mat,
    pub offset: Vector,
}

impl AffineEstimator {
    pub fn estimate(&self, y: &Vector) -> Vector {
        &self.gain * y + &self.offset
    }

    /// Gain `S_xy S_yy^{-1}`, offset `mean_x - gain mean_y`.
    pub fn from_covariance(s: &Mat, mx: usize, mean: &Vector) -> Result<Self> {
        let my = s.nrows() - mx;
        let (_, sxy, syy) = blocks(s, mx);
        let gain = observation_factor(&syy)?.solve(&sxy.transpose()).transpose();
        let offset = mean.rows(0, mx) - &gain * mean.rows(mx, my);
        Ok(Self { gain, offset })
    }
}

/// One Frank-Wolfe iterate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FwState {
    pub covariance: Mat,
    pub iteration: usize,
    pub objective: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FwResult {
    /// Iterate with the largest objective seen.
    pub best: FwState,
    pub estimator: AffineEstimator,
    pub gaps: Vec<f64>,
    pub objectives: Vec<f64>,
    /// Largest violation of the Gelbrich constraint over all iterates.
    pub max_infeasibility: f64,
    /// Iterations where a direction had to be pulled back toward the center.
    pub repairs: usize,
    /// Ridge added to the nominal covariance when it was singular.
    pub regularization: f64,
    pub converged: bool,
}

fn observation_factor(syy: &Mat) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let scale = syy.diagonal().amax().max(1.0);
    let chol = syy.clone().cholesky().ok_or(MmseError::SingularBlock)?;
    let dmin = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if dmin * dmin <= 1e-14 * scale {
        return Err(MmseError::SingularBlock);
    }
    Ok(chol)
}

fn blocks(s: &Mat, mx: usize) -> (Mat, Mat, Mat) {
    let my = s.nrows() - mx;
    (s.view((0, 0), (mx, mx)).clone_owned(), s.view((0, mx), (mx, my)).clone_owned(), s.view((mx, mx), (my, my)).clone_owned())
}

/// `tr(S_xx - S_xy S_yy^{-1} S_yx)`, the error of the best affine estimator.
pub fn mmse_objective(s: &Mat, mx: usize) -> Result<f64> {
    let (sxx, sxy, syy) = blocks(s, mx);
    let k = observation_factor(&syy)?.solve(&sxy.transpose());
    Ok(sxx.trace() - (&sxy * k).trace())
}

/// Gradient `[I, -K; -K^T, K^T K]` with `K = S_xy S_yy^{-1}`.
pub fn mmse_gradient(s: &Mat, mx: usize) -> Result<Mat> {
    let n = s.nrows();
    let my = n - mx;
    let (_, sxy, syy) = blocks(s, mx);
    let k = observation_factor(&syy)?.solve(&sxy.transpose()).transpose();
    let mut g = Mat::zeros(n, n);
    g.view_mut((0, 0), (mx, mx)).copy_from(&Mat::identity(mx, mx));
    g.view_mut((0, mx), (mx, my)).copy_from(&(-&k));
    g.view_mut((mx, 0), (my, mx)).copy_from(&(-k.transpose()));
    g.view_mut((mx, mx), (my, my)).copy_from(&(k.transpose() * &k));
    Ok(g)
}

/// `tr(S + C - 2 (C^{1/2} S C^{1/2})^{1/2})`
pub fn covariance_distance_sq(s: &Mat, center: &Mat) -> Result<f64> {
    Ok(bures_squared(center, s)?)
}

/// Linear maximization oracle over the covariance ball.
///
/// Returns `D = g^2 (gI - G)^{-1} C (gI - G)^{-1}` with `g > lambda_max(G)`
/// solving `tr[C (I - g (gI - G)^{-1})^2] = eps^2`, and the multiplier `g`
/// (`inf` when the gradient vanishes or the radius is zero).
pub fn fw_direction(grad: &Mat, center: &Mat, eps: f64) -> Result<(Mat, f64)> {
    let eig = sym_eig(grad)?;
    let lam: Vec<f64> = eig.values.iter().copied().collect();
    let cdiag = (eig.vectors.transpose() * center * &eig.vectors).diagonal();
    let coef: Vec<f64> = lam.iter().zip(cdiag.iter()).map(|(l, c)| l * l * c).collect();
    if eps == 0.0 || coef.iter().all(|&c| c == 0.0) {
        return Ok((center.clone(), f64::INFINITY));
    }
    let lo = lam[0].max(0.0);
    let eps2 = eps * eps;
    let f = |t: f64| -> f64 {
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let g = lo + t;
        eps2 - coef.iter().zip(&lam).map(|(c, l)| if *c == 0.0 { 0.0 } else { c / (g - l).powi(2) }).sum::<f64>()
    };
    let t = bisect_root(f, 0.0, 1.0 + lo, Tolerance::new(0.0, 0.0, 5_000))?;
    let gamma = lo + t;
    let m = eig.map(|l| gamma / (gamma - l));
    let d = &m * center * &m;
    Ok(((&d + d.transpose()) * 0.5, gamma))
}

/// Frank-Wolfe with steps `2 / (k + 2)` from the nominal covariance.
///
/// Stops after `max_iter` iterations or once the gap drops to `tol`.
pub fn fw_solve(joint: &JointMoments, eps: f64, max_iter: usize, tol: f64) -> Result<FwResult> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(MmseError::InvalidRadius(eps));
    }
    let mx = joint.mx;
    let dim = joint.moments.dim();
    let mut center = joint.moments.cov.clone();
    let mut regularization = 0.0;
    if sym_eig(&center)?.min_value() <= 0.0 {
        regularization = 1e-10 * (center.trace() / dim as f64).max(1.0);
        center += Mat::identity(dim, dim) * regularization;
    }
    let floor = sym_eig(&center)?.min_value();
    let floor_tol = 1e-9 * floor.abs().max(1.0);
    let eps2 = eps * eps;

    let mut s = center.clone();
    let mut gaps = Vec::new();
    let mut objectives = Vec::new();
    let mut best: Option<FwState> = None;
    let mut max_infeasibility = 0.0f64;
    let mut repairs = 0;
    let mut converged = false;
    for k in 0..max_iter.max(1) {
        let obj = mmse_objective(&s, mx)?;
        objectives.push(obj);
        let grad = mmse_gradient(&s, mx)?;
        let (mut d, _) = fw_direction(&grad, &center, eps)?;
        if sym_eig(&d)?.min_value() < floor - floor_tol {
            // pull back toward the center until the eigenvalue floor holds
            repairs += 1;
            let diff = &d - &center;
            let mut t = 1.0;
            while t > 1e-12 && sym_eig(&(&center + &diff * t))?.min_value() < floor - floor_tol {
                t *= 0.5;
            }
            d = &center + diff * t;
        }
        let gap = (&d - &s).component_mul(&grad).sum();
        gaps.push(gap);
        if best.as_ref().is_none_or(|b| obj > b.objective) {
            best = Some(FwState { covariance: s.clone(), iteration: k, objective: obj, gap });
        }
        if gap <= tol {
            converged = true;
            break;
        }
        let step = 2.0 / (k as f64 + 2.0);
        s = &d * step + &s * (1.0 - step);
        s = (&s + s.transpose()) * 0.5;
        let trace_viol = covariance_distance_sq(&s, &center)? - eps2;
        let floor_viol = floor - sym_eig(&s)?.min_value();
        max_infeasibility = max_infeasibility.max(trace_viol).max(floor_viol);
    }
    if !converged {
        let obj = mmse_objective(&s, mx)?;
        if best.as_ref().is_none_or(|b| obj > b.objective) {
            let gap = f64::NAN;
            best = Some(FwState { covariance: s.clone(), iteration: max_iter, objective: obj, gap });
        }
    }
    let best = best.expect("at least one iteration");
    let estimator = AffineEstimator::from_covariance(&best.covariance, mx, &joint.moments.mean)?;
    Ok(FwResult { best, estimator, gaps, objectives, max_infeasibility, repairs, regularization, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_direction() {
        let (d, g) = fw_direction(&Mat::from_element(1, 1, 2.0), &Mat::from_element(1, 1, 1.0), 0.5).unwrap();
        assert!((g - 2.0 * 3.0).abs() < 1e-12);
        assert!((d[(0, 0)] - 1.5f64.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn zero_radius_keeps_nominal_gain() {
        let cov = Mat::from_row_slice(2, 2, &[2.0, 0.8, 0.8, 1.0]);
        let j = JointMoments::new(1, 1, MomentPair::new(Vector::zeros(2), cov).unwrap()).unwrap();
        let r = fw_solve(&j, 0.0, 10, 1e-12).unwrap();
        assert!((r.estimator.gain[(0, 0)] - 0.8).abs() < 1e-14);
        assert!(r.converged);
    }

    #[test]
    fn perfect_correlation() {
        assert_eq!(mmse_objective(&Mat::from_element(2, 2, 1.0), 1).unwrap(), 0.0);
    }

    #[test]
    fn singular_observation_block() {
        let s = Mat::from_diagonal(&Vector::from_vec(vec![1.0, 0.0]));
        assert_eq!(mmse_objective(&s, 1), Err(MmseError::SingularBlock));
    }

    #[test]
    fn independent_blocks_stay_independent() {
        let cov = Mat::from_diagonal(&Vector::from_vec(vec![2.0, 1.0, 3.0]));
        let mean = Vector::from_vec(vec![1.0, -1.0, 0.5]);
        let j = JointMoments::new(1, 2, MomentPair::new(mean, cov).unwrap()).unwrap();
        let r = fw_solve(&j, 0.5, 100, 1e-10).unwrap();
        assert!(r.estimator.gain.amax() < 1e-12);
        assert!((r.estimator.offset[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn objective_of_independent_blocks() {
        let s = Mat::from_diagonal(&Vector::from_vec(vec![3.0, 1.0]));
        assert_eq!(mmse_objective(&s, 1).unwrap(), 3.0);
    }
}
