//! Worst-case risk over all distributions whose mean and covariance lie in
//! a Gelbrich ball around nominal moments.

use crate::convex::NormSpec;
use crate::distribution::{DiscreteDistribution, DistributionError, MomentPair};
use crate::numerics::{bisect_root, minimize_scalar_convex, sym_eig, Interval, NumericsError, Tolerance};
use crate::transport::{gelbrich_distance, wasserstein_p, TransportError};
use crate::wc_empirical::QuadraticLoss;
use crate::{Mat, Vector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MomentsError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("radius {0} must be finite and nonnegative")]
    InvalidRadius(f64),
    #[error("no multiplier above lambda_max(Q) meets the boundary equation; dual value {dual_value} at gamma {gamma}")]
    NoInteriorSolution { dual_value: f64, gamma: f64 },
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

pub type Result<T> = std::result::Result<T, MomentsError>;

/// Moment pairs within Gelbrich distance `radius` of `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GelbrichBall {
    pub center: MomentPair,
    pub radius: f64,
}

impl GelbrichBall {
    pub fn new(center: MomentPair, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(MomentsError::InvalidRadius(radius));
        }
        Ok(Self { center, radius })
    }
}

/// Density generator of an elliptical family; only moments are tracked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    Gaussian,
    Logistic,
    StudentT { nu: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticalSpec {
    pub generator: Generator,
    pub moments: MomentPair,
}

impl EllipticalSpec {
    pub fn new(generator: Generator, moments: MomentPair) -> Result<Self> {
        if let Generator::StudentT { nu } = generator {
            if !(nu > 2.0) {
                return Err(MomentsError::Unsupported(format!("t generator needs nu > 2, got {nu}")));
            }
        }
        Ok(Self { generator, moments })
    }

    /// Log-density; Gaussian generator with nonsingular covariance only.
    pub fn log_density(&self, x: &Vector) -> Result<f64> {
        if self.generator != Generator::Gaussian {
            return Err(MomentsError::Unsupported("density evaluation is Gaussian only".into()));
        }
        let m = self.moments.dim() as f64;
        let chol = self.moments.cov.clone().cholesky().ok_or_else(|| MomentsError::Unsupported("singular covariance".into()))?;
        let d = x - &self.moments.mean;
        let sol = chol.solve(&d);
        let logdet: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        Ok(-0.5 * (m * (2.0 * std::f64::consts::PI).ln() + logdet + d.dot(&sol)))
    }

    /// Draws `n` samples; Gaussian and t generators.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<Vector>> {
        let m = self.moments.dim();
        let root = crate::numerics::psd_sqrt(&self.moments.cov, 1e-10)?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let z = Vector::from_iterator(m, (0..m).map(|_| StandardNormal.sample(rng)));
            let scale = match self.generator {
                Generator::Gaussian => 1.0,
                Generator::StudentT { nu } => {
                    let chi: f64 = ChiSquared::new(nu).expect("nu > 2").sample(rng);
                    ((nu - 2.0) / chi).sqrt()
                }
                Generator::Logistic => return Err(MomentsError::Unsupported("sampling is Gaussian or t only".into())),
            };
            out.push(&self.moments.mean + &root * z * scale);
        }
        Ok(out)
    }
}

/// Whether `candidate` lies within the Gelbrich ball (up to `tol`).
pub fn gelbrich_hull_contains(ball: &GelbrichBall, candidate: &MomentPair, tol: f64) -> Result<bool> {
    if candidate.dim() != ball.center.dim() {
        return Err(MomentsError::DimensionMismatch(candidate.dim(), ball.center.dim()));
    }
    Ok(gelbrich_distance(candidate, &ball.center)? <= ball.radius + tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectionCheck {
    pub wasserstein: f64,
    pub gelbrich: f64,
    pub in_ball: bool,
    pub in_hull: bool,
    /// `in_ball` implies `in_hull`
    pub holds: bool,
}

/// Checks that a discrete `candidate` in the type-p Euclidean Wasserstein
/// ball around `reference` (p >= 2) has moments in the Gelbrich ball of the
/// same radius around the moments of `reference`.
pub fn projection_check(
    reference: &DiscreteDistribution,
    candidate: &DiscreteDistribution,
    radius: f64,
    p: f64,
    tol: f64,
) -> Result<ProjectionCheck> {
    if !(p >= 2.0) {
        return Err(MomentsError::Unsupported("the moment projection needs p >= 2".into()));
    }
    let w = wasserstein_p(candidate, reference, p, &NormSpec::l2())?.distance;
    let g = gelbrich_distance(&candidate.moments(), &reference.moments())?;
    let in_ball = w <= radius;
    let in_hull = g <= radius + tol;
    Ok(ProjectionCheck { wasserstein: w, gelbrich: g, in_ball, in_hull, holds: !in_ball || in_hull })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GelbrichRiskResult {
    pub value: f64,
    pub dual_value: f64,
    pub primal_value: f64,
    pub gamma: f64,
    pub extremal: MomentPair,
    /// Multiple of the identity added to a rank-deficient covariance.
    pub regularization: f64,
}

/// `E[x^T Q x + 2 q^T x]` for given moments.
pub fn quadratic_moment_risk(loss: &QuadraticLoss, m: &MomentPair) -> f64 {
    (&loss.q_mat * &m.cov).trace() + m.mean.dot(&(&loss.q_mat * &m.mean)) + 2.0 * loss.q.dot(&m.mean)
}

/// Worst-case expected quadratic loss over the Gelbrich ball.
///
/// The multiplier `g* > lambda_max(Q)` solves
/// `||mu - (gI - Q)^{-1}(q + g mu)||^2 + tr[S (I - g (gI - Q)^{-1})^2] = eps^2`;
/// the extremal moments follow in closed form.
pub fn gelbrich_risk_quadratic(loss: &QuadraticLoss, ball: &GelbrichBall) -> Result<GelbrichRiskResult> {
    let m = loss.dim();
    if ball.center.dim() != m {
        return Err(MomentsError::DimensionMismatch(ball.center.dim(), m));
    }
    let mu = &ball.center.mean;
    let mut sigma = ball.center.cov.clone();
    let trace = sigma.trace();
    let seig = sym_eig(&sigma)?;
    let mut regularization = 0.0;
    if seig.min_value() <= 1e-12 * trace.max(1.0) {
        regularization = 1e-10 * (trace / m as f64).max(1.0);
        for k in 0..m {
            sigma[(k, k)] += regularization;
        }
    }
    let center = MomentPair { mean: mu.clone(), cov: sigma.clone() };
    let nominal = quadratic_moment_risk(loss, &center);
    let eps2 = ball.radius * ball.radius;
    if eps2 == 0.0 || (loss.q_mat.amax() == 0.0 && loss.q.amax() == 0.0) {
        return Ok(GelbrichRiskResult {
            value: nominal,
            dual_value: nominal,
            primal_value: nominal,
            gamma: if eps2 == 0.0 { f64::INFINITY } else { 0.0 },
            extremal: center,
            regularization,
        });
    }

    let eig = sym_eig(&loss.q_mat)?;
    let lam: Vec<f64> = eig.values.iter().copied().collect();
    let v = &eig.vectors;
    let g = v.transpose() * (&loss.q_mat * mu + &loss.q);
    let sdiag = (v.transpose() * &sigma * v).diagonal();
    let coef: Vec<f64> = (0..m).map(|k| g[k] * g[k] + lam[k] * lam[k] * sdiag[k]).collect();
    let lo = lam[0].max(0.0);
    let cscale = coef.iter().fold(0.0f64, |a, c| a.max(*c));
    let pinned = |k: usize| lam[0] >= 0.0 && lam[k] >= lo - 1e-13 * lam[0].abs().max(1.0);
    let blows_up = (0..m).any(|k| pinned(k) && coef[k] > 1e-26 * cscale.max(1e-300));
    let spent = |gamma: f64| -> f64 {
        (0..m).filter(|&k| coef[k] > 0.0 && !(pinned(k) && !blows_up)).map(|k| coef[k] / (gamma - lam[k]).powi(2)).sum()
    };
    let h = |gamma: f64| -> f64 {
        gamma * eps2
            + nominal
            + (0..m).filter(|&k| coef[k] > 0.0 && !(pinned(k) && !blows_up)).map(|k| coef[k] / (gamma - lam[k])).sum::<f64>()
    };
    if !blows_up && spent(lo) <= eps2 {
        let min = minimize_scalar_convex(h, Interval::closed_above(lo), Tolerance::default())?;
        return Err(MomentsError::NoInteriorSolution { dual_value: min.value, gamma: min.argmin });
    }
    let f = |t: f64| if t <= 0.0 { f64::NEG_INFINITY } else { eps2 - spent(lo + t) };
    let gamma = lo + bisect_root(f, 0.0, 1.0 + lo, Tolerance::new(0.0, 0.0, 5_000))?;

    // (gI - Q)^{-1} through the eigenbasis
    let inv = eig.map(|l| 1.0 / (gamma - l));
    let b = &loss.q + mu * gamma;
    let z = b.dot(&(&inv * &b));
    let root = crate::numerics::psd_sqrt(&sigma, 1e-10)?;
    let zmat = &root * &inv * &root * (gamma * gamma);
    let dual_value = gamma * (eps2 - mu.norm_squared() - sigma.trace()) + z + zmat.trace();

    let mean_star = &inv * (mu * gamma + &loss.q);
    let cov_star = &inv * &sigma * &inv * (gamma * gamma);
    let cov_star = (&cov_star + cov_star.transpose()) * 0.5;
    let extremal = MomentPair { mean: mean_star, cov: cov_star };
    let primal_value = quadratic_moment_risk(loss, &extremal);
    Ok(GelbrichRiskResult { value: dual_value, dual_value, primal_value, gamma, extremal, regularization })
}

/// Support function of the set of (mean, second moment) pairs generated by
/// the Gelbrich ball: `sup { q^T mu + tr(Q M) }`.
pub fn support_v(q: &Vector, q_mat: &Mat, ball: &GelbrichBall) -> Result<f64> {
    let loss = QuadraticLoss { q_mat: (q_mat + q_mat.transpose()) * 0.5, q: q * 0.5 };
    match gelbrich_risk_quadratic(&loss, ball) {
        Ok(r) => Ok(r.value),
        Err(MomentsError::NoInteriorSolution { dual_value, .. }) => Ok(dual_value),
        Err(e) => Err(e),
    }
}

/// Worst-case quadratic risk over the Gelbrich ball around an elliptical
/// distribution; the extremum shares the generator.
pub fn wc_risk_elliptical_quadratic(loss: &QuadraticLoss, center: &EllipticalSpec, radius: f64) -> Result<(f64, EllipticalSpec)> {
    let ball = GelbrichBall::new(center.moments.clone(), radius)?;
    let r = gelbrich_risk_quadratic(loss, &ball)?;
    Ok((r.value, EllipticalSpec { generator: center.generator, moments: r.extremal }))
}
