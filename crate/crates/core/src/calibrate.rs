//! Radius selection: concentration-based formulas, k-fold cross-validation
//! and a Monte-Carlo coverage harness.
//!
//! The constants in [`TailModel`] and [`MomentTailModel`] are not known in
//! practice. The defaults (`c1 = e`, `c2 = 1`, `c = e`) are heuristic.

use crate::convex::NormSpec;
use crate::wc_empirical::{wc_risk_pwa, AffinePiece, BallSpec, PiecewiseAffineLoss, WcError};
use crate::{DiscreteDistribution, Mat, Vector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrateError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("order p = {p} equals half the dimension {m}; no closed-form radius")]
    UnsupportedCase { p: f64, m: usize },
    #[error("{samples} samples cannot fill {folds} folds")]
    InsufficientData { samples: usize, folds: usize },
    #[error(transparent)]
    Wc(#[from] WcError),
}

pub type Result<T> = std::result::Result<T, CalibrateError>;

/// Light-tail constants: `E exp(||xi||^alpha) <= a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub alpha: f64,
    pub a: f64,
    pub c1: f64,
    pub c2: f64,
    /// dimension
    pub m: usize,
}

impl TailModel {
    /// Heuristic constants `c1 = e`, `c2 = 1`.
    pub fn heuristic(m: usize, alpha: f64) -> Self {
        Self { alpha, a: 1.0, c1: std::f64::consts::E, c2: 1.0, m }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentTailModel {
    pub c: f64,
}

impl Default for MomentTailModel {
    fn default() -> Self {
        Self { c: std::f64::consts::E }
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta <= 1.0 {
        Ok(())
    } else {
        Err(CalibrateError::InvalidParameter(format!("confidence level eta = {eta} outside (0, 1]")))
    }
}

/// Radius that contains the data-generating distribution with probability
/// at least `1 - eta` around an empirical distribution of `n` samples.
pub fn radius_empirical(model: &TailModel, n: usize, eta: f64, p: f64) -> Result<f64> {
    check_eta(eta)?;
    if !(p >= 1.0) || !p.is_finite() {
        return Err(CalibrateError::InvalidParameter(format!("order p = {p}")));
    }
    if n == 0 || model.m == 0 {
        return Err(CalibrateError::InvalidParameter("need n >= 1 and m >= 1".into()));
    }
    if !(model.alpha > p) || !(model.c1 > 0.0) || !(model.c2 > 0.0) || !(model.a > 0.0) {
        return Err(CalibrateError::InvalidParameter(format!("{model:?} with p = {p}")));
    }
    let m = model.m as f64;
    if p == m / 2.0 {
        return Err(CalibrateError::UnsupportedCase { p, m: model.m });
    }
    let log = (model.c1 / eta).ln();
    let n = n as f64;
    let base = log / (model.c2 * n);
    let exponent = if n >= log / model.c2 { (p / m).min(0.5) } else { p / model.alpha };
    Ok(base.powf(exponent))
}

/// `log(c / eta) / sqrt(n)`
pub fn radius_moments(model: &MomentTailModel, n: usize, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    if !(model.c > 1.0) || n == 0 {
        return Err(CalibrateError::InvalidParameter(format!("{model:?}, n = {n}")));
    }
    Ok((model.c / eta).ln() / (n as f64).sqrt())
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fold index per sample: samples are ordered by a hash of `(index, seed)`
/// and dealt round-robin, so fold sizes differ by at most one.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(CalibrateError::InvalidParameter(format!("{folds} folds")));
    }
    if n < folds {
        return Err(CalibrateError::InsufficientData { samples: n, folds });
    }
    let mut order: Vec<(u64, usize)> = (0..n).map(|i| (splitmix64(seed ^ splitmix64(i as u64)), i)).collect();
    order.sort_unstable();
    let mut fold = vec![0; n];
    for (rank, (_, i)) in order.into_iter().enumerate() {
        fold[i] = rank % folds;
    }
    Ok(fold)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    pub eps: f64,
    /// Mean held-out risk per grid point, in grid order.
    pub scores: Vec<f64>,
}

/// K-fold cross-validation over a radius grid.
///
/// `train(train_idx, eps)` fits a model, `eval(&model, test_idx)` returns its
/// held-out risk. Ties go to the smallest radius.
pub fn cv_radius<M, E>(
    n: usize,
    eps_grid: &[f64],
    folds: usize,
    seed: u64,
    mut train: impl FnMut(&[usize], f64) -> std::result::Result<M, E>,
    mut eval: impl FnMut(&M, &[usize]) -> f64,
) -> std::result::Result<CvResult, E>
where
    E: From<CalibrateError>,
{
    if eps_grid.is_empty() {
        return Err(CalibrateError::InvalidParameter("empty radius grid".into()).into());
    }
    let assignment = fold_assignment(n, folds, seed)?;
    let split: Vec<(Vec<usize>, Vec<usize>)> = (0..folds).map(|k| (0..n).partition(|&i| assignment[i] != k)).collect();
    let mut scores = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let mut total = 0.0;
        for (train_idx, test_idx) in &split {
            let model = train(train_idx, eps)?;
            total += eval(&model, test_idx);
        }
        scores.push(total / folds as f64);
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        let (b, e) = (scores[best], eps_grid[best]);
        if *s < b || (*s == b && eps_grid[i] < e) {
            best = i;
        }
    }
    Ok(CvResult { eps: eps_grid[best], scores })
}

/// Setup for [`hinge_coverage`]: Gaussian data and `loss(x) = max(0, 1 - w^T x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub mean: Vec<f64>,
    /// Lower-triangular factor of the covariance.
    pub cov_factor: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub samples: usize,
    pub trials: usize,
    pub eta: f64,
    /// Transport order of the ball (1 or 2).
    pub order: f64,
    /// Tail exponent handed to [`TailModel::heuristic`]; must exceed `order`.
    pub tail_alpha: f64,
    pub seed: u64,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            mean: vec![0.5, -0.25],
            cov_factor: vec![vec![1.0, 0.0], vec![0.3, 0.8]],
            weights: vec![1.0, 0.5],
            samples: 50,
            trials: 200,
            eta: 0.1,
            order: 2.0,
            tail_alpha: 2.5,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub radius: f64,
    pub true_risk: f64,
    pub covered: usize,
    pub trials: usize,
    pub fraction: f64,
    /// `1 - eta`
    pub target: f64,
}

/// `E max(0, 1 - Z)` for `Z ~ N(mu, s^2)`.
pub fn gaussian_hinge_risk(mu: f64, s: f64) -> f64 {
    if s == 0.0 {
        return (1.0 - mu).max(0.0);
    }
    let std = Normal::standard();
    let t = (1.0 - mu) / s;
    (1.0 - mu) * std.cdf(t) + s * std.pdf(t)
}

/// Fraction of resampled datasets whose worst-case hinge risk, at the
/// radius from [`radius_empirical`], bounds the true risk.
pub fn hinge_coverage(cfg: &CoverageConfig) -> Result<CoverageReport> {
    let m = cfg.mean.len();
    if cfg.weights.len() != m || cfg.cov_factor.len() != m || cfg.cov_factor.iter().any(|r| r.len() != m) {
        return Err(CalibrateError::InvalidParameter("coverage config dimensions disagree".into()));
    }
    if cfg.trials == 0 || cfg.samples == 0 {
        return Err(CalibrateError::InvalidParameter("need at least one trial and one sample".into()));
    }
    let factor = Mat::from_fn(m, m, |i, j| if j <= i { cfg.cov_factor[i][j] } else { 0.0 });
    let mean = Vector::from_column_slice(&cfg.mean);
    let w = Vector::from_column_slice(&cfg.weights);
    let radius = radius_empirical(&TailModel::heuristic(m, cfg.tail_alpha), cfg.samples, cfg.eta, cfg.order)?;
    let true_risk = gaussian_hinge_risk(w.dot(&mean), (factor.transpose() * &w).norm());
    let loss = PiecewiseAffineLoss::new(vec![
        AffinePiece::new(vec![0.0; m], 0.0),
        AffinePiece::new(w.iter().map(|v| -v).collect(), 1.0),
    ])?;
    let ball = BallSpec::new(radius, cfg.order, NormSpec::l2(), crate::convex::SetSpec::Whole);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut covered = 0;
    for _ in 0..cfg.trials {
        let atoms: Vec<Vector> = (0..cfg.samples)
            .map(|_| {
                let z = Vector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
                &mean + &factor * z
            })
            .collect();
        let emp = DiscreteDistribution::empirical(atoms).map_err(WcError::from)?;
        if wc_risk_pwa(&loss, &emp, &ball)?.value >= true_risk {
            covered += 1;
        }
    }
    Ok(CoverageReport {
        radius,
        true_risk,
        covered,
        trials: cfg.trials,
        fraction: covered as f64 / cfg.trials as f64,
        target: 1.0 - cfg.eta,
    })
}
