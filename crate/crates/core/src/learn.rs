//! Robust linear classification and regression through their
//! norm-regularized equivalents, for labels that cannot be perturbed.

use crate::convex::{dual_norm_eval, ConvexError, NormSpec};
use crate::numerics::{subgradient_minimize, NumericsError, SubgradientOptions, Tolerance};
use crate::wc_empirical::{wc_risk_pwa, wc_risk_pwa_lp, AffinePiece, BallSpec, PiecewiseAffineLoss, WcError};
use crate::{DiscreteDistribution, Mat, Vector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Weights whose sup-norm reaches this cap are reported as [`TrainFlag::Unattained`].
pub const WEIGHT_CAP: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("no samples")]
    Empty,
    #[error("sample {index} has {found} features, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, found: usize },
    #[error("labels must be -1 or +1, found {0}")]
    BadLabel(f64),
    #[error("loss {loss:?} cannot be used with {task}")]
    WrongTask { loss: UnivariateLoss, task: &'static str },
    #[error("loss {loss:?} needs transport order {expected}, got {found}")]
    PairingMismatch { loss: UnivariateLoss, expected: u8, found: u8 },
    #[error("loss {0:?} is not piecewise affine")]
    UnsupportedLoss(UnivariateLoss),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("least squares system is singular")]
    Singular,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Convex(#[from] ConvexError),
    #[error(transparent)]
    Wc(#[from] WcError),
}

pub type Result<T> = std::result::Result<T, LearnError>;

/// Margin losses `L(y w^T x)` and residual losses `L(w^T x - y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UnivariateLoss {
    Hinge,
    SmoothHinge,
    #[serde(rename = "logloss")]
    LogLoss,
    Squared,
    Huber {
        delta: f64,
    },
    EpsInsensitive {
        delta: f64,
    },
    /// `max(-tau z, (1 - tau) z)`
    Pinball {
        tau: f64,
    },
}

impl UnivariateLoss {
    pub fn is_classification(&self) -> bool {
        matches!(self, Self::Hinge | Self::SmoothHinge | Self::LogLoss)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Huber { delta } => delta > 0.0 && delta.is_finite(),
            Self::EpsInsensitive { delta } => delta >= 0.0 && delta.is_finite(),
            Self::Pinball { tau } => (0.0..=1.0).contains(&tau),
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(LearnError::InvalidParameter(format!("{self:?}")))
        }
    }

    pub fn value(&self, z: f64) -> f64 {
        match *self {
            Self::Hinge => (1.0 - z).max(0.0),
            Self::SmoothHinge => {
                if z >= 1.0 {
                    0.0
                } else if z >= 0.0 {
                    0.5 * (1.0 - z).powi(2)
                } else {
                    0.5 - z
                }
            }
            Self::LogLoss => {
                // log(1 + e^{-z}) without overflow
                if z > 0.0 {
                    (-z).exp().ln_1p()
                } else {
                    -z + z.exp().ln_1p()
                }
            }
            Self::Squared => z * z,
            Self::Huber { delta } => {
                if z.abs() <= delta {
                    0.5 * z * z
                } else {
                    delta * (z.abs() - 0.5 * delta)
                }
            }
            Self::EpsInsensitive { delta } => (z.abs() - delta).max(0.0),
            Self::Pinball { tau } => (-tau * z).max((1.0 - tau) * z),
        }
    }

    /// A subgradient at `z` (the derivative where it exists).
    pub fn derivative(&self, z: f64) -> f64 {
        match *self {
            Self::Hinge => {
                if z < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Self::SmoothHinge => {
                if z >= 1.0 {
                    0.0
                } else if z >= 0.0 {
                    z - 1.0
                } else {
                    -1.0
                }
            }
            Self::LogLoss => -1.0 / (1.0 + z.exp()),
            Self::Squared => 2.0 * z,
            Self::Huber { delta } => z.clamp(-delta, delta),
            Self::EpsInsensitive { delta } => {
                if z > delta {
                    1.0
                } else if z < -delta {
                    -1.0
                } else {
                    0.0
                }
            }
            Self::Pinball { tau } => {
                if z > 0.0 {
                    1.0 - tau
                } else if z < 0.0 {
                    -tau
                } else {
                    0.0
                }
            }
        }
    }

    /// Lipschitz modulus, `None` for the squared loss.
    pub fn lipschitz(&self) -> Option<f64> {
        match *self {
            Self::Hinge | Self::SmoothHinge | Self::LogLoss | Self::EpsInsensitive { .. } => Some(1.0),
            Self::Huber { delta } => Some(delta),
            Self::Pinball { tau } => Some(tau.max(1.0 - tau)),
            Self::Squared => None,
        }
    }

    /// `(slope, intercept)` pairs with `L(z) = max_k slope_k z + intercept_k`.
    pub fn pieces(&self) -> Option<Vec<(f64, f64)>> {
        match *self {
            Self::Hinge => Some(vec![(0.0, 0.0), (-1.0, 1.0)]),
            Self::EpsInsensitive { delta } => Some(vec![(0.0, 0.0), (1.0, -delta), (-1.0, -delta)]),
            Self::Pinball { tau } => Some(vec![(-tau, 0.0), (1.0 - tau, 0.0)]),
            _ => None,
        }
    }
}

/// Feature vectors with scalar labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<Vector>,
    labels: Vec<f64>,
}

impl Dataset {
    pub fn new(features: Vec<Vector>, labels: Vec<f64>) -> Result<Self> {
        let Some(first) = features.first() else {
            return Err(LearnError::Empty);
        };
        if labels.len() != features.len() {
            return Err(LearnError::InvalidParameter(format!("{} feature rows but {} labels", features.len(), labels.len())));
        }
        let expected = first.len();
        if let Some((index, x)) = features.iter().enumerate().find(|(_, x)| x.len() != expected) {
            return Err(LearnError::DimensionMismatch { index, expected, found: x.len() });
        }
        Ok(Self { features, labels })
    }

    pub fn features(&self) -> &[Vector] {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    /// Rows of `[x, y]`.
    pub fn stacked(&self) -> Vec<Vector> {
        self.features
            .iter()
            .zip(&self.labels)
            .map(|(x, &y)| Vector::from_iterator(x.len() + 1, x.iter().copied().chain([y])))
            .collect()
    }

    /// Copy with every feature scaled to zero mean and unit variance.
    /// Constant features are centered only.
    pub fn standardized(&self) -> Self {
        let n = self.len() as f64;
        let mean = self.features.iter().fold(Vector::zeros(self.dim()), |acc, x| acc + x) / n;
        let var = self.features.iter().fold(Vector::zeros(self.dim()), |acc, x| acc + (x - &mean).map(|v| v * v)) / n;
        let scale = var.map(|v| if v > 0.0 { v.sqrt() } else { 1.0 });
        let features = self.features.iter().map(|x| (x - &mean).component_div(&scale)).collect();
        Self { features, labels: self.labels.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainFlag {
    /// All labels equal.
    DegenerateData,
    /// Weights hit [`WEIGHT_CAP`]: the infimum is approached but not attained.
    Unattained,
    /// Iteration budget ran out before the gap certificate closed.
    NotCertified,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub iterations: usize,
    /// Objective minus a certified lower bound; zero for closed-form solutions.
    pub gap: f64,
    pub flags: Vec<TrainFlag>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainedModel {
    pub weights: Vector,
    pub objective: f64,
    pub diagnostics: Diagnostics,
}

/// Options shared by both trainers.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub eps: f64,
    /// Norm on the feature space; the regularizer uses its dual.
    pub input_norm: NormSpec,
    pub tol: Tolerance,
}

impl TrainOptions {
    pub fn new(eps: f64, input_norm: NormSpec) -> Self {
        Self { eps, input_norm, tol: Tolerance::new(1e-9, 1e-9, 2_000) }
    }

    fn check(&self, dim: usize) -> Result<()> {
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(LearnError::InvalidParameter(format!("radius {}", self.eps)));
        }
        self.input_norm.validate(Some(dim))?;
        Ok(())
    }
}

/// `(1/N) sum L(y_i w^T x_i) + eps ||w||_*`
pub fn classifier_objective(data: &Dataset, loss: UnivariateLoss, eps: f64, norm: &NormSpec, w: &[f64]) -> f64 {
    let n = data.len() as f64;
    let emp: f64 = data.features.iter().zip(&data.labels).map(|(x, y)| loss.value(y * dot(w, x))).sum::<f64>() / n;
    emp + eps * dual_norm_eval(norm, w)
}

/// `(1/N) sum L(w^T x_i - y_i) + eps Lip(L) ||w||_*`, or for the squared loss
/// `(sqrt(MSE) + eps ||w||_*)^2`.
pub fn regressor_objective(data: &Dataset, loss: UnivariateLoss, eps: f64, norm: &NormSpec, w: &[f64]) -> f64 {
    let n = data.len() as f64;
    let reg = dual_norm_eval(norm, w);
    match loss {
        UnivariateLoss::Squared => {
            let mse = residuals(data, w).map(|r| r * r).sum::<f64>() / n;
            (mse.sqrt() + eps * reg).powi(2)
        }
        _ => residuals(data, w).map(|r| loss.value(r)).sum::<f64>() / n + eps * loss.lipschitz().unwrap_or(0.0) * reg,
    }
}

fn dot(w: &[f64], x: &Vector) -> f64 {
    w.iter().zip(x.iter()).map(|(a, b)| a * b).sum()
}

fn residuals<'a>(data: &'a Dataset, w: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
    data.features.iter().zip(&data.labels).map(move |(x, y)| dot(w, x) - y)
}

/// Subgradient of `w -> ||w||_*`: a maximizer of `u^T w` over the primal unit ball.
fn dual_norm_subgradient(norm: &NormSpec, w: &[f64]) -> Vec<f64> {
    if w.iter().all(|&v| v == 0.0) {
        return vec![0.0; w.len()];
    }
    norm.unit_argmax(w)
}

fn solve(
    oracle: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    dim: usize,
    tol: Tolerance,
    mut flags: Vec<TrainFlag>,
    objective: impl Fn(&[f64]) -> f64,
) -> Result<TrainedModel> {
    let opts = SubgradientOptions { tol, box_radius: WEIGHT_CAP, ..SubgradientOptions::default() };
    let (x, iterations, gap) = match subgradient_minimize(oracle, &vec![0.0; dim], opts) {
        Ok(r) => {
            let gap = r.gap();
            (r.x, r.iterations, gap)
        }
        Err(NumericsError::MaxIterExceeded { best_x, gap, .. }) => {
            flags.push(TrainFlag::NotCertified);
            (best_x, tol.max_iter, gap)
        }
        Err(e) => return Err(e.into()),
    };
    if x.iter().any(|v| v.abs() >= 0.999 * WEIGHT_CAP) {
        flags.push(TrainFlag::Unattained);
    }
    let objective = objective(&x);
    Ok(TrainedModel { weights: Vector::from_vec(x), objective, diagnostics: Diagnostics { iterations, gap, flags } })
}

/// Robust linear classifier: minimizes [`classifier_objective`].
pub fn dro_train_classifier(data: &Dataset, loss: UnivariateLoss, opts: &TrainOptions) -> Result<TrainedModel> {
    if !loss.is_classification() {
        return Err(LearnError::WrongTask { loss, task: "classification" });
    }
    opts.check(data.dim())?;
    if let Some(&y) = data.labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
        return Err(LearnError::BadLabel(y));
    }
    let mut flags = Vec::new();
    if data.labels.iter().all(|&y| y == data.labels[0]) {
        flags.push(TrainFlag::DegenerateData);
    }
    let n = data.len() as f64;
    let dim = data.dim();
    let norm = &opts.input_norm;
    let eps = opts.eps;
    let oracle = |w: &[f64]| {
        let mut g = vec![0.0; dim];
        let mut v = 0.0;
        for (x, y) in data.features.iter().zip(&data.labels) {
            let z = y * dot(w, x);
            v += loss.value(z);
            let d = loss.derivative(z) * y / n;
            for (gi, xi) in g.iter_mut().zip(x.iter()) {
                *gi += d * xi;
            }
        }
        for (gi, si) in g.iter_mut().zip(dual_norm_subgradient(norm, w)) {
            *gi += eps * si;
        }
        (v / n + eps * dual_norm_eval(norm, w), g)
    };
    solve(oracle, dim, opts.tol, flags, |w| classifier_objective(data, loss, eps, norm, w))
}

/// Robust linear regressor: minimizes [`regressor_objective`].
///
/// `order` is the transport order: 1 for Lipschitz losses, 2 for the squared loss.
pub fn dro_train_regressor(data: &Dataset, loss: UnivariateLoss, order: u8, opts: &TrainOptions) -> Result<TrainedModel> {
    if loss.is_classification() {
        return Err(LearnError::WrongTask { loss, task: "regression" });
    }
    loss.validate()?;
    let expected = if loss == UnivariateLoss::Squared { 2 } else { 1 };
    if order != expected {
        return Err(LearnError::PairingMismatch { loss, expected, found: order });
    }
    opts.check(data.dim())?;
    let n = data.len() as f64;
    let dim = data.dim();
    let norm = &opts.input_norm;
    let eps = opts.eps;
    if loss == UnivariateLoss::Squared && eps == 0.0 {
        let w = least_squares(data)?;
        let objective = regressor_objective(data, loss, 0.0, norm, w.as_slice());
        let diagnostics = Diagnostics { iterations: 0, gap: 0.0, flags: Vec::new() };
        return Ok(TrainedModel { weights: w, objective, diagnostics });
    }
    let oracle = |w: &[f64]| {
        let sub = dual_norm_subgradient(norm, w);
        let reg = dual_norm_eval(norm, w);
        let mut g = vec![0.0; dim];
        match loss {
            UnivariateLoss::Squared => {
                let mut sse = 0.0;
                for (x, r) in data.features.iter().zip(residuals(data, w)) {
                    sse += r * r;
                    for (gi, xi) in g.iter_mut().zip(x.iter()) {
                        *gi += r * xi / n;
                    }
                }
                let rmse = (sse / n).sqrt();
                let outer = rmse + eps * reg;
                for (gi, si) in g.iter_mut().zip(&sub) {
                    let grad_rmse = if rmse > 0.0 { *gi / rmse } else { 0.0 };
                    *gi = 2.0 * outer * (grad_rmse + eps * si);
                }
                (outer * outer, g)
            }
            _ => {
                let lip = loss.lipschitz().unwrap_or(0.0);
                let mut v = 0.0;
                for (x, r) in data.features.iter().zip(residuals(data, w)) {
                    v += loss.value(r);
                    let d = loss.derivative(r) / n;
                    for (gi, xi) in g.iter_mut().zip(x.iter()) {
                        *gi += d * xi;
                    }
                }
                for (gi, si) in g.iter_mut().zip(&sub) {
                    *gi += eps * lip * si;
                }
                (v / n + eps * lip * reg, g)
            }
        }
    };
    solve(oracle, dim, opts.tol, Vec::new(), |w| regressor_objective(data, loss, eps, norm, w))
}

/// Minimum-norm least squares solution via SVD.
fn least_squares(data: &Dataset) -> Result<Vector> {
    let x = Mat::from_fn(data.len(), data.dim(), |i, j| data.features[i][j]);
    let y = Vector::from_column_slice(&data.labels);
    let svd = x.svd(true, true);
    let cutoff = 1e-12 * svd.singular_values.amax().max(f64::MIN_POSITIVE);
    svd.solve(&y, cutoff).map_err(|_| LearnError::Singular)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crosscheck {
    pub regularized: f64,
    pub worst_case: f64,
    pub diff: f64,
}

/// Compares the regularized objective at the model's weights with the
/// worst-case risk of the induced piecewise affine loss over a type-1 ball.
///
/// Classification moves `y x` within the input norm. Regression moves
/// `(x, y)` with the label coordinate frozen.
pub fn dro_objective_crosscheck(
    model: &TrainedModel,
    data: &Dataset,
    loss: UnivariateLoss,
    eps: f64,
    input_norm: &NormSpec,
) -> Result<Crosscheck> {
    let pieces = loss.pieces().ok_or(LearnError::UnsupportedLoss(loss))?;
    let w = &model.weights;
    let (regularized, atoms, affine, norm) = if loss.is_classification() {
        let atoms: Vec<Vector> = data.features.iter().zip(&data.labels).map(|(x, y)| x * *y).collect();
        let affine: Vec<AffinePiece> = pieces.iter().map(|&(s, b)| AffinePiece::new((w * s).as_slice().to_vec(), b)).collect();
        (classifier_objective(data, loss, eps, input_norm, w.as_slice()), atoms, affine, input_norm.clone())
    } else {
        let dim = data.dim();
        let affine: Vec<AffinePiece> =
            pieces.iter().map(|&(s, b)| AffinePiece::new(w.iter().map(|v| s * v).chain([-s]).collect(), b)).collect();
        let frozen = NormSpec::Scaled { alpha: f64::INFINITY, p: 1.0 };
        let norm = NormSpec::Separable { blocks: vec![(input_norm.clone(), dim), (frozen, 1)] };
        (regressor_objective(data, loss, eps, input_norm, w.as_slice()), data.stacked(), affine, norm)
    };
    let pwa = PiecewiseAffineLoss::new(affine)?;
    let samples = DiscreteDistribution::empirical(atoms).map_err(WcError::from)?;
    let ball = BallSpec::type1(eps, norm.clone());
    let worst_case = if norm.is_polyhedral() && eps > 0.0 {
        wc_risk_pwa_lp(&pwa, &samples, &ball)?.value
    } else {
        wc_risk_pwa(&pwa, &samples, &ball)?.value
    };
    Ok(Crosscheck { regularized, worst_case, diff: (regularized - worst_case).abs() })
}
