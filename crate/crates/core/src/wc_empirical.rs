//! Worst-case expected loss over a Wasserstein ball centred at a discrete
//! (typically empirical) distribution.
//!
//! Two loss families are covered: maxima of affine pieces, solved by linear
//! programming or closed forms, and quadratics `x^T Q x + 2 q^T x` under the
//! type-2 Euclidean ball, solved through a scalar dual.

use crate::convex::{add_norm_le, ConvexError, LinExpr, NormSpec, SetSpec};
use crate::distribution::{DiscreteDistribution, DistributionError};
use crate::numerics::{
    bisect_root, minimize_scalar_convex, sym_eig, ConstraintSense, Interval, LinearProgram, LpStatus, NumericsError, Tolerance,
};
use crate::{Mat, Vector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WcError {
    #[error("invalid ball: {0}")]
    InvalidBall(String),
    #[error("dimension mismatch: loss has {loss}, samples have {samples}")]
    DimensionMismatch { loss: usize, samples: usize },
    #[error("loss has no pieces")]
    EmptyLoss,
    #[error("sample {0} lies outside the support set")]
    SampleOutsideSupport(usize),
    #[error("unsupported combination: {0}")]
    Unsupported(String),
    #[error("LP ended with status {0:?}")]
    Lp(LpStatus),
    #[error(transparent)]
    Convex(#[from] ConvexError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

pub type Result<T> = std::result::Result<T, WcError>;

/// Wasserstein ball `{Q : W_p(Q, P) <= radius}` with transport cost
/// `norm(x - y)^p` and all distributions supported on `support`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub radius: f64,
    /// 1, 2 or infinity
    pub p: f64,
    pub norm: NormSpec,
    pub support: SetSpec,
}

impl BallSpec {
    pub fn new(radius: f64, p: f64, norm: NormSpec, support: SetSpec) -> Self {
        Self { radius, p, norm, support }
    }

    /// Type-1 ball on the whole space.
    pub fn type1(radius: f64, norm: NormSpec) -> Self {
        Self::new(radius, 1.0, norm, SetSpec::Whole)
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if !(self.radius >= 0.0) || !self.radius.is_finite() {
            return Err(WcError::InvalidBall(format!("radius {} must be finite and nonnegative", self.radius)));
        }
        if !(self.p == 1.0 || self.p == 2.0 || self.p.is_infinite()) {
            return Err(WcError::InvalidBall(format!("order {} must be 1, 2 or infinity", self.p)));
        }
        self.norm.validate(Some(dim)).map_err(WcError::from)?;
        match &self.support {
            SetSpec::Whole => Ok(()),
            SetSpec::Polyhedron { c, d } if c.ncols() == dim && c.nrows() == d.len() => Ok(()),
            SetSpec::Polyhedron { .. } => Err(WcError::InvalidBall("support dimensions do not match".into())),
            _ => Err(WcError::Unsupported("support must be the whole space or a polyhedron".into())),
        }
    }
}

/// One affine piece `a^T x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub a: Vector,
    pub b: f64,
}

impl AffinePiece {
    pub fn new(a: Vec<f64>, b: f64) -> Self {
        Self { a: Vector::from_vec(a), b }
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        self.a.dot(x) + self.b
    }
}

/// `l(x) = max_j a_j^T x + b_j`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseAffineLoss {
    pub pieces: Vec<AffinePiece>,
}

impl PiecewiseAffineLoss {
    pub fn new(pieces: Vec<AffinePiece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(WcError::EmptyLoss);
        }
        let m = pieces[0].a.len();
        if let Some(p) = pieces.iter().find(|p| p.a.len() != m) {
            return Err(WcError::DimensionMismatch { loss: m, samples: p.a.len() });
        }
        Ok(Self { pieces })
    }

    pub fn dim(&self) -> usize {
        self.pieces[0].a.len()
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        self.pieces.iter().map(|p| p.eval(x)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Expected loss under a discrete distribution.
    pub fn expected(&self, dist: &DiscreteDistribution) -> f64 {
        dist.expect(|x| self.eval(x))
    }
}

/// `l(x) = x^T Q x + 2 q^T x` with `Q` symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticLoss {
    pub q_mat: Mat,
    pub q: Vector,
}

impl QuadraticLoss {
    pub fn new(q_mat: Mat, q: Vector) -> Result<Self> {
        if q_mat.nrows() != q.len() || q_mat.ncols() != q.len() {
            return Err(WcError::DimensionMismatch { loss: q.len(), samples: q_mat.nrows() });
        }
        let q_mat = (&q_mat + q_mat.transpose()) * 0.5;
        Ok(Self { q_mat, q })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        x.dot(&(&self.q_mat * x)) + 2.0 * self.q.dot(x)
    }

    pub fn expected(&self, dist: &DiscreteDistribution) -> f64 {
        dist.expect(|x| self.eval(x))
    }
}

/// Atom of an asymptotic family whose weight is `weight * (1 - shrink / n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaseAtom {
    pub location: Vector,
    pub weight: f64,
    pub shrink: f64,
}

/// Atom at `origin + n^rate * direction` carrying weight `mass / n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscapingAtom {
    pub origin: Vector,
    pub direction: Vector,
    pub rate: f64,
    pub mass: f64,
}

/// Sequence of distributions in the ball whose risk tends to the supremum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticFamily {
    pub base: Vec<BaseAtom>,
    pub escaping: Vec<EscapingAtom>,
}

impl AsymptoticFamily {
    /// Smallest index for which every weight is nonnegative.
    pub fn min_index(&self) -> f64 {
        self.base.iter().map(|b| b.shrink).fold(1.0, f64::max)
    }

    /// Member `n` of the family (`n >= min_index()`).
    pub fn at(&self, n: f64) -> DiscreteDistribution {
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for b in &self.base {
            let w = b.weight * (1.0 - b.shrink / n);
            if w > 0.0 {
                atoms.push(b.location.clone());
                weights.push(w);
            }
        }
        for e in &self.escaping {
            atoms.push(&e.origin + &e.direction * n.powf(e.rate));
            weights.push(e.mass / n);
        }
        DiscreteDistribution::normalized(atoms, weights).expect("family members are valid distributions")
    }
}

/// Worst-case distribution, or a family approaching the supremum when it
/// is not attained.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExtremalReport {
    Attained { distribution: DiscreteDistribution },
    Asymptotic { family: AsymptoticFamily },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WcMethod {
    Nominal,
    ClosedForm,
    LinearProgram,
    ScalarDual,
    PerSample,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WcRiskResult {
    pub value: f64,
    pub method: WcMethod,
    /// Multiplier of the ball constraint, when one was computed.
    pub gamma: Option<f64>,
    /// Primal minus dual objective of the LP, when one was solved.
    pub lp_gap: Option<f64>,
}

fn check_inputs(dim: usize, samples: &DiscreteDistribution, ball: &BallSpec) -> Result<()> {
    if samples.dim() != dim {
        return Err(WcError::DimensionMismatch { loss: dim, samples: samples.dim() });
    }
    ball.validate(dim)?;
    for (i, x) in samples.atoms().iter().enumerate() {
        if !ball.support.contains(x.as_slice(), 1e-9) {
            return Err(WcError::SampleOutsideSupport(i));
        }
    }
    Ok(())
}

/// `max_j ||a_j||_*`
pub fn lipschitz_modulus_pwa(loss: &PiecewiseAffineLoss, norm: &NormSpec) -> f64 {
    let dual = norm.dual();
    loss.pieces.iter().map(|p| dual.eval_vec(&p.a)).fold(0.0, f64::max)
}

/// `E_P[l] + radius * Lip(l)`, an upper bound on the worst-case risk.
pub fn lipschitz_upper_bound(loss: &PiecewiseAffineLoss, samples: &DiscreteDistribution, ball: &BallSpec) -> Result<f64> {
    check_inputs(loss.dim(), samples, ball)?;
    Ok(loss.expected(samples) + ball.radius * lipschitz_modulus_pwa(loss, &ball.norm))
}

/// Worst-case expected loss of a piecewise affine loss.
///
/// * type-1 ball, whole space: nominal risk plus radius times the
///   Lipschitz modulus;
/// * type-1 ball, polyhedral support: linear program over the dual
///   multipliers (polyhedral norms only);
/// * type-2 ball, whole space: one-dimensional convex dual in the
///   multiplier of the ball constraint;
/// * type-infinity ball: every atom moves independently within the radius.
pub fn wc_risk_pwa(loss: &PiecewiseAffineLoss, samples: &DiscreteDistribution, ball: &BallSpec) -> Result<WcRiskResult> {
    check_inputs(loss.dim(), samples, ball)?;
    let nominal = loss.expected(samples);
    if ball.radius == 0.0 {
        return Ok(WcRiskResult { value: nominal, method: WcMethod::Nominal, gamma: None, lp_gap: None });
    }
    if ball.p.is_infinite() {
        let value = per_sample_worst(loss, samples, ball, ball.radius)?;
        return Ok(WcRiskResult { value, method: WcMethod::PerSample, gamma: None, lp_gap: None });
    }
    match (&ball.support, ball.p) {
        (SetSpec::Whole, 1.0) => {
            let lip = lipschitz_modulus_pwa(loss, &ball.norm);
            Ok(WcRiskResult { value: nominal + ball.radius * lip, method: WcMethod::ClosedForm, gamma: Some(lip), lp_gap: None })
        }
        (_, 1.0) => wc_risk_pwa_lp(loss, samples, ball),
        (SetSpec::Whole, _) => type2_scalar_dual(loss, samples, ball),
        _ => Err(WcError::Unsupported("type-2 balls need the whole space as support".into())),
    }
}

fn type2_scalar_dual(loss: &PiecewiseAffineLoss, samples: &DiscreteDistribution, ball: &BallSpec) -> Result<WcRiskResult> {
    let dual = ball.norm.dual();
    let sq: Vec<f64> = loss.pieces.iter().map(|p| dual.eval_vec(&p.a).powi(2)).collect();
    let base: Vec<Vec<f64>> = samples.atoms().iter().map(|x| loss.pieces.iter().map(|p| p.eval(x)).collect()).collect();
    let eps2 = ball.radius * ball.radius;
    // sup_t a^T t - g ||t||^2 = ||a||_*^2 / (4 g)
    let g = |gamma: f64| {
        let inner: f64 = samples
            .weights()
            .iter()
            .zip(&base)
            .map(|(w, row)| w * row.iter().zip(&sq).map(|(l, s)| l + s / (4.0 * gamma)).fold(f64::NEG_INFINITY, f64::max))
            .sum();
        gamma * eps2 + inner
    };
    if sq.iter().all(|&s| s == 0.0) {
        return Ok(WcRiskResult { value: loss.expected(samples), method: WcMethod::ScalarDual, gamma: Some(0.0), lp_gap: None });
    }
    let m = minimize_scalar_convex(g, Interval::open_above(0.0), Tolerance::new(1e-14, 1e-14, 10_000))?;
    Ok(WcRiskResult { value: m.value, method: WcMethod::ScalarDual, gamma: Some(m.argmin), lp_gap: None })
}

/// `sum_i w_i max_j [ b_j + sup { a_j^T x : ||x - x_i|| <= r, x in support } ]`
fn per_sample_worst(loss: &PiecewiseAffineLoss, samples: &DiscreteDistribution, ball: &BallSpec, r: f64) -> Result<f64> {
    let mut total = 0.0;
    for (x, w) in samples.iter() {
        total += w * sample_gain(loss, x, ball, r)?;
    }
    Ok(total)
}

/// `max_j sup { a_j^T y + b_j : ||y - x|| <= r, y in support }`
fn sample_gain(loss: &PiecewiseAffineLoss, x: &Vector, ball: &BallSpec, r: f64) -> Result<f64> {
    let dual = ball.norm.dual();
    let mut best = f64::NEG_INFINITY;
    for p in &loss.pieces {
        let v = match &ball.support {
            SetSpec::Whole => p.eval(x) + r * dual.eval_vec(&p.a),
            SetSpec::Polyhedron { c, d } => {
                if !ball.norm.is_polyhedral() {
                    return Err(WcError::Unsupported("polyhedral support needs a polyhedral norm".into()));
                }
                p.eval(x) + capped_gain(&p.a, x, c, d, &ball.norm, r)?
            }
            _ => unreachable!("validated"),
        };
        best = best.max(v);
    }
    Ok(best)
}

/// `sup { a^T t : ||t|| <= r, C (x + t) <= d }`
fn capped_gain(a: &Vector, x: &Vector, c: &Mat, d: &Vector, norm: &NormSpec, r: f64) -> Result<f64> {
    let m = a.len();
    let mut lp = LinearProgram::new();
    let t: Vec<usize> = (0..m).map(|k| lp.add_free_var(-a[k])).collect();
    let slack = d - c * x;
    for i in 0..c.nrows() {
        let row: LinExpr = (0..m).map(|k| (t[k], c[(i, k)])).filter(|e| e.1 != 0.0).collect();
        lp.add_constraint(row, ConstraintSense::Le, slack[i]);
    }
    let te: Vec<LinExpr> = t.iter().map(|&j| vec![(j, 1.0)]).collect();
    add_norm_le(&mut lp, norm, &te, &Vec::new(), r)?;
    let sol = lp.solve();
    match sol.status {
        LpStatus::Optimal => Ok(-sol.objective),
        s => Err(WcError::Lp(s)),
    }
}

/// Type-1 worst-case risk from the dual linear program, also on the whole
/// space. With a polyhedral support the norm must be polyhedral too.
pub fn wc_risk_pwa_lp(loss: &PiecewiseAffineLoss, samples: &DiscreteDistribution, ball: &BallSpec) -> Result<WcRiskResult> {
    check_inputs(loss.dim(), samples, ball)?;
    if ball.p != 1.0 {
        return Err(WcError::Unsupported("the linear program covers type-1 balls".into()));
    }
    let m = loss.dim();
    let mut lp = LinearProgram::new();
    let gamma = lp.add_nonneg_var(ball.radius);
    let s: Vec<usize> = samples.weights().iter().map(|&w| lp.add_free_var(w)).collect();
    if matches!(ball.support, SetSpec::Whole) {
        // no support multipliers: u_ij = -a_j is pinned and ||a_j||_* <= g
        // holds for any norm
        for (i, x) in samples.atoms().iter().enumerate() {
            for piece in &loss.pieces {
                lp.add_constraint(vec![(s[i], -1.0)], ConstraintSense::Le, -piece.eval(x));
            }
        }
        for piece in &loss.pieces {
            let lip = ball.norm.dual().eval_vec(&piece.a);
            lp.add_constraint(vec![(gamma, -1.0)], ConstraintSense::Le, -lip);
        }
    } else {
        if !ball.norm.is_polyhedral() {
            return Err(WcError::Unsupported("the linear program needs a polyhedral norm".into()));
        }
        let (c, d) = ball.support.as_polyhedron(m).ok_or_else(|| WcError::Unsupported("support".into()))?;
        let dual = ball.norm.dual();
        // min g eps + sum_i w_i s_i
        // s.t. b_j + d^T l_ij - x_i^T u_ij <= s_i,  C^T l_ij - u_ij = a_j,  ||u_ij||_* <= g
        for (i, x) in samples.atoms().iter().enumerate() {
            for piece in &loss.pieces {
                let u: Vec<usize> = (0..m).map(|_| lp.add_free_var(0.0)).collect();
                let l: Vec<usize> = (0..c.nrows()).map(|_| lp.add_nonneg_var(0.0)).collect();
                let mut row: LinExpr = l.iter().enumerate().map(|(r, &v)| (v, d[r])).collect();
                row.extend(u.iter().enumerate().map(|(k, &v)| (v, -x[k])));
                row.push((s[i], -1.0));
                lp.add_constraint(row, ConstraintSense::Le, -piece.b);
                for k in 0..m {
                    let mut eq: LinExpr = l.iter().enumerate().map(|(r, &v)| (v, c[(r, k)])).filter(|e| e.1 != 0.0).collect();
                    eq.push((u[k], -1.0));
                    lp.add_constraint(eq, ConstraintSense::Eq, piece.a[k]);
                }
                let ue: Vec<LinExpr> = u.iter().map(|&v| vec![(v, 1.0)]).collect();
                add_norm_le(&mut lp, &dual, &ue, &vec![(gamma, 1.0)], 0.0)?;
            }
        }
    }
    let sol = lp.solve();
    if sol.status != LpStatus::Optimal {
        return Err(WcError::Lp(sol.status));
    }
    let gap = sol.objective - lp.dual_objective(&sol.row_duals, 1e-7);
    Ok(WcRiskResult { value: sol.objective, method: WcMethod::LinearProgram, gamma: Some(sol.x[gamma]), lp_gap: Some(gap) })
}

/// Largest risk over distributions that move each atom `x_i` to a single
/// point `x_i + t_i` with `sum_i w_i ||t_i||^p <= radius^p`.
///
/// A feasible point is a lower bound, so several budget allocations are
/// tried and the best kept: uniform radius, all budget on one atom, and
/// for `1 < p < inf` on the whole space the allocation from a Lagrangian
/// split of the budget.
pub fn robust_lower_bound(loss: &PiecewiseAffineLoss, samples: &DiscreteDistribution, ball: &BallSpec) -> Result<f64> {
    check_inputs(loss.dim(), samples, ball)?;
    let eps = ball.radius;
    if ball.p.is_infinite() || eps == 0.0 {
        return per_sample_worst(loss, samples, ball, eps);
    }
    let p = ball.p;
    let w = samples.weights();
    let base: Vec<f64> = samples.atoms().iter().map(|x| loss.eval(x)).collect();
    let nominal: f64 = w.iter().zip(&base).map(|(a, b)| a * b).sum();

    let mut best = per_sample_worst(loss, samples, ball, eps)?;
    for (i, x) in samples.atoms().iter().enumerate() {
        if w[i] == 0.0 {
            continue;
        }
        let r = eps / w[i].powf(1.0 / p);
        let gain = sample_gain(loss, x, ball, r)?;
        best = best.max(nominal + w[i] * (gain - base[i]));
    }

    if p > 1.0 && matches!(ball.support, SetSpec::Whole) {
        let dual = ball.norm.dual();
        let slopes: Vec<f64> = loss.pieces.iter().map(|pc| dual.eval_vec(&pc.a)).collect();
        let offsets: Vec<Vec<f64>> = samples.atoms().iter().map(|x| loss.pieces.iter().map(|pc| pc.eval(x)).collect()).collect();
        // per-sample maximizer of max_j (c_ij + k_j r) - mu r^p
        let alloc = |mu: f64| -> Vec<(f64, f64)> {
            offsets
                .iter()
                .map(|row| {
                    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
                    for (c, &k) in row.iter().zip(&slopes) {
                        let r = if k > 0.0 { (k / (mu * p)).powf(1.0 / (p - 1.0)) } else { 0.0 };
                        let obj = c + k * r - mu * r.powf(p);
                        if obj > best.0 {
                            best = (obj, r, c + k * r);
                        }
                    }
                    (best.1, best.2)
                })
                .collect()
        };
        let budget = |mu: f64| -> f64 { alloc(mu).iter().zip(w).map(|((r, _), wi)| wi * r.powf(p)).sum::<f64>() - eps.powf(p) };
        if let Ok(mu) = bisect_root(|t| budget(t.exp()), -30.0, 30.0, Tolerance::new(0.0, 1e-12, 500)) {
            let mut mu = mu.exp();
            while budget(mu) > 0.0 {
                mu *= 1.0 + 1e-12;
            }
            let val: f64 = alloc(mu).iter().zip(w).map(|((_, v), wi)| wi * v).sum();
            best = best.max(val);
        }
    }
    Ok(best)
}

/// Worst-case distribution for a piecewise affine loss under a type-1 ball.
///
/// Solves the primal linear program over mass splits `alpha_ij` and
/// displacements `theta_ij`. Pairs with positive mass become atoms at
/// `x_i + theta_ij / alpha_ij`; pairs with zero mass but nonzero
/// displacement are directions of recession, and then the supremum is only
/// approached by sending mass `1/n` out to `x_i + n theta_ij`.
pub fn extremal_pwa(
    loss: &PiecewiseAffineLoss,
    samples: &DiscreteDistribution,
    ball: &BallSpec,
) -> Result<(f64, ExtremalReport)> {
    check_inputs(loss.dim(), samples, ball)?;
    if ball.p != 1.0 {
        return Err(WcError::Unsupported("extremal distributions are computed for type-1 balls".into()));
    }
    let eps = ball.radius;
    if loss.pieces.len() == 1 && matches!(ball.support, SetSpec::Whole) {
        // shift every atom by eps along the direction that attains ||a||_*
        let a = &loss.pieces[0].a;
        let dir = Vector::from_vec(ball.norm.unit_argmax(a.as_slice())) * eps;
        let atoms: Vec<Vector> = samples.atoms().iter().map(|x| x + &dir).collect();
        let dist = DiscreteDistribution::new(atoms, samples.weights().to_vec())?;
        return Ok((loss.expected(&dist), ExtremalReport::Attained { distribution: dist }));
    }
    let m = loss.dim();
    let whole = matches!(ball.support, SetSpec::Whole);
    if !whole && !ball.norm.is_polyhedral() {
        return Err(WcError::Unsupported("the linear program needs a polyhedral norm".into()));
    }
    let (c, d) = ball.support.as_polyhedron(m).ok_or_else(|| WcError::Unsupported("support".into()))?;
    let jn = loss.pieces.len();
    // on the whole space only a_j^T theta and ||theta|| matter, so each
    // displacement can be taken along the unit vector attaining ||a_j||_*
    let steer: Vec<Vector> = loss.pieces.iter().map(|p| Vector::from_vec(ball.norm.unit_argmax(p.a.as_slice()))).collect();

    let mut lp = LinearProgram::new();
    let mut alpha = Vec::new();
    let mut theta: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut budget: LinExpr = Vec::new();
    for (i, x) in samples.atoms().iter().enumerate() {
        let wi = samples.weights()[i];
        let mut simplex: LinExpr = Vec::new();
        for (j, piece) in loss.pieces.iter().enumerate() {
            let al = lp.add_nonneg_var(-wi * piece.eval(x));
            simplex.push((al, 1.0));
            alpha.push(al);
            if whole {
                let gain = piece.a.dot(&steer[j]);
                let tau = lp.add_nonneg_var(-wi * gain);
                budget.push((tau, wi));
                theta.push(steer[j].iter().map(|&v| (tau, v)).collect());
                continue;
            }
            let th: Vec<usize> = (0..m).map(|k| lp.add_free_var(-wi * piece.a[k])).collect();
            // C theta + alpha (C x - d) <= 0
            let cx = &c * x - &d;
            for r in 0..c.nrows() {
                let mut row: LinExpr = (0..m).map(|k| (th[k], c[(r, k)])).filter(|e| e.1 != 0.0).collect();
                row.push((al, cx[r]));
                lp.add_constraint(row, ConstraintSense::Le, 0.0);
            }
            let t = lp.add_nonneg_var(0.0);
            let te: Vec<LinExpr> = th.iter().map(|&v| vec![(v, 1.0)]).collect();
            add_norm_le(&mut lp, &ball.norm, &te, &vec![(t, 1.0)], 0.0)?;
            budget.push((t, wi));
            theta.push(th.iter().map(|&v| (v, 1.0)).collect());
        }
        lp.add_constraint(simplex, ConstraintSense::Eq, 1.0);
    }
    lp.add_constraint(budget, ConstraintSense::Le, eps);
    let sol = lp.solve();
    if sol.status != LpStatus::Optimal {
        return Err(WcError::Lp(sol.status));
    }
    let value = -sol.objective;

    let tiny = 1e-9;
    let mut base = Vec::new();
    let mut escaping = Vec::new();
    for (i, x) in samples.atoms().iter().enumerate() {
        let wi = samples.weights()[i];
        let mut positive = Vec::new();
        let mut esc = Vec::new();
        for j in 0..jn {
            let k = i * jn + j;
            let a = sol.x[alpha[k]];
            let th = Vector::from_iterator(m, theta[k].iter().map(|&(v, scale)| sol.x[v] * scale));
            if a > tiny {
                positive.push((a, th));
            } else if th.amax() > tiny * (1.0 + x.amax()) {
                esc.push(th);
            }
        }
        let total: f64 = positive.iter().map(|(a, _)| a).sum();
        let shrink = esc.len() as f64;
        for (a, th) in positive {
            base.push(BaseAtom { location: x + th / a, weight: wi * a / total, shrink });
        }
        for th in esc {
            escaping.push(EscapingAtom { origin: x.clone(), direction: th, rate: 1.0, mass: wi });
        }
    }
    if escaping.is_empty() {
        let atoms = base.iter().map(|b| b.location.clone()).collect();
        let weights = base.iter().map(|b| b.weight).collect();
        let dist = DiscreteDistribution::normalized(atoms, weights)?.merged(1e-12);
        return Ok((value, ExtremalReport::Attained { distribution: dist }));
    }
    Ok((value, ExtremalReport::Asymptotic { family: AsymptoticFamily { base, escaping } }))
}

/// Scalar dual of the quadratic worst case in the eigenbasis of `Q`.
struct QuadraticDual {
    lambda: Vec<f64>,
    vectors: Mat,
    /// `V^T (Q x_i + q)` per sample
    grad: Vec<Vector>,
    weights: Vec<f64>,
    nominal: f64,
    lower: f64,
    /// eigen-directions pinned at the lower end of the multiplier range
    pinned: Vec<bool>,
    blows_up: bool,
}

impl QuadraticDual {
    fn new(loss: &QuadraticLoss, samples: &DiscreteDistribution) -> Result<Self> {
        let eig = sym_eig(&loss.q_mat)?;
        let lambda: Vec<f64> = eig.values.iter().copied().collect();
        let lmax = lambda[0];
        let lower = lmax.max(0.0);
        let lscale = lambda.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let pinned: Vec<bool> = lambda.iter().map(|&l| lmax >= 0.0 && l >= lower - 1e-13 * lscale).collect();
        let vt = eig.vectors.transpose();
        let grad: Vec<Vector> = samples.atoms().iter().map(|x| &vt * (&loss.q_mat * x + &loss.q)).collect();
        let gscale = grad.iter().fold(1.0f64, |a, g| a.max(g.amax()));
        let blows_up = grad.iter().any(|g| g.iter().zip(&pinned).any(|(v, &p)| p && v.abs() > 1e-13 * gscale));
        Ok(Self {
            lambda,
            vectors: eig.vectors,
            grad,
            weights: samples.weights().to_vec(),
            nominal: loss.expected(samples),
            lower,
            pinned,
            blows_up,
        })
    }

    fn terms(&self, gamma: f64) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.grad.iter().enumerate().flat_map(move |(i, g)| {
            g.iter().enumerate().filter_map(move |(k, &v)| {
                if v == 0.0 || (self.pinned[k] && gamma <= self.lower && !self.blows_up) {
                    None
                } else {
                    Some((i, k, v))
                }
            })
        })
    }

    /// Mean squared displacement `sum_i w_i ||theta_i(gamma)||^2`.
    fn spent(&self, gamma: f64) -> f64 {
        self.terms(gamma).map(|(i, k, v)| self.weights[i] * (v / (gamma - self.lambda[k])).powi(2)).sum()
    }

    fn objective(&self, gamma: f64, eps2: f64) -> f64 {
        let extra: f64 = self.terms(gamma).map(|(i, k, v)| self.weights[i] * v * v / (gamma - self.lambda[k])).sum();
        gamma * eps2 + self.nominal + extra
    }

    fn displacement(&self, i: usize, gamma: f64) -> Vector {
        let n = self.lambda.len();
        let mut coords = Vector::zeros(n);
        for (ii, k, v) in self.terms(gamma) {
            if ii == i {
                coords[k] = v / (gamma - self.lambda[k]);
            }
        }
        &self.vectors * coords
    }

    /// Optimal multiplier; `true` when it sits at the lower end.
    fn solve(&self, eps2: f64) -> Result<(f64, bool)> {
        if !self.blows_up && self.spent(self.lower) <= eps2 {
            return Ok((self.lower, true));
        }
        let lo = self.lower;
        let f = |t: f64| if t <= 0.0 { f64::NEG_INFINITY } else { eps2 - self.spent(lo + t) };
        let t = bisect_root(f, 0.0, 1.0 + lo.abs(), Tolerance::new(0.0, 0.0, 5_000))?;
        Ok((lo + t, false))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadraticWcResult {
    pub value: f64,
    pub gamma: f64,
    /// Budget left for the escaping direction.
    pub alpha: f64,
    pub boundary: bool,
}

fn check_quadratic(loss: &QuadraticLoss, samples: &DiscreteDistribution, ball: &BallSpec) -> Result<()> {
    check_inputs(loss.dim(), samples, ball)?;
    if ball.p != 2.0 || ball.norm != NormSpec::l2() || ball.support != SetSpec::Whole {
        return Err(WcError::Unsupported("quadratic losses need a type-2 Euclidean ball on the whole space".into()));
    }
    Ok(())
}

/// Worst-case risk of `x^T Q x + 2 q^T x` over a type-2 Euclidean ball.
///
/// Minimizes `g eps^2 + sum_i w_i sup_x [l(x) - g ||x - x_i||^2]` over
/// `g >= max(0, lambda_max(Q))` by bisection on the derivative.
pub fn wc_risk_quadratic(loss: &QuadraticLoss, samples: &DiscreteDistribution, ball: &BallSpec) -> Result<QuadraticWcResult> {
    check_quadratic(loss, samples, ball)?;
    let qd = QuadraticDual::new(loss, samples)?;
    let eps2 = ball.radius * ball.radius;
    if eps2 == 0.0 {
        return Ok(QuadraticWcResult { value: qd.nominal, gamma: f64::INFINITY, alpha: 0.0, boundary: false });
    }
    let (gamma, boundary) = qd.solve(eps2)?;
    let alpha = if boundary { (eps2 - qd.spent(gamma)).max(0.0) } else { 0.0 };
    Ok(QuadraticWcResult { value: qd.objective(gamma, eps2), gamma, alpha, boundary })
}

/// Worst-case distribution for the quadratic loss.
///
/// Each atom moves to the maximizer of `l(x) - g* ||x - x_i||^2`. When the
/// multiplier sits at `lambda_max(Q) > 0` with budget left over, a mass of
/// `w/n` from the first atom escapes along the top eigenvector at distance
/// `sqrt(n alpha / w)`.
pub fn extremal_quadratic(
    loss: &QuadraticLoss,
    samples: &DiscreteDistribution,
    ball: &BallSpec,
) -> Result<(f64, ExtremalReport)> {
    let res = wc_risk_quadratic(loss, samples, ball)?;
    if res.gamma.is_infinite() {
        return Ok((res.value, ExtremalReport::Attained { distribution: samples.clone() }));
    }
    let qd = QuadraticDual::new(loss, samples)?;
    let moved: Vec<Vector> = samples.atoms().iter().enumerate().map(|(i, x)| x + qd.displacement(i, res.gamma)).collect();
    let lmax = qd.lambda[0];
    let eps2 = ball.radius * ball.radius;
    if res.boundary && lmax > 0.0 && res.alpha > 1e-12 * eps2 {
        let w0 = samples.weights()[0];
        let v = qd.vectors.column(0).clone_owned();
        let mut base = Vec::new();
        for (i, x) in moved.iter().enumerate() {
            base.push(BaseAtom { location: x.clone(), weight: samples.weights()[i], shrink: if i == 0 { 1.0 } else { 0.0 } });
        }
        let escaping = vec![EscapingAtom {
            origin: samples.atoms()[0].clone(),
            direction: v * (res.alpha / w0).sqrt(),
            rate: 0.5,
            mass: w0,
        }];
        return Ok((res.value, ExtremalReport::Asymptotic { family: AsymptoticFamily { base, escaping } }));
    }
    let dist = DiscreteDistribution::new(moved, samples.weights().to_vec())?;
    Ok((res.value, ExtremalReport::Attained { distribution: dist }))
}
