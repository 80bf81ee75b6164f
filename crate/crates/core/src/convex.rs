//! Dual norms, convex conjugates and support functions.

use crate::numerics::{sym_eig, ConstraintSense, LinearProgram, LpStatus};
use crate::{Mat, Vector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConvexError {
    #[error("invalid norm: {0}")]
    InvalidNorm(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("norm is not polyhedral and cannot be written as linear constraints")]
    NotPolyhedral,
    #[error("set is empty")]
    EmptySet,
    #[error("weight matrix is singular")]
    Singular,
    #[error("set combination not supported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, ConvexError>;

fn conjugate_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

fn lp_norm(x: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        x.iter().map(|v| v.abs()).sum()
    } else if p.is_infinite() {
        x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    } else if p == 2.0 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    } else {
        let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        scale * x.iter().map(|v| (v.abs() / scale).powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// `argmax { a^T u : ||u||_p <= 1 }`
fn lp_unit_argmax(a: &[f64], p: f64) -> Vec<f64> {
    let n = a.len();
    if p == 1.0 {
        let mut u = vec![0.0; n];
        if let Some(k) = (0..n).fold(None, |best: Option<usize>, k| match best {
            Some(b) if a[b].abs() >= a[k].abs() => Some(b),
            _ => Some(k),
        }) {
            u[k] = if a[k] < 0.0 { -1.0 } else { 1.0 };
        }
        u
    } else if p.is_infinite() {
        a.iter().map(|&v| if v > 0.0 { 1.0 } else { -1.0 }).collect()
    } else {
        let q = conjugate_exponent(p);
        let nq = lp_norm(a, q);
        if nq == 0.0 {
            return vec![0.0; n];
        }
        a.iter().map(|&v| v.signum() * (v.abs() / nq).powf(q - 1.0)).collect()
    }
}

/// Norm on `R^m`.
///
/// `Scaled` admits `alpha = +inf` (perturbations of those coordinates are
/// forbidden) and its dual `alpha = 0` (those coordinates cost nothing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormSpec {
    /// `||x||_p`, `p` in `[1, inf]`
    P { p: f64 },
    /// `alpha ||x||_p`
    Scaled { alpha: f64, p: f64 },
    /// `||A x||_p` with `A` invertible
    Weighted { matrix: Mat, p: f64 },
    /// `sum_k ||x_k||_k` over consecutive blocks
    Separable { blocks: Vec<(NormSpec, usize)> },
    /// `max_k ||x_k||_k` over consecutive blocks
    BlockMax { blocks: Vec<(NormSpec, usize)> },
}

impl NormSpec {
    pub fn l1() -> Self {
        NormSpec::P { p: 1.0 }
    }

    pub fn l2() -> Self {
        NormSpec::P { p: 2.0 }
    }

    pub fn linf() -> Self {
        NormSpec::P { p: f64::INFINITY }
    }

    /// Checks parameters and, when given, the dimension.
    pub fn validate(&self, dim: Option<usize>) -> Result<()> {
        let check_p = |p: f64| {
            if p >= 1.0 {
                Ok(())
            } else {
                Err(ConvexError::InvalidNorm(format!("p = {p} must be >= 1")))
            }
        };
        match self {
            NormSpec::P { p } => check_p(*p),
            NormSpec::Scaled { alpha, p } => {
                if !(*alpha >= 0.0) {
                    return Err(ConvexError::InvalidNorm(format!("scale {alpha} must be nonnegative")));
                }
                check_p(*p)
            }
            NormSpec::Weighted { matrix, p } => {
                check_p(*p)?;
                if !matrix.is_square() {
                    return Err(ConvexError::InvalidNorm("weight matrix must be square".into()));
                }
                if let Some(d) = dim {
                    if matrix.nrows() != d {
                        return Err(ConvexError::DimensionMismatch { expected: d, found: matrix.nrows() });
                    }
                }
                if matrix.clone().lu().determinant().abs() < 1e-300 {
                    return Err(ConvexError::Singular);
                }
                Ok(())
            }
            NormSpec::Separable { blocks } | NormSpec::BlockMax { blocks } => {
                for (n, size) in blocks {
                    n.validate(Some(*size))?;
                }
                if let Some(d) = dim {
                    let total: usize = blocks.iter().map(|b| b.1).sum();
                    if total != d {
                        return Err(ConvexError::DimensionMismatch { expected: d, found: total });
                    }
                }
                Ok(())
            }
        }
    }

    /// Fixed dimension, if the norm carries one.
    pub fn fixed_dim(&self) -> Option<usize> {
        match self {
            NormSpec::Weighted { matrix, .. } => Some(matrix.nrows()),
            NormSpec::Separable { blocks } | NormSpec::BlockMax { blocks } => Some(blocks.iter().map(|b| b.1).sum()),
            _ => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            NormSpec::P { p } => lp_norm(x, *p),
            NormSpec::Scaled { alpha, p } => {
                let n = lp_norm(x, *p);
                if n == 0.0 {
                    0.0
                } else {
                    alpha * n
                }
            }
            NormSpec::Weighted { matrix, p } => {
                let y = matrix * Vector::from_column_slice(x);
                lp_norm(y.as_slice(), *p)
            }
            NormSpec::Separable { blocks } => {
                let mut off = 0;
                blocks
                    .iter()
                    .map(|(n, s)| {
                        let v = n.eval(&x[off..off + s]);
                        off += s;
                        v
                    })
                    .sum()
            }
            NormSpec::BlockMax { blocks } => {
                let mut off = 0;
                blocks.iter().fold(0.0f64, |m, (n, s)| {
                    let v = n.eval(&x[off..off + s]);
                    off += s;
                    m.max(v)
                })
            }
        }
    }

    pub fn eval_vec(&self, x: &Vector) -> f64 {
        self.eval(x.as_slice())
    }

    /// The dual norm `sup { z^T x : ||x|| <= 1 }` as another `NormSpec`.
    pub fn dual(&self) -> NormSpec {
        match self {
            NormSpec::P { p } => NormSpec::P { p: conjugate_exponent(*p) },
            NormSpec::Scaled { alpha, p } => {
                let inv = if *alpha == 0.0 {
                    f64::INFINITY
                } else if alpha.is_infinite() {
                    0.0
                } else {
                    1.0 / alpha
                };
                NormSpec::Scaled { alpha: inv, p: conjugate_exponent(*p) }
            }
            NormSpec::Weighted { matrix, p } => NormSpec::Weighted {
                matrix: matrix.clone().try_inverse().expect("weight matrix validated as invertible").transpose(),
                p: conjugate_exponent(*p),
            },
            NormSpec::Separable { blocks } => NormSpec::BlockMax { blocks: blocks.iter().map(|(n, s)| (n.dual(), *s)).collect() },
            NormSpec::BlockMax { blocks } => NormSpec::Separable { blocks: blocks.iter().map(|(n, s)| (n.dual(), *s)).collect() },
        }
    }

    /// `argmax { z^T x : ||x|| <= 1 }`. Ties go to the first coordinate or
    /// block; zero components of an infinity-norm argument map to `-1`.
    pub fn unit_argmax(&self, z: &[f64]) -> Vec<f64> {
        match self {
            NormSpec::P { p } => lp_unit_argmax(z, *p),
            NormSpec::Scaled { alpha, p } => {
                if alpha.is_infinite() {
                    vec![0.0; z.len()]
                } else {
                    lp_unit_argmax(z, *p).into_iter().map(|u| u / alpha).collect()
                }
            }
            NormSpec::Weighted { matrix, p } => {
                let inv = matrix.clone().try_inverse().expect("weight matrix validated as invertible");
                let w = inv.transpose() * Vector::from_column_slice(z);
                let u = Vector::from_vec(lp_unit_argmax(w.as_slice(), *p));
                (inv * u).as_slice().to_vec()
            }
            NormSpec::Separable { blocks } => {
                let mut out = vec![0.0; z.len()];
                let mut best: Option<(usize, f64)> = None;
                let mut off = 0;
                for (n, s) in blocks {
                    let v = n.dual().eval(&z[off..off + s]);
                    if best.is_none_or(|(_, b)| v > b) {
                        best = Some((off, v));
                    }
                    off += s;
                }
                if let Some((start, _)) = best {
                    let mut o = 0;
                    for (n, s) in blocks {
                        if o == start {
                            out[o..o + s].copy_from_slice(&n.unit_argmax(&z[o..o + s]));
                            break;
                        }
                        o += s;
                    }
                }
                out
            }
            NormSpec::BlockMax { blocks } => {
                let mut out = Vec::with_capacity(z.len());
                let mut off = 0;
                for (n, s) in blocks {
                    out.extend(n.unit_argmax(&z[off..off + s]));
                    off += s;
                }
                out
            }
        }
    }

    /// True when the unit ball is a polytope (every `p` is 1 or infinity).
    pub fn is_polyhedral(&self) -> bool {
        let poly = |p: f64| p == 1.0 || p.is_infinite();
        match self {
            NormSpec::P { p } | NormSpec::Scaled { p, .. } | NormSpec::Weighted { p, .. } => poly(*p),
            NormSpec::Separable { blocks } | NormSpec::BlockMax { blocks } => blocks.iter().all(|(n, _)| n.is_polyhedral()),
        }
    }
}

/// Dual norm of `z`.
pub fn dual_norm_eval(norm: &NormSpec, z: &[f64]) -> f64 {
    norm.dual().eval(z)
}

/// Sparse linear expression over LP variables.
pub(crate) type LinExpr = Vec<(usize, f64)>;

/// Adds rows enforcing `||x|| <= t + c` where every component of `x` and
/// `t` are linear expressions in LP variables.
pub(crate) fn add_norm_le(lp: &mut LinearProgram, norm: &NormSpec, x: &[LinExpr], t: &LinExpr, c: f64) -> Result<()> {
    use ConstraintSense::*;
    let neg = |e: &LinExpr| -> LinExpr { e.iter().map(|&(j, a)| (j, -a)).collect() };
    let minus = |a: &LinExpr, b: &LinExpr| -> LinExpr { a.iter().copied().chain(neg(b)).collect() };
    match norm {
        NormSpec::P { p } if *p == 1.0 => {
            let mut sum: LinExpr = Vec::new();
            for xk in x {
                let s = lp.add_nonneg_var(0.0);
                lp.add_constraint(minus(xk, &vec![(s, 1.0)]), Le, 0.0);
                lp.add_constraint(minus(&neg(xk), &vec![(s, 1.0)]), Le, 0.0);
                sum.push((s, 1.0));
            }
            lp.add_constraint(minus(&sum, t), Le, c);
            Ok(())
        }
        NormSpec::P { p } if p.is_infinite() => {
            for xk in x {
                lp.add_constraint(minus(xk, t), Le, c);
                lp.add_constraint(minus(&neg(xk), t), Le, c);
            }
            if x.is_empty() {
                lp.add_constraint(neg(t), Le, c);
            }
            Ok(())
        }
        NormSpec::P { .. } => Err(ConvexError::NotPolyhedral),
        NormSpec::Scaled { alpha, p } => {
            if alpha.is_infinite() {
                for xk in x {
                    lp.add_constraint(xk.clone(), Eq, 0.0);
                }
                lp.add_constraint(neg(t), Le, c);
                Ok(())
            } else if *alpha == 0.0 {
                lp.add_constraint(neg(t), Le, c);
                Ok(())
            } else {
                let ts: LinExpr = t.iter().map(|&(j, a)| (j, a / alpha)).collect();
                add_norm_le(lp, &NormSpec::P { p: *p }, x, &ts, c / alpha)
            }
        }
        NormSpec::Weighted { matrix, p } => {
            let y: Vec<LinExpr> = (0..matrix.nrows())
                .map(|r| {
                    x.iter()
                        .enumerate()
                        .flat_map(|(k, xk)| {
                            let w = matrix[(r, k)];
                            xk.iter().map(move |&(j, a)| (j, w * a))
                        })
                        .filter(|&(_, a)| a != 0.0)
                        .collect()
                })
                .collect();
            add_norm_le(lp, &NormSpec::P { p: *p }, &y, t, c)
        }
        NormSpec::Separable { blocks } => {
            let mut sum: LinExpr = Vec::new();
            let mut off = 0;
            for (n, s) in blocks {
                let tb = lp.add_nonneg_var(0.0);
                add_norm_le(lp, n, &x[off..off + s], &vec![(tb, 1.0)], 0.0)?;
                sum.push((tb, 1.0));
                off += s;
            }
            lp.add_constraint(minus(&sum, t), Le, c);
            Ok(())
        }
        NormSpec::BlockMax { blocks } => {
            let mut off = 0;
            for (n, s) in blocks {
                add_norm_le(lp, n, &x[off..off + s], t, c)?;
                off += s;
            }
            Ok(())
        }
    }
}

/// Closed convex function with a known conjugate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConjugableFunction {
    /// `a^T x + b`
    Affine { a: Vector, b: f64 },
    /// `1/2 x^T A x + a^T x + b` with `A` positive semidefinite
    Quadratic { matrix: Mat, a: Vector, b: f64 },
    /// scalar `log(1 + exp(-x))`
    LogLoss,
    /// scalar `exp(x)`
    Exp,
    /// `(1/power) ||x||^power`, `power > 1`
    PowerOfNorm { norm: NormSpec, power: f64 },
    /// `||x||`
    Norm { norm: NormSpec },
}

impl ConjugableFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let xv = Vector::from_column_slice(x);
        match self {
            ConjugableFunction::Affine { a, b } => a.dot(&xv) + b,
            ConjugableFunction::Quadratic { matrix, a, b } => 0.5 * xv.dot(&(matrix * &xv)) + a.dot(&xv) + b,
            ConjugableFunction::LogLoss => {
                let t = -x[0];
                if t > 0.0 {
                    t + (-t).exp().ln_1p()
                } else {
                    t.exp().ln_1p()
                }
            }
            ConjugableFunction::Exp => x[0].exp(),
            ConjugableFunction::PowerOfNorm { norm, power } => norm.eval(x).powf(*power) / power,
            ConjugableFunction::Norm { norm } => norm.eval(x),
        }
    }
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `f*(z) = sup_x z^T x - f(x)`, `+inf` outside the conjugate's domain.
pub fn conjugate_eval(f: &ConjugableFunction, z: &[f64]) -> Result<f64> {
    let zv = Vector::from_column_slice(z);
    let inf = f64::INFINITY;
    Ok(match f {
        ConjugableFunction::Affine { a, b } => {
            check_dim(a.len(), z.len())?;
            let scale = 1.0 + a.amax();
            if (&zv - a).amax() <= 1e-12 * scale {
                -b
            } else {
                inf
            }
        }
        ConjugableFunction::Quadratic { matrix, a, b } => {
            check_dim(a.len(), z.len())?;
            let eig = sym_eig(matrix).map_err(|e| ConvexError::InvalidNorm(e.to_string()))?;
            let lmax = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let cut = 1e-12 * lmax.max(1e-300);
            let r = &zv - a;
            let coords = eig.vectors.transpose() * &r;
            let rscale = 1.0 + r.amax();
            let mut val = -b;
            for k in 0..coords.len() {
                let lam = eig.values[k];
                if lam > cut {
                    val += 0.5 * coords[k] * coords[k] / lam;
                } else if coords[k].abs() > 1e-9 * rscale {
                    return Ok(inf);
                }
            }
            val
        }
        ConjugableFunction::LogLoss => {
            check_dim(1, z.len())?;
            let s = z[0];
            if (-1.0..=0.0).contains(&s) {
                xlogx(-s) + xlogx(1.0 + s)
            } else {
                inf
            }
        }
        ConjugableFunction::Exp => {
            check_dim(1, z.len())?;
            let s = z[0];
            if s < 0.0 {
                inf
            } else {
                xlogx(s) - s
            }
        }
        ConjugableFunction::PowerOfNorm { norm, power } => {
            if !(*power > 1.0) {
                return Err(ConvexError::InvalidNorm(format!("power {power} must exceed 1")));
            }
            let q = power / (power - 1.0);
            dual_norm_eval(norm, z).powf(q) / q
        }
        ConjugableFunction::Norm { norm } => {
            if dual_norm_eval(norm, z) <= 1.0 + 1e-12 {
                0.0
            } else {
                inf
            }
        }
    })
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(ConvexError::DimensionMismatch { expected, found })
    }
}

/// Closed convex set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetSpec {
    Whole,
    /// `{ x : ||x - center|| <= radius }`
    Ball {
        norm: NormSpec,
        center: Vector,
        radius: f64,
    },
    /// `{ x : C x <= d }`
    Polyhedron {
        c: Mat,
        d: Vector,
    },
    Intersection {
        sets: Vec<SetSpec>,
    },
}

impl SetSpec {
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        let xv = Vector::from_column_slice(x);
        match self {
            SetSpec::Whole => true,
            SetSpec::Ball { norm, center, radius } => norm.eval_vec(&(&xv - center)) <= radius + tol,
            SetSpec::Polyhedron { c, d } => (c * &xv - d).iter().all(|&v| v <= tol),
            SetSpec::Intersection { sets } => sets.iter().all(|s| s.contains(x, tol)),
        }
    }

    /// Polyhedral data `(C, d)` when the set is the whole space or a polyhedron.
    pub fn as_polyhedron(&self, dim: usize) -> Option<(Mat, Vector)> {
        match self {
            SetSpec::Whole => Some((Mat::zeros(0, dim), Vector::zeros(0))),
            SetSpec::Polyhedron { c, d } => Some((c.clone(), d.clone())),
            _ => None,
        }
    }
}

/// `sigma_S(z) = sup { z^T x : x in S }`, `+inf` when unbounded.
pub fn support_function_eval(set: &SetSpec, z: &[f64]) -> Result<f64> {
    match set {
        SetSpec::Whole => Ok(if z.iter().all(|&v| v == 0.0) { 0.0 } else { f64::INFINITY }),
        SetSpec::Ball { norm, center, radius } => {
            check_dim(center.len(), z.len())?;
            let lin: f64 = center.iter().zip(z).map(|(a, b)| a * b).sum();
            Ok(lin + radius * dual_norm_eval(norm, z))
        }
        SetSpec::Polyhedron { c, d } => {
            check_dim(c.ncols(), z.len())?;
            // min d^T l  s.t.  C^T l = z, l >= 0
            let mut lp = LinearProgram::new();
            let l: Vec<usize> = (0..c.nrows()).map(|i| lp.add_nonneg_var(d[i])).collect();
            for k in 0..c.ncols() {
                let row: LinExpr = l.iter().enumerate().map(|(i, &v)| (v, c[(i, k)])).filter(|e| e.1 != 0.0).collect();
                lp.add_constraint(row, ConstraintSense::Eq, z[k]);
            }
            let sol = lp.solve();
            match sol.status {
                LpStatus::Optimal => Ok(sol.objective),
                LpStatus::Infeasible => Ok(f64::INFINITY),
                LpStatus::Unbounded => Err(ConvexError::EmptySet),
            }
        }
        SetSpec::Intersection { sets } => intersection_support(sets, z),
    }
}

fn flatten<'a>(sets: &'a [SetSpec], out: &mut Vec<&'a SetSpec>) {
    for s in sets {
        match s {
            SetSpec::Intersection { sets } => flatten(sets, out),
            SetSpec::Whole => {}
            other => out.push(other),
        }
    }
}

fn intersection_support(sets: &[SetSpec], z: &[f64]) -> Result<f64> {
    let mut members = Vec::new();
    flatten(sets, &mut members);
    let m = z.len();
    let mut lp = LinearProgram::new();
    let x: Vec<usize> = (0..m).map(|k| lp.add_free_var(-z[k])).collect();
    for s in members {
        match s {
            SetSpec::Polyhedron { c, d } => {
                check_dim(c.ncols(), m)?;
                for i in 0..c.nrows() {
                    let row: LinExpr = x.iter().enumerate().map(|(k, &j)| (j, c[(i, k)])).filter(|e| e.1 != 0.0).collect();
                    lp.add_constraint(row, ConstraintSense::Le, d[i]);
                }
            }
            SetSpec::Ball { norm, center, radius } => {
                check_dim(center.len(), m)?;
                if !norm.is_polyhedral() {
                    return Err(ConvexError::Unsupported("intersection with a non-polyhedral ball".into()));
                }
                // ||x - center|| <= radius, with x - center as new free variables
                let y: Vec<usize> = (0..m).map(|_| lp.add_free_var(0.0)).collect();
                for k in 0..m {
                    lp.add_constraint(vec![(y[k], 1.0), (x[k], -1.0)], ConstraintSense::Eq, -center[k]);
                }
                let ye: Vec<LinExpr> = y.iter().map(|&j| vec![(j, 1.0)]).collect();
                add_norm_le(&mut lp, norm, &ye, &Vec::new(), *radius)?;
            }
            _ => unreachable!(),
        }
    }
    let sol = lp.solve();
    match sol.status {
        LpStatus::Optimal => Ok(-sol.objective),
        LpStatus::Unbounded => Ok(f64::INFINITY),
        LpStatus::Infeasible => Err(ConvexError::EmptySet),
    }
}
