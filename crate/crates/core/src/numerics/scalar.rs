use super::{NumericsError, Result, Tolerance};

const MAX_EXPANSION: f64 = 1_152_921_504_606_846_976.0; // 2^60

/// Endpoint of a scalar search interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Closed(f64),
    Open(f64),
    Unbounded,
}

impl Bound {
    fn value(&self) -> Option<f64> {
        match *self {
            Bound::Closed(v) | Bound::Open(v) => Some(v),
            Bound::Unbounded => None,
        }
    }
}

/// Search domain for [`minimize_scalar_convex`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: Bound,
    pub hi: Bound,
}

impl Interval {
    pub fn new(lo: Bound, hi: Bound) -> Self {
        Self { lo, hi }
    }

    /// `(lo, +inf)`
    pub fn open_above(lo: f64) -> Self {
        Self { lo: Bound::Open(lo), hi: Bound::Unbounded }
    }

    /// `[lo, +inf)`
    pub fn closed_above(lo: f64) -> Self {
        Self { lo: Bound::Closed(lo), hi: Bound::Unbounded }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMinimum {
    pub argmin: f64,
    pub value: f64,
}

fn same_sign(a: f64, b: f64) -> bool {
    (a > 0.0 && b > 0.0) || (a < 0.0 && b < 0.0)
}

fn finite_or_err(x: f64, fx: f64) -> Result<f64> {
    if fx.is_nan() {
        Err(NumericsError::NonFinite { x })
    } else {
        Ok(fx)
    }
}

/// Root of a continuous scalar function by bisection.
///
/// If `f(lo)` and `f(hi)` share a sign the upper end is pushed out by
/// doubling the bracket width until the sign changes or the width exceeds
/// 2^60. Stops once `|f(x)| <= abs_tol`, the bracket is narrower than
/// `rel_tol * |x|`, or no floating point number lies strictly inside.
pub fn bisect_root<F>(mut f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(lo < hi) {
        return Err(NumericsError::InvalidInterval(format!("[{lo}, {hi}]")));
    }
    let (mut lo, mut hi) = (lo, hi);
    let mut flo = finite_or_err(lo, f(lo))?;
    if flo == 0.0 {
        return Ok(lo);
    }
    let mut fhi = finite_or_err(hi, f(hi))?;
    while same_sign(flo, fhi) {
        let width = hi - lo;
        if 2.0 * width > MAX_EXPANSION {
            return Err(NumericsError::NoBracket { lo, hi });
        }
        hi = lo + 2.0 * width;
        fhi = finite_or_err(hi, f(hi))?;
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    for _ in 0..tol.max_iter {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            return Ok(if flo.abs() <= fhi.abs() { lo } else { hi });
        }
        let fm = finite_or_err(mid, f(mid))?;
        if fm.abs() <= tol.abs_tol || (hi - lo) <= tol.rel_tol * mid.abs() {
            return Ok(mid);
        }
        if same_sign(fm, flo) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    let (x, fx) = if flo.abs() <= fhi.abs() { (lo, flo) } else { (hi, fhi) };
    Err(NumericsError::MaxIterExceeded { best_x: vec![x], best_value: fx, gap: hi - lo })
}

/// Minimizer of a convex scalar function over an interval.
///
/// Unbounded sides are bracketed by doubling steps away from an interior
/// starting point; then golden-section search shrinks the bracket. The
/// returned value is accurate to rounding, the argmin only to roughly the
/// square root of machine precision times its scale, as for any
/// comparison-based method on a smooth function.
pub fn minimize_scalar_convex<G>(mut g: G, domain: Interval, tol: Tolerance) -> Result<ScalarMinimum>
where
    G: FnMut(f64) -> f64,
{
    let lo = domain.lo.value();
    let hi = domain.hi.value();
    if let (Some(a), Some(b)) = (lo, hi) {
        if a > b || (a == b && !(matches!(domain.lo, Bound::Closed(_)) && matches!(domain.hi, Bound::Closed(_)))) {
            return Err(NumericsError::InvalidInterval(format!("{domain:?}")));
        }
        if a == b {
            let v = finite_or_err(a, g(a))?;
            return Ok(ScalarMinimum { argmin: a, value: v });
        }
    }

    let mut best = ScalarMinimum { argmin: f64::NAN, value: f64::INFINITY };
    let mut eval = |x: f64, best: &mut ScalarMinimum| -> Result<f64> {
        let v = finite_or_err(x, g(x))?;
        if v < best.value {
            *best = ScalarMinimum { argmin: x, value: v };
        }
        Ok(v)
    };

    let x0 = match (lo, hi) {
        (Some(a), Some(b)) => 0.5 * (a + b),
        (Some(a), None) => a + a.abs().max(1.0),
        (None, Some(b)) => b - b.abs().max(1.0),
        (None, None) => 0.0,
    };
    let g0 = eval(x0, &mut best)?;

    let upper = match hi {
        Some(b) => b,
        None => {
            let mut step = x0.abs().max(1.0);
            loop {
                if step > MAX_EXPANSION {
                    return Err(NumericsError::Unbounded);
                }
                if eval(x0 + step, &mut best)? >= g0 {
                    break x0 + step;
                }
                step *= 2.0;
            }
        }
    };
    let lower = match lo {
        Some(a) => a,
        None => {
            let mut step = x0.abs().max(1.0);
            loop {
                if step > MAX_EXPANSION {
                    return Err(NumericsError::Unbounded);
                }
                if eval(x0 - step, &mut best)? >= g0 {
                    break x0 - step;
                }
                step *= 2.0;
            }
        }
    };
    if let Bound::Closed(a) = domain.lo {
        eval(a, &mut best)?;
    }
    if let Bound::Closed(b) = domain.hi {
        eval(b, &mut best)?;
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lower, upper);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut gc = eval(c, &mut best)?;
    let mut gd = eval(d, &mut best)?;
    for _ in 0..tol.max_iter {
        let width = b - a;
        let scale = best.argmin.abs().max(c.abs());
        if width <= tol.abs_tol.max(tol.rel_tol * scale) || c >= d {
            return Ok(best);
        }
        if gc <= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = eval(c, &mut best)?;
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = eval(d, &mut best)?;
        }
    }
    Err(NumericsError::MaxIterExceeded { best_x: vec![best.argmin], best_value: best.value, gap: b - a })
}
