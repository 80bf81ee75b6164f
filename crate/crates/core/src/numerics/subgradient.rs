use super::lp::{ConstraintSense, LinearProgram, LpStatus};
use super::{NumericsError, Result, Tolerance};

/// Options for [`subgradient_minimize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubgradientOptions {
    pub tol: Tolerance,
    /// Step length at iteration k is `step_scale / sqrt(k)`.
    pub step_scale: f64,
    /// Number of plain subgradient steps before the cutting-plane phase.
    pub warmup: usize,
    /// Search is restricted to the box `|x_i| <= box_radius`; the lower
    /// bound is certified over that box.
    pub box_radius: f64,
    /// Cap on the number of retained cuts.
    pub max_cuts: usize,
}

impl Default for SubgradientOptions {
    fn default() -> Self {
        Self { tol: Tolerance::new(1e-9, 1e-9, 2_000), step_scale: 1.0, warmup: 50, box_radius: 1e4, max_cuts: 400 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// Certified lower bound on the infimum over the search box.
    pub lower_bound: f64,
    pub iterations: usize,
}

impl SubgradientResult {
    pub fn gap(&self) -> f64 {
        self.value - self.lower_bound
    }
}

struct Cut {
    g: Vec<f64>,
    /// `f(x_k) - g^T x_k`
    offset: f64,
}

/// Minimizes a convex function given by a value/subgradient oracle.
///
/// Runs `warmup` normalized subgradient steps of length `c / sqrt(k)`,
/// tracking the best iterate, then switches to Kelley's cutting-plane
/// method over the search box. Every oracle call adds a cut, and the LP
/// over the cuts yields the lower bound used as the stopping certificate.
pub fn subgradient_minimize<F>(mut oracle: F, x0: &[f64], opts: SubgradientOptions) -> Result<SubgradientResult>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let r = opts.box_radius;
    let clip = |x: &mut [f64]| {
        for v in x.iter_mut() {
            *v = v.clamp(-r, r);
        }
    };
    let mut cuts: Vec<Cut> = Vec::new();
    let mut best_x = x0.to_vec();
    clip(&mut best_x);
    let mut best_val = f64::INFINITY;
    let mut calls = 0usize;

    let mut record = |x: &[f64], cuts: &mut Vec<Cut>, best_x: &mut Vec<f64>, best_val: &mut f64| -> Result<Vec<f64>> {
        let (v, g) = oracle(x);
        if !v.is_finite() || g.len() != n || g.iter().any(|c| !c.is_finite()) {
            return Err(NumericsError::NonFinite { x: x.first().copied().unwrap_or(f64::NAN) });
        }
        if v < *best_val {
            *best_val = v;
            *best_x = x.to_vec();
        }
        let offset = v - g.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        cuts.push(Cut { g: g.clone(), offset });
        Ok(g)
    };

    let mut x = best_x.clone();
    for k in 1..=opts.warmup {
        let g = record(&x, &mut cuts, &mut best_x, &mut best_val)?;
        calls += 1;
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gn == 0.0 {
            return Ok(SubgradientResult { x: x.clone(), value: best_val, lower_bound: best_val, iterations: calls });
        }
        let step = opts.step_scale / (k as f64).sqrt();
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= step * gi / gn;
        }
        clip(&mut x);
    }
    if cuts.is_empty() {
        let g = record(&x, &mut cuts, &mut best_x, &mut best_val)?;
        calls += 1;
        if g.iter().all(|&v| v == 0.0) {
            return Ok(SubgradientResult { x, value: best_val, lower_bound: best_val, iterations: calls });
        }
    }

    let mut lower = f64::NEG_INFINITY;
    for _ in 0..opts.tol.max_iter {
        if cuts.len() > opts.max_cuts {
            // keep the cuts that are tightest at the current best point
            let bx = best_x.clone();
            let model = |c: &Cut| c.offset + c.g.iter().zip(&bx).map(|(a, b)| a * b).sum::<f64>();
            cuts.sort_by(|a, b| model(b).partial_cmp(&model(a)).unwrap());
            cuts.truncate(opts.max_cuts / 2);
        }
        let mut lp = LinearProgram::new();
        let xs: Vec<usize> = (0..n).map(|_| lp.add_var(-r, r, 0.0)).collect();
        let t = lp.add_free_var(1.0);
        for c in &cuts {
            let mut row: Vec<(usize, f64)> = xs.iter().zip(&c.g).map(|(&j, &g)| (j, g)).collect();
            row.push((t, -1.0));
            lp.add_constraint(row, ConstraintSense::Le, -c.offset);
        }
        let sol = lp.solve();
        if sol.status != LpStatus::Optimal {
            break;
        }
        lower = lower.max(sol.objective);
        let gap = best_val - lower;
        if gap <= opts.tol.abs_tol + opts.tol.rel_tol * best_val.abs() {
            return Ok(SubgradientResult { x: best_x, value: best_val, lower_bound: lower, iterations: calls });
        }
        let cand: Vec<f64> = sol.x[..n].to_vec();
        record(&cand, &mut cuts, &mut best_x, &mut best_val)?;
        calls += 1;
    }
    Err(NumericsError::MaxIterExceeded { best_x, best_value: best_val, gap: best_val - lower })
}
