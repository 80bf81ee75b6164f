//! Two-phase revised simplex with sparse columns and a dense basis inverse.
//!
//! The basis inverse is kept explicitly and updated by elementary row
//! operations, with a fresh LU refactorization every [`REFACTOR_EVERY`]
//! pivots. Pricing is Dantzig's rule; after a run of degenerate pivots the
//! phase switches to Bland's rule for the rest of its life.

use serde::{Deserialize, Serialize};

const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_STREAK: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintSense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
struct Row {
    coeffs: Vec<(usize, f64)>,
    sense: ConstraintSense,
    rhs: f64,
}

/// `minimize c^T x  s.t.  A x {<=,>=,=} b,  lower <= x <= upper`
///
/// Rows are stored sparsely; only the basis inverse is dense.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per row: `<= 0` on `Le` rows, `>= 0` on `Ge` rows.
    pub row_duals: Vec<f64>,
    /// `c - A^T y`
    pub reduced_costs: Vec<f64>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Adds a variable and returns its index.
    pub fn add_var(&mut self, lower: f64, upper: f64, cost: f64) -> usize {
        assert!(lower <= upper, "empty variable bounds [{lower}, {upper}]");
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.cost.len() - 1
    }

    pub fn add_free_var(&mut self, cost: f64) -> usize {
        self.add_var(f64::NEG_INFINITY, f64::INFINITY, cost)
    }

    pub fn add_nonneg_var(&mut self, cost: f64) -> usize {
        self.add_var(0.0, f64::INFINITY, cost)
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.cost[var] = cost;
    }

    /// Adds a row; repeated indices are summed.
    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, sense: ConstraintSense, rhs: f64) -> usize {
        for &(j, _) in &coeffs {
            assert!(j < self.cost.len(), "constraint references unknown variable {j}");
        }
        self.rows.push(Row { coeffs, sense, rhs });
        self.rows.len() - 1
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    /// Residual `a_i^T x - b_i` of every row.
    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.coeffs.iter().map(|&(j, a)| a * x[j]).sum::<f64>() - r.rhs).collect()
    }

    /// Largest violation of rows and bounds at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (r, act) in self.rows.iter().zip(self.row_activity(x)) {
            let v = match r.sense {
                ConstraintSense::Le => act.max(0.0),
                ConstraintSense::Ge => (-act).max(0.0),
                ConstraintSense::Eq => act.abs(),
            };
            worst = worst.max(v);
        }
        for j in 0..x.len() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        worst
    }

    /// `c - A^T y`
    pub fn reduced_costs(&self, y: &[f64]) -> Vec<f64> {
        let mut d = self.cost.clone();
        for (r, &yi) in self.rows.iter().zip(y) {
            for &(j, a) in &r.coeffs {
                d[j] -= a * yi;
            }
        }
        d
    }

    /// Lagrangian dual value of the row multipliers `y`, or `-inf` when
    /// `y` has the wrong sign or leaves a reduced cost pointing at an
    /// infinite bound (beyond `tol`).
    pub fn dual_objective(&self, y: &[f64], tol: f64) -> f64 {
        let mut val = 0.0;
        for (r, &yi) in self.rows.iter().zip(y) {
            let ok = match r.sense {
                ConstraintSense::Le => yi <= tol,
                ConstraintSense::Ge => yi >= -tol,
                ConstraintSense::Eq => true,
            };
            if !ok {
                return f64::NEG_INFINITY;
            }
            val += r.rhs * yi;
        }
        for (j, d) in self.reduced_costs(y).into_iter().enumerate() {
            if d > 0.0 {
                if self.lower[j].is_finite() {
                    val += d * self.lower[j];
                } else if d > tol {
                    return f64::NEG_INFINITY;
                }
            } else if d < 0.0 {
                if self.upper[j].is_finite() {
                    val += d * self.upper[j];
                } else if d < -tol {
                    return f64::NEG_INFINITY;
                }
            }
        }
        val
    }

    pub fn solve(&self) -> LpSolution {
        solve_lp(self)
    }
}

/// How an original variable is rebuilt from standard-form columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    Shift { col: usize, offset: f64, sign: f64 },
    Split { pos: usize, neg: usize },
}

struct StandardForm {
    m: usize,
    n: usize,
    /// sparse columns of the m x n constraint matrix
    cols: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    c: Vec<f64>,
    is_artificial: Vec<bool>,
    /// slack (or else artificial) column of each row
    unit: Vec<usize>,
    /// other half of a split free variable
    partner: Vec<Option<usize>>,
    basis: Vec<usize>,
    row_flip: Vec<f64>,
    maps: Vec<VarMap>,
}

impl StandardForm {
    fn col(&self, j: usize) -> &[(usize, f64)] {
        &self.cols[j]
    }

    fn build(lp: &LinearProgram) -> Self {
        let nv = lp.num_vars();
        let mut maps = Vec::with_capacity(nv);
        let mut ncols = 0usize;
        let mut bound_rows: Vec<(usize, f64)> = Vec::new();
        for j in 0..nv {
            let (l, u) = (lp.lower[j], lp.upper[j]);
            if l.is_finite() && u.is_finite() && l < 0.0 && u > 0.0 {
                // wide boxes around zero: shifting by l would cost digits
                maps.push(VarMap::Split { pos: ncols, neg: ncols + 1 });
                bound_rows.push((ncols, u));
                bound_rows.push((ncols + 1, -l));
                ncols += 2;
            } else if l.is_finite() {
                maps.push(VarMap::Shift { col: ncols, offset: l, sign: 1.0 });
                if u.is_finite() {
                    bound_rows.push((ncols, u - l));
                }
                ncols += 1;
            } else if u.is_finite() {
                maps.push(VarMap::Shift { col: ncols, offset: u, sign: -1.0 });
                ncols += 1;
            } else {
                maps.push(VarMap::Split { pos: ncols, neg: ncols + 1 });
                ncols += 2;
            }
        }
        let m = lp.num_rows() + bound_rows.len();

        // sparse rows over structural columns, plus sense and rhs
        let mut rows: Vec<(crate::convex::LinExpr, ConstraintSense, f64)> = Vec::with_capacity(m);
        for r in &lp.rows {
            let mut sparse = Vec::with_capacity(r.coeffs.len());
            let mut rhs = r.rhs;
            for &(j, a) in &r.coeffs {
                match maps[j] {
                    VarMap::Shift { col, offset, sign } => {
                        sparse.push((col, sign * a));
                        rhs -= a * offset;
                    }
                    VarMap::Split { pos, neg } => {
                        sparse.push((pos, a));
                        sparse.push((neg, -a));
                    }
                }
            }
            rows.push((sparse, r.sense, rhs));
        }
        for &(col, width) in &bound_rows {
            rows.push((vec![(col, 1.0)], ConstraintSense::Le, width));
        }

        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ncols];
        let mut b = vec![0.0; m];
        let mut row_flip = vec![1.0; m];
        let mut basis = vec![usize::MAX; m];
        let mut unit = vec![usize::MAX; m];
        for (i, (sparse, sense, rhs)) in rows.iter().enumerate() {
            let flip = if *rhs < 0.0 { -1.0 } else { 1.0 };
            row_flip[i] = flip;
            b[i] = flip * rhs;
            for &(j, v) in sparse {
                // a variable may appear twice in one row
                match cols[j].last_mut() {
                    Some(last) if last.0 == i => last.1 += flip * v,
                    _ => cols[j].push((i, flip * v)),
                }
            }
            let slack_sign = match sense {
                ConstraintSense::Le => Some(1.0),
                ConstraintSense::Ge => Some(-1.0),
                ConstraintSense::Eq => None,
            };
            if let Some(s) = slack_sign {
                if flip * s > 0.0 {
                    basis[i] = cols.len();
                }
                unit[i] = cols.len();
                cols.push(vec![(i, flip * s)]);
            }
        }
        for col in cols.iter_mut() {
            col.retain(|e| e.1 != 0.0);
        }
        let mut is_artificial = vec![false; cols.len()];
        for i in 0..m {
            if basis[i] == usize::MAX {
                basis[i] = cols.len();
                if unit[i] == usize::MAX {
                    unit[i] = cols.len();
                }
                cols.push(vec![(i, 1.0)]);
                is_artificial.push(true);
            }
        }
        let n = cols.len();
        let mut c = vec![0.0; n];
        for j in 0..nv {
            match maps[j] {
                VarMap::Shift { col, sign, .. } => c[col] = sign * lp.cost[j],
                VarMap::Split { pos, neg } => {
                    c[pos] = lp.cost[j];
                    c[neg] = -lp.cost[j];
                }
            }
        }
        let mut partner = vec![None; n];
        for (j, map) in maps.iter().enumerate() {
            if let (VarMap::Split { pos, neg }, false) = (*map, lp.lower[j].is_finite()) {
                partner[pos] = Some(neg);
                partner[neg] = Some(pos);
            }
        }
        StandardForm { m, n, cols, b, c, is_artificial, unit, partner, basis, row_flip, maps }
    }
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

struct Simplex<'a> {
    sf: &'a StandardForm,
    binv: Vec<f64>, // row-major m x m
    xb: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    since_refactor: usize,
}

impl<'a> Simplex<'a> {
    fn new(sf: &'a StandardForm) -> Self {
        let m = sf.m;
        let mut in_basis = vec![false; sf.n];
        for &j in &sf.basis {
            in_basis[j] = true;
        }
        let mut s =
            Simplex { sf, binv: vec![0.0; m * m], xb: vec![0.0; m], basis: sf.basis.clone(), in_basis, since_refactor: 0 };
        s.refactor();
        s
    }

    /// Rebuilds the inverse by Gauss-Jordan elimination with partial
    /// pivoting over the basis columns, sparsest first, so that unit columns
    /// cost O(m). Basis positions may be permuted. Columns that turn out dependent are
    /// swapped for the unit columns of the rows left without a pivot.
    fn refactor(&mut self) {
        let m = self.sf.m;
        self.since_refactor = 0;
        if m == 0 {
            return;
        }
        self.binv.fill(0.0);
        for i in 0..m {
            self.binv[i * m + i] = 1.0;
        }
        let sf = self.sf;
        let mut cols = self.basis.clone();
        cols.sort_by_key(|&j| sf.col(j).len());
        let mut by_row = vec![usize::MAX; m];
        for j in cols {
            let w = self.ftran(j);
            let mut r = usize::MAX;
            for i in (0..m).filter(|&i| by_row[i] == usize::MAX) {
                if r == usize::MAX || w[i].abs() > w[r].abs() {
                    r = i;
                }
            }
            let scale = sf.col(j).iter().fold(0.0f64, |a, e| a.max(e.1.abs()));
            if w[r].abs() > 1e-11 * scale {
                self.eliminate(r, &w);
                by_row[r] = j;
            } else {
                self.in_basis[j] = false;
            }
        }
        for r in 0..m {
            if by_row[r] == usize::MAX {
                let j = sf.unit[r];
                let w = self.ftran(j);
                self.eliminate(r, &w);
                by_row[r] = j;
                self.in_basis[j] = true;
            }
        }
        self.basis = by_row;
        for i in 0..m {
            let v: f64 = (0..m).map(|k| self.binv[i * m + k] * sf.b[k]).sum();
            self.xb[i] = if v < 0.0 && v > -1e-9 { 0.0 } else { v };
        }
    }

    /// Row operations turning `w` into the unit vector `e_r`.
    fn eliminate(&mut self, r: usize, w: &[f64]) {
        let m = self.sf.m;
        let pr = w[r];
        for k in 0..m {
            self.binv[r * m + k] /= pr;
        }
        let (head, rest) = self.binv.split_at_mut(r * m);
        let (pivot_row, tail) = rest.split_at_mut(m);
        for (i, row) in
            head.chunks_exact_mut(m).enumerate().chain(tail.chunks_exact_mut(m).enumerate().map(|(i, c)| (i + r + 1, c)))
        {
            let f = w[i];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(pivot_row.iter()) {
                    *x -= f * p;
                }
            }
        }
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.sf.m;
        let mut y = vec![0.0; m];
        for i in 0..m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for k in 0..m {
                    y[k] += cb * self.binv[i * m + k];
                }
            }
        }
        y
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.sf.m;
        let mut w = vec![0.0; m];
        for &(k, ak) in self.sf.col(j) {
            for i in 0..m {
                w[i] += self.binv[i * m + k] * ak;
            }
        }
        w
    }

    fn pivot(&mut self, r: usize, q: usize, w: &[f64]) {
        let m = self.sf.m;
        let theta = self.xb[r] / w[r];
        for i in 0..m {
            if i != r {
                self.xb[i] -= theta * w[i];
                if self.xb[i] < 0.0 && self.xb[i] > -1e-9 {
                    self.xb[i] = 0.0;
                }
            }
        }
        self.xb[r] = theta;
        self.eliminate(r, w);
        self.in_basis[self.basis[r]] = false;
        self.in_basis[q] = true;
        self.basis[r] = q;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor();
        }
    }

    fn run(&mut self, cost: &[f64], allow: &dyn Fn(usize) -> bool, max_iter: usize) -> PhaseOutcome {
        let cscale = cost.iter().fold(1.0f64, |a, c| a.max(c.abs()));
        let opt_tol = 1e-9 * cscale;
        let mut bland = false;
        let mut streak = 0usize;
        let mut y = self.duals(cost);
        for _ in 0..max_iter {
            let mut entering = None;
            let mut dq = 0.0;
            let mut best = -opt_tol;
            for j in 0..self.sf.n {
                // both halves of a free variable in the basis make it singular
                if self.in_basis[j] || !allow(j) || self.sf.partner[j].is_some_and(|p| self.in_basis[p]) {
                    continue;
                }
                let d = cost[j] - self.sf.col(j).iter().map(|&(k, ak)| y[k] * ak).sum::<f64>();
                if bland {
                    if d < -opt_tol {
                        entering = Some(j);
                        dq = d;
                        break;
                    }
                } else if d < best {
                    best = d;
                    entering = Some(j);
                    dq = d;
                }
            }
            let Some(q) = entering else {
                return PhaseOutcome::Optimal;
            };
            let w = self.ftran(q);
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.sf.m {
                if w[i] > PIVOT_TOL {
                    let ratio = self.xb[i].max(0.0) / w[i];
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            if ratio < best_ratio - 1e-12 {
                                true
                            } else if ratio <= best_ratio + 1e-12 {
                                if bland {
                                    self.basis[i] < self.basis[l]
                                } else {
                                    w[i] > w[l]
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        best_ratio = best_ratio.min(ratio);
                        leave = Some(i);
                    }
                }
            }
            let Some(r) = leave else {
                return PhaseOutcome::Unbounded;
            };
            if best_ratio <= 1e-12 {
                streak += 1;
                if streak > DEGENERATE_STREAK {
                    bland = true;
                }
            } else {
                streak = 0;
            }
            self.pivot(r, q, &w);
            if self.since_refactor == 0 {
                y = self.duals(cost);
            } else {
                // y' = y + d_q * (row r of the updated inverse)
                let m = self.sf.m;
                for (k, yk) in y.iter_mut().enumerate() {
                    *yk += dq * self.binv[r * m + k];
                }
            }
        }
        // iteration cap: fall back to whatever basis we hold
        PhaseOutcome::Optimal
    }
}

/// Solves a linear program with the dense two-phase revised simplex.
pub fn solve_lp(lp: &LinearProgram) -> LpSolution {
    let sf = StandardForm::build(lp);
    let mut sx = Simplex::new(&sf);
    let max_iter = 50 * (sf.m + sf.n) + 1000;
    let nv = lp.num_vars();

    let has_artificial = sf.is_artificial.iter().any(|&a| a);
    if has_artificial {
        let phase1: Vec<f64> = sf.is_artificial.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
        sx.run(&phase1, &|_| true, max_iter);
        sx.refactor();
        let infeas: f64 = (0..sf.m).filter(|&i| sf.is_artificial[sx.basis[i]]).map(|i| sx.xb[i]).sum();
        let bscale = sf.b.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if infeas > 1e-8 * bscale {
            return LpSolution {
                status: LpStatus::Infeasible,
                x: vec![f64::NAN; nv],
                objective: f64::NAN,
                row_duals: vec![f64::NAN; lp.num_rows()],
                reduced_costs: vec![f64::NAN; nv],
            };
        }
        // drive zero-level artificials out where a real column can replace them
        for r in 0..sf.m {
            if !sf.is_artificial[sx.basis[r]] {
                continue;
            }
            let mut candidate = None;
            for j in 0..sf.n {
                if sx.in_basis[j] || sf.is_artificial[j] {
                    continue;
                }
                let w = sx.ftran(j);
                if w[r].abs() > 1e-7 {
                    candidate = Some((j, w));
                    break;
                }
            }
            if let Some((j, w)) = candidate {
                sx.xb[r] = 0.0;
                sx.pivot(r, j, &w);
            }
        }
        sx.refactor();
    }

    let is_art = &sf.is_artificial;
    let outcome = sx.run(&sf.c, &|j| !is_art[j], max_iter);
    sx.refactor();

    let mut xs = vec![0.0; sf.n];
    for i in 0..sf.m {
        xs[sx.basis[i]] = sx.xb[i].max(0.0);
    }
    let x: Vec<f64> = sf
        .maps
        .iter()
        .map(|m| match *m {
            VarMap::Shift { col, offset, sign } => offset + sign * xs[col],
            VarMap::Split { pos, neg } => xs[pos] - xs[neg],
        })
        .collect();
    let ystd = sx.duals(&sf.c);
    let row_duals: Vec<f64> = (0..lp.num_rows()).map(|i| sf.row_flip[i] * ystd[i]).collect();
    let reduced_costs = lp.reduced_costs(&row_duals);
    let objective = lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
    let status = match outcome {
        PhaseOutcome::Optimal => LpStatus::Optimal,
        PhaseOutcome::Unbounded => LpStatus::Unbounded,
    };
    LpSolution { status, x, objective, row_duals, reduced_costs }
}
