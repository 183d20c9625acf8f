//! Dense two-phase primal simplex for small linear programs:
//! minimize `cᵀx` subject to row constraints and `x ≥ 0`.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub n_vars: usize,
    pub cost: Vec<f64>,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new(cost: Vec<f64>) -> Self {
        Self { n_vars: cost.len(), cost, rows: Vec::new() }
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) {
        self.rows.push(Row { coeffs, cmp, rhs });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

const PIVOT_EPS: f64 = 1e-9;
const COST_EPS: f64 = 1e-10;
const FEAS_EPS: f64 = 1e-8;
const MAX_ITER: usize = 100_000;
const DEGENERATE_SWITCH: usize = 50;

struct Tableau {
    m: usize,
    cols: usize,
    /// Row-major `m × (cols + 1)`, last column is the right-hand side.
    a: Vec<f64>,
    basis: Vec<usize>,
    /// Reduced costs (length `cols`) and the negated objective value.
    d: Vec<f64>,
    d_rhs: f64,
    iterations: usize,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * (self.cols + 1) + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.a[i * (self.cols + 1) + self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.cols + 1;
        let p = self.a[r * w + c];
        for v in &mut self.a[r * w..(r + 1) * w] {
            *v /= p;
        }
        let prow: Vec<f64> = self.a[r * w..(r + 1) * w].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.a[i * w + c];
            if f != 0.0 {
                for (v, pv) in self.a[i * w..(i + 1) * w].iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
                self.a[i * w + c] = 0.0;
            }
        }
        let f = self.d[c];
        if f != 0.0 {
            for (v, pv) in self.d.iter_mut().zip(&prow) {
                *v -= f * pv;
            }
            self.d[c] = 0.0;
            self.d_rhs -= f * prow[self.cols];
        }
        self.basis[r] = c;
        self.iterations += 1;
    }

    /// Runs primal simplex on the current reduced costs over `allowed` columns.
    fn optimize(&mut self, allowed: &[bool]) -> LpStatus {
        let mut degenerate_run = 0;
        loop {
            if self.iterations >= MAX_ITER {
                return LpStatus::IterationLimit;
            }
            let bland = degenerate_run >= DEGENERATE_SWITCH;
            let mut enter = None;
            let mut best = -COST_EPS;
            for j in 0..self.cols {
                if !allowed[j] || self.d[j] >= -COST_EPS {
                    continue;
                }
                if bland {
                    enter = Some(j);
                    break;
                }
                if self.d[j] < best {
                    best = self.d[j];
                    enter = Some(j);
                }
            }
            let Some(c) = enter else {
                return LpStatus::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let aic = self.at(i, c);
                if aic > PIVOT_EPS {
                    let ratio = self.rhs(i) / aic;
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return LpStatus::Unbounded;
            };
            degenerate_run = if ratio.abs() < 1e-12 { degenerate_run + 1 } else { 0 };
            self.pivot(r, c);
        }
    }
}

/// Solves the program; `x` has length `n_vars`.
pub fn solve_lp(lp: &LinearProgram) -> LpSolution {
    let n = lp.n_vars;
    let m = lp.rows.len();
    let cost_scale = lp.cost.iter().fold(0.0_f64, |s, c| s.max(c.abs())).max(1e-300);

    // Normalize rows: scale by the largest coefficient and make rhs ≥ 0.
    let mut rows: Vec<(Vec<f64>, Cmp, f64)> = Vec::with_capacity(m);
    for row in &lp.rows {
        let mut dense = vec![0.0; n];
        for &(j, v) in &row.coeffs {
            dense[j] += v;
        }
        let scale = dense.iter().fold(row.rhs.abs(), |s, v| s.max(v.abs()));
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let mut cmp = row.cmp;
        let mut rhs = row.rhs / scale;
        for v in &mut dense {
            *v /= scale;
        }
        if rhs < 0.0 {
            rhs = -rhs;
            for v in &mut dense {
                *v = -*v;
            }
            cmp = match cmp {
                Cmp::Le => Cmp::Ge,
                Cmp::Ge => Cmp::Le,
                Cmp::Eq => Cmp::Eq,
            };
        }
        rows.push((dense, cmp, rhs));
    }

    let n_slack = rows.iter().filter(|r| r.1 != Cmp::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Cmp::Le).count();
    let cols = n + n_slack + n_art;
    let w = cols + 1;
    let mut t = Tableau {
        m,
        cols,
        a: vec![0.0; m * w],
        basis: vec![0; m],
        d: vec![0.0; cols],
        d_rhs: 0.0,
        iterations: 0,
    };
    let mut is_art = vec![false; cols];
    let (mut s_col, mut a_col) = (n, n + n_slack);
    for (i, (dense, cmp, rhs)) in rows.iter().enumerate() {
        t.a[i * w..i * w + n].copy_from_slice(dense);
        t.a[i * w + cols] = *rhs;
        match cmp {
            Cmp::Le => {
                t.a[i * w + s_col] = 1.0;
                t.basis[i] = s_col;
                s_col += 1;
            }
            Cmp::Ge => {
                t.a[i * w + s_col] = -1.0;
                s_col += 1;
                t.a[i * w + a_col] = 1.0;
                t.basis[i] = a_col;
                is_art[a_col] = true;
                a_col += 1;
            }
            Cmp::Eq => {
                t.a[i * w + a_col] = 1.0;
                t.basis[i] = a_col;
                is_art[a_col] = true;
                a_col += 1;
            }
        }
    }

    if n_art > 0 {
        for j in 0..cols {
            t.d[j] = if is_art[j] { 1.0 } else { 0.0 };
        }
        for i in 0..m {
            if is_art[t.basis[i]] {
                for j in 0..cols {
                    t.d[j] -= t.at(i, j);
                }
                t.d_rhs -= t.rhs(i);
            }
        }
        let all = vec![true; cols];
        let status = t.optimize(&all);
        if status == LpStatus::IterationLimit {
            return failed(n, LpStatus::IterationLimit, t.iterations);
        }
        if -t.d_rhs > FEAS_EPS {
            return failed(n, LpStatus::Infeasible, t.iterations);
        }
        // Drive remaining zero-valued artificials out of the basis.
        for i in 0..m {
            if is_art[t.basis[i]] {
                if let Some(j) = (0..cols).find(|&j| !is_art[j] && t.at(i, j).abs() > PIVOT_EPS) {
                    t.pivot(i, j);
                }
            }
        }
    }

    let mut c_full = vec![0.0; cols];
    for j in 0..n {
        c_full[j] = lp.cost[j] / cost_scale;
    }
    t.d.copy_from_slice(&c_full);
    t.d_rhs = 0.0;
    for i in 0..m {
        let cb = c_full[t.basis[i]];
        if cb != 0.0 {
            for j in 0..cols {
                t.d[j] -= cb * t.at(i, j);
            }
            t.d_rhs -= cb * t.rhs(i);
        }
    }
    let allowed: Vec<bool> = is_art.iter().map(|a| !a).collect();
    let status = t.optimize(&allowed);
    if status != LpStatus::Optimal {
        return failed(n, status, t.iterations);
    }
    let mut x = vec![0.0; n];
    for i in 0..m {
        if t.basis[i] < n {
            x[t.basis[i]] = t.rhs(i).max(0.0);
        }
    }
    let objective = lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
    LpSolution { status: LpStatus::Optimal, x, objective, iterations: t.iterations }
}

fn failed(n: usize, status: LpStatus, iterations: usize) -> LpSolution {
    LpSolution { status, x: vec![0.0; n], objective: f64::NAN, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
        let mut lp = LinearProgram::new(vec![-3.0, -5.0]);
        lp.add_row(vec![(0, 1.0)], Cmp::Le, 4.0);
        lp.add_row(vec![(1, 2.0)], Cmp::Le, 12.0);
        lp.add_row(vec![(0, 3.0), (1, 2.0)], Cmp::Le, 18.0);
        let s = solve_lp(&lp);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + 2y, x + y = 3, y ≥ 1 → (2, 1), 4
        let mut lp = LinearProgram::new(vec![1.0, 2.0]);
        lp.add_row(vec![(0, 1.0), (1, 1.0)], Cmp::Eq, 3.0);
        lp.add_row(vec![(1, 1.0)], Cmp::Ge, 1.0);
        let s = solve_lp(&lp);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 4.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_row(vec![(0, 1.0)], Cmp::Le, 1.0);
        lp.add_row(vec![(0, 1.0)], Cmp::Ge, 2.0);
        assert_eq!(solve_lp(&lp).status, LpStatus::Infeasible);

        let mut lp = LinearProgram::new(vec![-1.0, 0.0]);
        lp.add_row(vec![(0, 1.0), (1, -1.0)], Cmp::Le, 1.0);
        assert_eq!(solve_lp(&lp).status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add_row(vec![(0, 1.0), (1, 1.0)], Cmp::Eq, 2.0);
        lp.add_row(vec![(0, 2.0), (1, 2.0)], Cmp::Eq, 4.0);
        lp.add_row(vec![(0, 1.0)], Cmp::Le, 0.5);
        let s = solve_lp(&lp);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs_rows() {
        // -x ≤ -2 means x ≥ 2
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_row(vec![(0, -1.0)], Cmp::Le, -2.0);
        let s = solve_lp(&lp);
        assert!((s.x[0] - 2.0).abs() < 1e-9);
    }
}
