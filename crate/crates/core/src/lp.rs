//! Dense two-phase simplex for small linear programs in equality form:
//!
//! ```text
//! minimize c·x  subject to  A x = b,  x ≥ 0
//! ```
//!
//! Pivoting uses Bland's rule throughout, so the method terminates on
//! degenerate problems without cycling. Problem sizes here are a few hundred
//! columns at most, so a full tableau is fine.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        LinearProgram { n_vars, objective: vec![0.0; n_vars], rows: Vec::new(), rhs: Vec::new() }
    }

    pub fn add_eq(&mut self, coeffs: Vec<f64>, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.n_vars);
        self.rows.push(coeffs);
        self.rhs.push(rhs);
    }

    /// Default iteration cap: ten times the problem dimension.
    pub fn default_iteration_cap(&self) -> usize {
        10 * (self.n_vars + self.rows.len()).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

struct Tableau {
    /// `rows × (cols + 1)`, last column is the right-hand side.
    a: Vec<Vec<f64>>,
    /// Reduced costs, last entry is minus the objective value.
    cost: Vec<f64>,
    basis: Vec<usize>,
    cols: usize,
    iterations: usize,
    cap: usize,
}

enum Step {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.a[r][c];
        for v in self.a[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, &pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            for (v, &pv) in self.cost.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Run simplex iterations over columns `< allowed` until optimal or unbounded.
    fn run(&mut self, allowed: usize) -> Result<Step> {
        let rhs = self.cols;
        loop {
            let Some(enter) = (0..allowed).find(|&j| self.cost[j] < -PIVOT_TOL) else {
                return Ok(Step::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.a.iter().enumerate() {
                let coef = row[enter];
                if coef > PIVOT_TOL {
                    let ratio = row[rhs] / coef;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Ok(Step::Unbounded);
            };
            if self.iterations >= self.cap {
                return Err(Error::NumericalFailure { iterations: self.iterations });
            }
            self.iterations += 1;
            self.pivot(r, enter);
        }
    }
}

/// Solve with the default iteration cap.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    solve_with_cap(lp, lp.default_iteration_cap())
}

pub fn solve_with_cap(lp: &LinearProgram, cap: usize) -> Result<LpSolution> {
    let n = lp.n_vars;
    let m = lp.rows.len();
    let cols = n + m;
    let mut a = Vec::with_capacity(m);
    for (row, &b) in lp.rows.iter().zip(&lp.rhs) {
        let sign = if b < 0.0 { -1.0 } else { 1.0 };
        let mut t = vec![0.0; cols + 1];
        for (dst, &v) in t.iter_mut().zip(row) {
            *dst = sign * v;
        }
        t[cols] = sign * b;
        a.push(t);
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[n + i] = 1.0;
    }
    // phase one: minimize the sum of artificials
    let mut cost = vec![0.0; cols + 1];
    for row in &a {
        for j in 0..n {
            cost[j] -= row[j];
        }
        cost[cols] -= row[cols];
    }
    let mut t = Tableau { a, cost, basis: (n..n + m).collect(), cols, iterations: 0, cap };
    t.run(cols)?;
    let scale = 1.0 + lp.rhs.iter().map(|b| b.abs()).sum::<f64>();
    if -t.cost[cols] > FEAS_TOL * scale {
        return Ok(LpSolution { status: LpStatus::Infeasible, x: Vec::new(), objective: f64::NAN, iterations: t.iterations });
    }
    // drive remaining artificials out of the basis; drop rows that are redundant
    let mut r = 0;
    while r < t.a.len() {
        if t.basis[r] >= n {
            match (0..n).find(|&j| t.a[r][j].abs() > PIVOT_TOL) {
                Some(j) => {
                    t.pivot(r, j);
                    r += 1;
                }
                None => {
                    t.a.remove(r);
                    t.basis.remove(r);
                }
            }
        } else {
            r += 1;
        }
    }
    // phase two: reduced costs of the real objective
    let mut cost = vec![0.0; cols + 1];
    cost[..n].copy_from_slice(&lp.objective);
    for (row, &bv) in t.a.iter().zip(&t.basis) {
        let cb = lp.objective[bv];
        if cb != 0.0 {
            for j in 0..n {
                cost[j] -= cb * row[j];
            }
            cost[cols] -= cb * row[cols];
        }
    }
    t.cost = cost;
    let step = t.run(n)?;
    let mut x = vec![0.0; n];
    for (row, &bv) in t.a.iter().zip(&t.basis) {
        if bv < n {
            x[bv] = row[cols];
        }
    }
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    let status = match step {
        Step::Optimal => LpStatus::Optimal,
        Step::Unbounded => LpStatus::Unbounded,
    };
    Ok(LpSolution { status, x, objective, iterations: t.iterations })
}
