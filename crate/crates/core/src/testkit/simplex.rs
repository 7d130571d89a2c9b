//! Dense two-phase simplex with Bland's rule, for small reference LPs.

/// `min cᵀx` subject to `Ax = b`, `x ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
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
    pub value: f64,
}

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-12;
const UNBOUNDED_TOL: f64 = 1e-7;

struct Tableau {
    /// `m` constraint rows followed by the objective row; last column is the rhs.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Columns allowed to enter the basis.
    allowed: usize,
}

impl Tableau {
    fn m(&self) -> usize {
        self.basis.len()
    }

    fn rhs(&self) -> usize {
        self.rows[0].len() - 1
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[col] = 0.0;
            }
        }
        self.basis[r] = col;
    }

    fn leaving_row(&self, col: usize) -> Option<usize> {
        let rhs = self.rhs();
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..self.m() {
            let a = self.rows[i][col];
            if a > PIVOT_TOL {
                let ratio = self.rows[i][rhs] / a;
                leave = match leave {
                    Some((bi, br))
                        if !(ratio < br - 1e-14
                            || (ratio <= br + 1e-14 && self.basis[i] < self.basis[bi])) =>
                    {
                        Some((bi, br))
                    }
                    _ => Some((i, ratio)),
                };
            }
        }
        leave.map(|(r, _)| r)
    }

    /// Runs Bland's rule on the objective row; returns the final status.
    fn optimize(&mut self, max_pivots: usize) -> LpStatus {
        let m = self.m();
        for _ in 0..max_pivots {
            // a column whose entries are all round-off cannot enter; it only
            // signals unboundedness when its reduced cost is clearly negative
            let mut choice = None;
            for col in (0..self.allowed).filter(|&j| self.rows[m][j] < -COST_TOL) {
                match self.leaving_row(col) {
                    Some(r) => {
                        choice = Some((r, col));
                        break;
                    }
                    None if self.rows[m][col] < -UNBOUNDED_TOL => return LpStatus::Unbounded,
                    None => {}
                }
            }
            let Some((r, col)) = choice else {
                return LpStatus::Optimal;
            };
            self.pivot(r, col);
        }
        LpStatus::IterationLimit
    }
}

/// Solves `lp` from scratch. Rows with negative `b` are negated first.
pub fn solve_lp(lp: &LinearProgram, max_pivots: usize) -> LpSolution {
    let m = lp.a.len();
    let n = lp.c.len();
    let failed = |status| LpSolution {
        status,
        x: vec![0.0; n],
        value: f64::NAN,
    };
    let mut rows = Vec::with_capacity(m + 1);
    for (i, (row, &b)) in lp.a.iter().zip(&lp.b).enumerate() {
        let sign = if b < 0.0 { -1.0 } else { 1.0 };
        let mut r = vec![0.0; n + m + 1];
        for (j, &v) in row.iter().enumerate() {
            r[j] = sign * v;
        }
        r[n + i] = 1.0;
        r[n + m] = sign * b;
        rows.push(r);
    }
    // phase 1 objective: sum of artificials, in reduced form
    let mut obj = vec![0.0; n + m + 1];
    for r in &rows {
        for j in 0..n {
            obj[j] -= r[j];
        }
        obj[n + m] -= r[n + m];
    }
    rows.push(obj);
    let mut t = Tableau {
        rows,
        basis: (n..n + m).collect(),
        allowed: n + m,
    };
    match t.optimize(max_pivots) {
        LpStatus::Optimal => {}
        LpStatus::IterationLimit => return failed(LpStatus::IterationLimit),
        // phase 1 is bounded below by zero
        _ => return failed(LpStatus::Infeasible),
    }
    if -t.rows[m][n + m] > 1e-8 {
        return failed(LpStatus::Infeasible);
    }

    // drive artificials out of the basis, dropping redundant rows
    let mut i = 0;
    while i < t.m() {
        if t.basis[i] >= n {
            match (0..n).find(|&j| t.rows[i][j].abs() > 1e-9) {
                Some(j) => t.pivot(i, j),
                None => {
                    t.rows.remove(i);
                    t.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    phase_two(t, lp, max_pivots)
}

/// Solves `lp` starting from `basis`, one column per row, which must be
/// primal feasible. Skips phase 1 and its round-off.
pub fn solve_lp_from_basis(lp: &LinearProgram, basis: &[usize], max_pivots: usize) -> LpSolution {
    let m = lp.a.len();
    let n = lp.c.len();
    let failed = |status| LpSolution {
        status,
        x: vec![0.0; n],
        value: f64::NAN,
    };
    if basis.len() != m || basis.iter().any(|&j| j >= n) {
        return failed(LpStatus::Infeasible);
    }
    let rows: Vec<Vec<f64>> =
        lp.a.iter()
            .zip(&lp.b)
            .map(|(row, &b)| row.iter().copied().chain(std::iter::once(b)).collect())
            .chain(std::iter::once(vec![0.0; n + 1]))
            .collect();
    let mut t = Tableau {
        rows,
        basis: basis.to_vec(),
        allowed: n,
    };
    for (r, &col) in basis.iter().enumerate() {
        if t.rows[r][col].abs() < PIVOT_TOL {
            return failed(LpStatus::Infeasible);
        }
        t.pivot(r, col);
    }
    if (0..m).any(|r| t.rows[r][n] < -1e-9) {
        return failed(LpStatus::Infeasible);
    }
    for r in 0..m {
        t.rows[r][n] = t.rows[r][n].max(0.0);
    }
    phase_two(t, lp, max_pivots)
}

fn phase_two(mut t: Tableau, lp: &LinearProgram, max_pivots: usize) -> LpSolution {
    let n = lp.c.len();
    let failed = |status| LpSolution {
        status,
        x: vec![0.0; n],
        value: f64::NAN,
    };
    let m = t.m();
    let rhs = t.rhs();
    let mut obj = vec![0.0; rhs + 1];
    obj[..n].copy_from_slice(&lp.c);
    for (i, &bcol) in t.basis.iter().enumerate() {
        let cb = lp.c[bcol];
        if cb != 0.0 {
            for (o, v) in obj.iter_mut().zip(&t.rows[i]) {
                *o -= cb * v;
            }
        }
    }
    t.rows[m] = obj;
    t.allowed = n;
    let status = t.optimize(max_pivots);
    if status != LpStatus::Optimal {
        return failed(status);
    }
    let mut x = vec![0.0; n];
    for (i, &bcol) in t.basis.iter().enumerate() {
        x[bcol] = t.rows[i][rhs].max(0.0);
    }
    let value = x.iter().zip(&lp.c).map(|(a, b)| a * b).sum();
    LpSolution {
        status: LpStatus::Optimal,
        x,
        value,
    }
}
