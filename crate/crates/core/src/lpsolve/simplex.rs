//! Two-phase dense revised simplex with an explicit basis inverse.
//!
//! Entering variables are chosen by Dantzig's largest-reduced-cost rule until
//! `stall_threshold` consecutive pivots fail to improve the objective; the
//! engine then uses Bland's smallest-index rule until the next strict
//! improvement. Ratio-test ties go to the basic variable with the lowest
//! column index, so runs are deterministic.
#![allow(clippy::needless_range_loop)]

use super::{LpError, LpProblem, LpSolution, LpStatus};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub pivot_cap: usize,
    pub stall_threshold: usize,
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    pub refactor_every: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            pivot_cap: 50_000,
            stall_threshold: 20,
            feasibility_tol: 1e-9,
            optimality_tol: 1e-10,
            pivot_tol: 1e-10,
            refactor_every: 40,
        }
    }
}

pub fn solve(problem: &LpProblem) -> Result<LpSolution, LpError> {
    solve_with(problem, &SolverOptions::default())
}

/// How an original variable is expressed through nonnegative columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = offset + col`
    Shifted { col: usize, offset: f64 },
    /// `x = offset - col`
    Mirrored { col: usize, offset: f64 },
    /// `x = pos - neg`
    Split { pos: usize, neg: usize },
}

#[derive(Debug, Clone, Copy)]
enum RowKind {
    Ineq(usize),
    Eq(usize),
    UpperBound(usize),
}

struct StdRow {
    coeffs: Vec<f64>,
    rhs: f64,
    kind: RowKind,
}

pub fn solve_with(problem: &LpProblem, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    problem.check()?;
    let n = problem.num_vars();

    // Column layout for structural variables.
    let mut maps = Vec::with_capacity(n);
    let mut nstruct = 0;
    let mut struct_cost = Vec::new();
    for j in 0..n {
        let c = problem.objective[j];
        match (problem.lower[j], problem.upper[j]) {
            (Some(lo), _) => {
                maps.push(VarMap::Shifted {
                    col: nstruct,
                    offset: lo,
                });
                struct_cost.push(c);
                nstruct += 1;
            }
            (None, Some(hi)) => {
                maps.push(VarMap::Mirrored {
                    col: nstruct,
                    offset: hi,
                });
                struct_cost.push(-c);
                nstruct += 1;
            }
            (None, None) => {
                maps.push(VarMap::Split {
                    pos: nstruct,
                    neg: nstruct + 1,
                });
                struct_cost.push(c);
                struct_cost.push(-c);
                nstruct += 2;
            }
        }
    }

    let substitute = |row: &[f64], rhs: f64| -> (Vec<f64>, f64) {
        let mut coeffs = vec![0.0; nstruct];
        let mut rhs = rhs;
        for (j, &a) in row.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match maps[j] {
                VarMap::Shifted { col, offset } => {
                    coeffs[col] += a;
                    rhs -= a * offset;
                }
                VarMap::Mirrored { col, offset } => {
                    coeffs[col] -= a;
                    rhs -= a * offset;
                }
                VarMap::Split { pos, neg } => {
                    coeffs[pos] += a;
                    coeffs[neg] -= a;
                }
            }
        }
        (coeffs, rhs)
    };

    let mut rows = Vec::new();
    for (i, (r, &b)) in problem.ineq_rows.iter().zip(&problem.ineq_rhs).enumerate() {
        let (coeffs, rhs) = substitute(r, b);
        rows.push(StdRow {
            coeffs,
            rhs,
            kind: RowKind::Ineq(i),
        });
    }
    for j in 0..n {
        if let (Some(lo), Some(hi), VarMap::Shifted { col, .. }) =
            (problem.lower[j], problem.upper[j], maps[j])
        {
            let mut coeffs = vec![0.0; nstruct];
            coeffs[col] = 1.0;
            rows.push(StdRow {
                coeffs,
                rhs: hi - lo,
                kind: RowKind::UpperBound(j),
            });
        }
    }
    for (i, (r, &b)) in problem.eq_rows.iter().zip(&problem.eq_rhs).enumerate() {
        let (coeffs, rhs) = substitute(r, b);
        rows.push(StdRow {
            coeffs,
            rhs,
            kind: RowKind::Eq(i),
        });
    }

    let m = rows.len();
    let nslack = rows
        .iter()
        .filter(|r| !matches!(r.kind, RowKind::Eq(_)))
        .count();
    // A row needs an artificial unless its slack can start in the basis.
    let needs_art: Vec<bool> = rows
        .iter()
        .map(|r| matches!(r.kind, RowKind::Eq(_)) || r.rhs < 0.0)
        .collect();
    let nart = needs_art.iter().filter(|&&b| b).count();
    let ncols = nstruct + nslack + nart;

    let mut a = vec![0.0; m * ncols];
    let mut b = vec![0.0; m];
    let mut sign = vec![1.0; m];
    let mut basis = vec![0usize; m];
    let mut is_art = vec![false; ncols];
    let mut slack_col = nstruct;
    let mut art_col = nstruct + nslack;
    for (r, row) in rows.iter().enumerate() {
        let s = if row.rhs < 0.0 { -1.0 } else { 1.0 };
        sign[r] = s;
        for (j, &v) in row.coeffs.iter().enumerate() {
            a[r * ncols + j] = s * v;
        }
        b[r] = s * row.rhs;
        if !matches!(row.kind, RowKind::Eq(_)) {
            a[r * ncols + slack_col] = s;
            if !needs_art[r] {
                basis[r] = slack_col;
            }
            slack_col += 1;
        }
        if needs_art[r] {
            a[r * ncols + art_col] = 1.0;
            is_art[art_col] = true;
            basis[r] = art_col;
            art_col += 1;
        }
    }

    let mut engine = Engine {
        m,
        ncols,
        a,
        b,
        basis,
        binv: identity(m),
        xb: Vec::new(),
        pivots: 0,
        since_refactor: 0,
        opts: opts.clone(),
    };
    engine.xb = engine.b.clone();

    if nart > 0 {
        let cost: Vec<f64> = is_art.iter().map(|&t| if t { -1.0 } else { 0.0 }).collect();
        engine.run(&cost, |_| true)?;
        let infeasibility: f64 = (0..m)
            .filter(|&r| is_art[engine.basis[r]])
            .map(|r| engine.xb[r].max(0.0))
            .sum();
        let scale = engine.b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        if infeasibility > opts.feasibility_tol * scale {
            return Ok(LpSolution::with_status(LpStatus::Infeasible, engine.pivots));
        }
        engine.drive_out_artificials(&is_art)?;
    }

    let mut cost = vec![0.0; ncols];
    cost[..nstruct].copy_from_slice(&struct_cost);
    if engine.run(&cost, |j| !is_art[j])? == Phase::Unbounded {
        return Ok(LpSolution::with_status(LpStatus::Unbounded, engine.pivots));
    }
    engine.refactor()?;

    // Primal recovery.
    let mut colval = vec![0.0; ncols];
    for (r, &j) in engine.basis.iter().enumerate() {
        colval[j] = engine.xb[r].max(0.0);
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|map| match *map {
            VarMap::Shifted { col, offset } => offset + colval[col],
            VarMap::Mirrored { col, offset } => offset - colval[col],
            VarMap::Split { pos, neg } => colval[pos] - colval[neg],
        })
        .collect();

    // Dual recovery from π = c_B B⁻¹.
    let pi = engine.duals(&cost);
    let dual_scale = cost.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let clamp = |v: f64| {
        if v < 0.0 && v > -1e-9 * dual_scale {
            0.0
        } else {
            v
        }
    };
    let mut sol = LpSolution {
        status: LpStatus::Optimal,
        objective: problem.evaluate(&x),
        x,
        ineq_duals: vec![0.0; problem.ineq_rows.len()],
        eq_duals: vec![0.0; problem.eq_rows.len()],
        lower_duals: vec![0.0; n],
        upper_duals: vec![0.0; n],
        pivots: engine.pivots,
    };
    for (r, row) in rows.iter().enumerate() {
        let v = sign[r] * pi[r];
        match row.kind {
            RowKind::Ineq(i) => sol.ineq_duals[i] = clamp(v),
            RowKind::Eq(i) => sol.eq_duals[i] = v,
            RowKind::UpperBound(j) => sol.upper_duals[j] = clamp(v),
        }
    }
    for (j, map) in maps.iter().enumerate() {
        match *map {
            VarMap::Shifted { col, .. } => {
                sol.lower_duals[j] = clamp(-engine.reduced_cost(col, &cost, &pi));
            }
            VarMap::Mirrored { col, .. } => {
                sol.upper_duals[j] = clamp(-engine.reduced_cost(col, &cost, &pi));
            }
            VarMap::Split { .. } => {}
        }
    }
    Ok(sol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Optimal,
    Unbounded,
}

struct Engine {
    m: usize,
    ncols: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    pivots: usize,
    since_refactor: usize,
    opts: SolverOptions,
}

fn identity(m: usize) -> Vec<f64> {
    let mut v = vec![0.0; m * m];
    for i in 0..m {
        v[i * m + i] = 1.0;
    }
    v
}

impl Engine {
    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut pi = vec![0.0; m];
        for (k, &j) in self.basis.iter().enumerate() {
            let c = cost[j];
            if c == 0.0 {
                continue;
            }
            for (r, p) in pi.iter_mut().enumerate() {
                *p += c * self.binv[k * m + r];
            }
        }
        pi
    }

    fn reduced_cost(&self, j: usize, cost: &[f64], pi: &[f64]) -> f64 {
        let mut d = cost[j];
        for (r, p) in pi.iter().enumerate() {
            d -= p * self.a[r * self.ncols + j];
        }
        d
    }

    /// `B⁻¹ A_j`
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let col: Vec<f64> = (0..m).map(|r| self.a[r * self.ncols + j]).collect();
        (0..m)
            .map(|k| {
                let row = &self.binv[k * m..(k + 1) * m];
                row.iter().zip(&col).map(|(x, y)| x * y).sum()
            })
            .collect()
    }

    fn pivot(&mut self, r: usize, j: usize, u: &[f64]) -> Result<(), LpError> {
        let m = self.m;
        let step = self.xb[r] / u[r];
        for k in 0..m {
            if k != r {
                self.xb[k] -= step * u[k];
            }
        }
        self.xb[r] = step;
        let piv = u[r];
        for c in 0..m {
            self.binv[r * m + c] /= piv;
        }
        for k in 0..m {
            if k == r || u[k] == 0.0 {
                continue;
            }
            let f = u[k];
            for c in 0..m {
                self.binv[k * m + c] -= f * self.binv[r * m + c];
            }
        }
        self.basis[r] = j;
        self.pivots += 1;
        self.since_refactor += 1;
        if self.since_refactor >= self.opts.refactor_every {
            self.refactor()?;
        }
        Ok(())
    }

    /// Recomputes `B⁻¹` by Gauss-Jordan elimination and refreshes `x_B`.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let mut bm = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for r in 0..m {
                bm[r * m + k] = self.a[r * self.ncols + j];
            }
        }
        let mut inv = identity(m);
        for c in 0..m {
            let p = (c..m)
                .max_by(|&x, &y| bm[x * m + c].abs().total_cmp(&bm[y * m + c].abs()))
                .expect("nonempty range");
            if bm[p * m + c].abs() < 1e-13 {
                return Err(LpError::NumericalFailure(self.pivots));
            }
            if p != c {
                for k in 0..m {
                    bm.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let d = bm[c * m + c];
            for k in 0..m {
                bm[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = bm[r * m + c];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    bm[r * m + k] -= f * bm[c * m + k];
                    inv[r * m + k] -= f * inv[c * m + k];
                }
            }
        }
        self.binv = inv;
        self.xb = (0..m)
            .map(|k| (0..m).map(|r| self.binv[k * m + r] * self.b[r]).sum())
            .collect();
        self.since_refactor = 0;
        Ok(())
    }

    fn run(&mut self, cost: &[f64], allowed: impl Fn(usize) -> bool) -> Result<Phase, LpError> {
        let scale = cost.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        let tol = self.opts.optimality_tol * scale;
        let mut in_basis = vec![false; self.ncols];
        for &j in &self.basis {
            in_basis[j] = true;
        }
        let mut bland = false;
        let mut stall = 0;
        loop {
            if self.pivots >= self.opts.pivot_cap {
                return Err(LpError::NumericalFailure(self.pivots));
            }
            let pi = self.duals(cost);
            let mut enter = None;
            let mut best = tol;
            for j in 0..self.ncols {
                if in_basis[j] || !allowed(j) {
                    continue;
                }
                let d = self.reduced_cost(j, cost, &pi);
                if bland {
                    if d > tol {
                        enter = Some((j, d));
                        break;
                    }
                } else if d > best {
                    best = d;
                    enter = Some((j, d));
                }
            }
            let Some((j, d)) = enter else {
                return Ok(Phase::Optimal);
            };
            let u = self.ftran(j);
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                if u[r] <= self.opts.pivot_tol {
                    continue;
                }
                let t = self.xb[r].max(0.0) / u[r];
                leave = match leave {
                    None => Some((r, t)),
                    Some((lr, lt)) => {
                        let tie = (t - lt).abs() <= 1e-12 * (1.0 + lt.abs());
                        if t < lt && !tie || tie && self.basis[r] < self.basis[lr] {
                            Some((r, t))
                        } else {
                            Some((lr, lt))
                        }
                    }
                };
            }
            let Some((r, t)) = leave else {
                return Ok(Phase::Unbounded);
            };
            if self.xb[r] < 0.0 {
                self.xb[r] = 0.0;
            }
            in_basis[self.basis[r]] = false;
            in_basis[j] = true;
            self.pivot(r, j, &u)?;
            if t * d > 1e-12 * scale {
                stall = 0;
                bland = false;
            } else {
                stall += 1;
                if stall > self.opts.stall_threshold {
                    bland = true;
                }
            }
        }
    }

    /// Pivots zero-level artificials out of the basis where a structural or
    /// slack column can replace them. Artificials left behind sit on
    /// redundant equality rows and stay at zero.
    fn drive_out_artificials(&mut self, is_art: &[bool]) -> Result<(), LpError> {
        let m = self.m;
        for r in 0..m {
            if !is_art[self.basis[r]] {
                continue;
            }
            let mut in_basis = vec![false; self.ncols];
            for &j in &self.basis {
                in_basis[j] = true;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.ncols {
                if in_basis[j] || is_art[j] {
                    continue;
                }
                let v: f64 = (0..m)
                    .map(|k| self.binv[r * m + k] * self.a[k * self.ncols + j])
                    .sum();
                if v.abs() > 1e-9 && best.is_none_or(|(_, bv)| v.abs() > bv.abs()) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                let u = self.ftran(j);
                self.xb[r] = 0.0;
                self.pivot(r, j, &u)?;
            }
        }
        Ok(())
    }
}
