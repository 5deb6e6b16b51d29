//! Dense linear programming: a revised simplex engine with dual extraction,
//! optimization over the optimal face, and a brute-force vertex enumerator
//! used as an oracle on small instances.
//!
//! Problems are always posed as maximization:
//!
//! ```text
//! max cᵀx  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  lo <= x <= hi
//! ```
//!
//! and an optimal [`LpSolution`] satisfies the stationarity condition
//! `c = A_ubᵀ μ + A_eqᵀ ν - λ_lo + λ_hi` with `μ, λ_lo, λ_hi >= 0`.

mod face;
mod simplex;
mod vertex;

pub use face::{optimize_over_optimal_face, Sense};
pub use simplex::{solve, solve_with, SolverOptions};
pub use vertex::{enumerate_vertices, vertex_optimum, DEFAULT_DIMENSION_GUARD};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("simplex exceeded the pivot cap of {0} pivots")]
    NumericalFailure(usize),
    #[error("reduced dimension {dimension} exceeds the enumeration guard {guard}")]
    DimensionGuard { dimension: usize, guard: usize },
    #[error("optimal face is empty under the pinning tolerance")]
    PinInfeasible,
    #[error("cannot restrict to the optimal face of a problem with status {0:?}")]
    NotOptimal(LpStatus),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub ineq_rows: Vec<Vec<f64>>,
    pub ineq_rhs: Vec<f64>,
    pub eq_rows: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

impl LpProblem {
    /// Maximize `objective` over free variables; add rows and bounds after.
    pub fn maximize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LpProblem {
            objective,
            ineq_rows: Vec::new(),
            ineq_rhs: Vec::new(),
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            lower: vec![None; n],
            upper: vec![None; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Adds `row · x <= rhs`; returns its index among inequality rows.
    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) -> usize {
        self.ineq_rows.push(row);
        self.ineq_rhs.push(rhs);
        self.ineq_rows.len() - 1
    }

    /// Adds `row · x = rhs`; returns its index among equality rows.
    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) -> usize {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
        self.eq_rows.len() - 1
    }

    pub fn set_bounds(&mut self, var: usize, lower: Option<f64>, upper: Option<f64>) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn check(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        let bad = |msg: String| Err(LpError::Malformed(msg));
        if self.lower.len() != n || self.upper.len() != n {
            return bad("bound vectors do not match the variable count".into());
        }
        if self.ineq_rows.len() != self.ineq_rhs.len() || self.eq_rows.len() != self.eq_rhs.len()
        {
            return bad("row and right-hand-side counts differ".into());
        }
        for (i, r) in self.ineq_rows.iter().chain(&self.eq_rows).enumerate() {
            if r.len() != n {
                return bad(format!("row {i} has {} entries, expected {n}", r.len()));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return bad(format!("row {i} has non-finite coefficients"));
            }
        }
        let finite = |v: &f64| v.is_finite();
        if !self.objective.iter().all(finite)
            || !self.ineq_rhs.iter().all(finite)
            || !self.eq_rhs.iter().all(finite)
        {
            return bad("non-finite objective or right-hand side".into());
        }
        for j in 0..n {
            if let (Some(lo), Some(hi)) = (self.lower[j], self.upper[j]) {
                if !(lo.is_finite() && hi.is_finite()) {
                    return bad(format!("non-finite bound on variable {j}"));
                }
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (r, b) in self.ineq_rows.iter().zip(&self.ineq_rhs) {
            worst = worst.max(dot(r, x) - b);
        }
        for (r, b) in self.eq_rows.iter().zip(&self.eq_rhs) {
            worst = worst.max((dot(r, x) - b).abs());
        }
        for (j, &xj) in x.iter().enumerate() {
            if let Some(lo) = self.lower[j] {
                worst = worst.max(lo - xj);
            }
            if let Some(hi) = self.upper[j] {
                worst = worst.max(xj - hi);
            }
        }
        worst
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Primal point and dual certificate. Vectors are empty unless the status is
/// [`LpStatus::Optimal`].
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Multipliers on `A_ub x <= b_ub`, nonnegative.
    pub ineq_duals: Vec<f64>,
    /// Multipliers on `A_eq x = b_eq`, free.
    pub eq_duals: Vec<f64>,
    /// Multipliers on finite lower bounds, nonnegative.
    pub lower_duals: Vec<f64>,
    /// Multipliers on finite upper bounds, nonnegative.
    pub upper_duals: Vec<f64>,
    pub pivots: usize,
}

impl LpSolution {
    pub(crate) fn with_status(status: LpStatus, pivots: usize) -> Self {
        LpSolution {
            status,
            x: Vec::new(),
            objective: match status {
                LpStatus::Unbounded => f64::INFINITY,
                _ => f64::NEG_INFINITY,
            },
            ineq_duals: Vec::new(),
            eq_duals: Vec::new(),
            lower_duals: Vec::new(),
            upper_duals: Vec::new(),
            pivots,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Value of the dual objective `b_ubᵀμ + b_eqᵀν - loᵀλ_lo + hiᵀλ_hi`.
    pub fn dual_objective(&self, p: &LpProblem) -> f64 {
        let mut v = dot(&p.ineq_rhs, &self.ineq_duals) + dot(&p.eq_rhs, &self.eq_duals);
        for j in 0..p.num_vars() {
            if let Some(lo) = p.lower[j] {
                v -= lo * self.lower_duals[j];
            }
            if let Some(hi) = p.upper[j] {
                v += hi * self.upper_duals[j];
            }
        }
        v
    }

    /// Certificate residuals against `p`. Only meaningful when optimal.
    pub fn residuals(&self, p: &LpProblem) -> Residuals {
        let n = p.num_vars();
        let primal = p.max_violation(&self.x);
        let mut stationarity: f64 = 0.0;
        for j in 0..n {
            let mut r = p.objective[j];
            for (row, mu) in p.ineq_rows.iter().zip(&self.ineq_duals) {
                r -= row[j] * mu;
            }
            for (row, nu) in p.eq_rows.iter().zip(&self.eq_duals) {
                r -= row[j] * nu;
            }
            r += self.lower_duals[j] - self.upper_duals[j];
            stationarity = stationarity.max(r.abs());
        }
        let mut sign: f64 = 0.0;
        for &v in self
            .ineq_duals
            .iter()
            .chain(&self.lower_duals)
            .chain(&self.upper_duals)
        {
            sign = sign.max(-v);
        }
        let mut complementarity: f64 = 0.0;
        for ((row, b), mu) in p.ineq_rows.iter().zip(&p.ineq_rhs).zip(&self.ineq_duals) {
            complementarity = complementarity.max((mu * (b - dot(row, &self.x))).abs());
        }
        for j in 0..n {
            if let Some(lo) = p.lower[j] {
                complementarity = complementarity.max((self.lower_duals[j] * (self.x[j] - lo)).abs());
            }
            if let Some(hi) = p.upper[j] {
                complementarity = complementarity.max((self.upper_duals[j] * (hi - self.x[j])).abs());
            }
        }
        Residuals {
            primal,
            stationarity,
            dual_sign: sign,
            complementarity,
            gap: (self.objective - self.dual_objective(p)).abs(),
        }
    }
}

/// Absolute residuals of a primal/dual pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub primal: f64,
    pub stationarity: f64,
    /// Largest negative part of a sign-constrained multiplier.
    pub dual_sign: f64,
    pub complementarity: f64,
    pub gap: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal
            .max(self.stationarity)
            .max(self.dual_sign)
            .max(self.complementarity)
    }
}
