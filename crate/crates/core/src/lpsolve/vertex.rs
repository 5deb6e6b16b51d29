//! Brute-force vertex enumeration for small polyhedra.
//!
//! The equality system is eliminated with an SVD null-space basis; every
//! subset of inequality rows (including finite variable bounds) whose size
//! equals the reduced dimension is solved, kept when feasible, and
//! deduplicated. Exponential in the row count, so guarded by dimension.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use super::{LpError, LpProblem};

pub const DEFAULT_DIMENSION_GUARD: usize = 6;

const RANK_TOL: f64 = 1e-10;
const DEDUP_TOL: f64 = 1e-7;

/// All basic feasible solutions of the problem's feasible region.
pub fn enumerate_vertices(problem: &LpProblem, guard: usize) -> Result<Vec<Vec<f64>>, LpError> {
    problem.check()?;
    let n = problem.num_vars();
    let scale = problem
        .ineq_rhs
        .iter()
        .chain(&problem.eq_rhs)
        .chain(problem.lower.iter().flatten())
        .chain(problem.upper.iter().flatten())
        .fold(1.0f64, |acc, v| acc.max(v.abs()));
    let feas_tol = 1e-9 * scale;

    let (x0, null) = match equality_space(problem, feas_tol) {
        Some(v) => v,
        None => return Ok(Vec::new()),
    };
    let d = null.ncols();
    if d > guard {
        return Err(LpError::DimensionGuard {
            dimension: d,
            guard,
        });
    }

    // Every inequality as (row, rhs), bounds included.
    let mut rows: Vec<(DVector<f64>, f64)> = problem
        .ineq_rows
        .iter()
        .zip(&problem.ineq_rhs)
        .map(|(r, &b)| (DVector::from_column_slice(r), b))
        .collect();
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        if let Some(lo) = problem.lower[j] {
            rows.push((-&e, -lo));
        }
        if let Some(hi) = problem.upper[j] {
            rows.push((e, hi));
        }
    }
    // Reduced system G z <= h with x = x0 + N z.
    let reduced: Vec<(DVector<f64>, f64)> = rows
        .iter()
        .map(|(a, b)| (null.transpose() * a, b - a.dot(&x0)))
        .collect();

    let mut found: Vec<Vec<f64>> = Vec::new();
    let mut push = |x: DVector<f64>| {
        if problem.max_violation(x.as_slice()) > feas_tol {
            return;
        }
        let dup = found.iter().any(|v| {
            v.iter()
                .zip(x.iter())
                .all(|(a, b)| (a - b).abs() <= DEDUP_TOL * (1.0 + a.abs()))
        });
        if !dup {
            found.push(x.as_slice().to_vec());
        }
    };

    if d == 0 {
        push(x0);
        return Ok(found);
    }
    for subset in (0..reduced.len()).combinations(d) {
        let mut g = DMatrix::<f64>::zeros(d, d);
        let mut h = DVector::<f64>::zeros(d);
        for (k, &i) in subset.iter().enumerate() {
            g.set_row(k, &reduced[i].0.transpose());
            h[k] = reduced[i].1;
        }
        let svd = g.clone().svd(false, false);
        let smax = svd.singular_values.max();
        if smax == 0.0 || svd.singular_values.min() <= RANK_TOL * smax {
            continue;
        }
        let Some(z) = g.lu().solve(&h) else { continue };
        push(&x0 + &null * z);
    }
    Ok(found)
}

/// Maximum of the objective over enumerated vertices; `None` when the
/// region has no vertex (empty, or containing a line).
pub fn vertex_optimum(problem: &LpProblem, guard: usize) -> Result<Option<f64>, LpError> {
    let vertices = enumerate_vertices(problem, guard)?;
    Ok(vertices
        .iter()
        .map(|v| problem.evaluate(v))
        .max_by(f64::total_cmp))
}

/// Particular solution and null-space basis of the equality rows; `None` if
/// they are inconsistent.
fn equality_space(problem: &LpProblem, tol: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let n = problem.num_vars();
    let k = problem.eq_rows.len();
    if k == 0 {
        return Some((DVector::zeros(n), DMatrix::identity(n, n)));
    }
    // Pad to at least n rows so the SVD returns a full right basis.
    let rows = k.max(n);
    let mut e = DMatrix::<f64>::zeros(rows, n);
    let mut rhs = DVector::<f64>::zeros(rows);
    for (i, (r, &b)) in problem.eq_rows.iter().zip(&problem.eq_rhs).enumerate() {
        e.set_row(i, &DVector::from_column_slice(r).transpose());
        rhs[i] = b;
    }
    let svd = e.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let v_t = svd.v_t.as_ref().expect("requested V");
    let x0 = svd.solve(&rhs, RANK_TOL * smax.max(1.0)).ok()?;
    if (&e * &x0 - &rhs).amax() > tol {
        return None;
    }
    let null_rows: Vec<usize> = (0..n)
        .filter(|&i| svd.singular_values[i] <= RANK_TOL * smax.max(1.0))
        .collect();
    let mut null = DMatrix::<f64>::zeros(n, null_rows.len());
    for (c, &i) in null_rows.iter().enumerate() {
        null.set_column(c, &v_t.row(i).transpose());
    }
    Some((x0, null))
}
