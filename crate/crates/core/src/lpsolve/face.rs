use super::{dot, solve, LpError, LpProblem, LpSolution, LpStatus};

/// Relative pin on the primary objective, `|cᵀx - opt| <= PIN_TOL·max(1, |opt|)`.
pub const PIN_TOL: f64 = 1e-7;
/// Multipliers above `FACE_TOL·max(1, ‖c‖∞)` mark a row or bound as tight on
/// the whole optimal face.
pub const FACE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Optimizes `secondary` over the optimal face of `problem`.
///
/// The face is cut out by complementary slackness against the dual
/// certificate in `optimum`: rows with a positive multiplier become
/// equalities and bounds with a positive multiplier fix their variable. A
/// two-sided objective pin is kept on top. The returned objective is in the
/// requested sense; an unbounded secondary problem yields status
/// `Unbounded` with an infinite objective of the matching sign.
pub fn optimize_over_optimal_face(
    problem: &LpProblem,
    optimum: &LpSolution,
    secondary: &[f64],
    sense: Sense,
) -> Result<LpSolution, LpError> {
    if optimum.status != LpStatus::Optimal {
        return Err(LpError::NotOptimal(optimum.status));
    }
    if secondary.len() != problem.num_vars() {
        return Err(LpError::Malformed(format!(
            "secondary objective has {} entries, expected {}",
            secondary.len(),
            problem.num_vars()
        )));
    }
    let scale = problem
        .objective
        .iter()
        .fold(1.0f64, |acc, v| acc.max(v.abs()));
    let tight = FACE_TOL * scale;

    let mut face = LpProblem::maximize(match sense {
        Sense::Maximize => secondary.to_vec(),
        Sense::Minimize => secondary.iter().map(|v| -v).collect(),
    });
    face.lower = problem.lower.clone();
    face.upper = problem.upper.clone();
    for j in 0..problem.num_vars() {
        if optimum.lower_duals[j] > tight {
            face.upper[j] = face.lower[j];
        }
        if optimum.upper_duals[j] > tight {
            face.lower[j] = face.upper[j];
        }
    }
    for ((row, &b), &mu) in problem
        .ineq_rows
        .iter()
        .zip(&problem.ineq_rhs)
        .zip(&optimum.ineq_duals)
    {
        if mu > tight {
            face.add_eq(row.clone(), b);
        } else {
            face.add_le(row.clone(), b);
        }
    }
    for (row, &b) in problem.eq_rows.iter().zip(&problem.eq_rhs) {
        face.add_eq(row.clone(), b);
    }
    let opt = optimum.objective;
    let pin = PIN_TOL * opt.abs().max(1.0);
    face.add_le(problem.objective.clone(), opt + pin);
    face.add_le(problem.objective.iter().map(|v| -v).collect(), -(opt - pin));

    let mut sol = solve(&face)?;
    match sol.status {
        LpStatus::Infeasible => Err(LpError::PinInfeasible),
        LpStatus::Unbounded => {
            if sense == Sense::Minimize {
                sol.objective = f64::NEG_INFINITY;
            }
            Ok(sol)
        }
        LpStatus::Optimal => {
            sol.objective = dot(secondary, &sol.x);
            Ok(sol)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_face() {
        // max x + y on the unit box: unique optimum (1, 1)
        let mut p = LpProblem::maximize(vec![1.0, 1.0]);
        p.set_bounds(0, Some(0.0), Some(1.0));
        p.set_bounds(1, Some(0.0), Some(1.0));
        let opt = solve(&p).unwrap();
        for sense in [Sense::Minimize, Sense::Maximize] {
            let s = optimize_over_optimal_face(&p, &opt, &[1.0, 0.0], sense).unwrap();
            assert!((s.objective - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn edge_face() {
        // max x + y over x + y <= 2, box [0, 2]^2: the face is a segment
        let mut p = LpProblem::maximize(vec![1.0, 1.0]);
        p.add_le(vec![1.0, 1.0], 2.0);
        p.set_bounds(0, Some(0.0), Some(2.0));
        p.set_bounds(1, Some(0.0), Some(2.0));
        let opt = solve(&p).unwrap();
        let lo = optimize_over_optimal_face(&p, &opt, &[1.0, 0.0], Sense::Minimize).unwrap();
        let hi = optimize_over_optimal_face(&p, &opt, &[1.0, 0.0], Sense::Maximize).unwrap();
        assert!(lo.objective.abs() < 1e-12);
        assert!((hi.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn requires_optimal_input() {
        let p = LpProblem::maximize(vec![1.0]);
        let s = solve(&p).unwrap();
        assert_eq!(
            optimize_over_optimal_face(&p, &s, &[1.0], Sense::Maximize),
            Err(LpError::NotOptimal(LpStatus::Unbounded))
        );
    }
}
