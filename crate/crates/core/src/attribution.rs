//! Dual certificates of the support problem, multiplier ranges over the set
//! of optimal certificates, and limit-sensitivity checks.
//!
//! A certificate `(μ, s)` is feasible when `μᵀA + s·1ᵀ = yᵀK`, `μ >= 0` and
//! `μ_i = 0` for every absent constraint; feasibility does not depend on the
//! limit values, so one certificate can be priced against several models.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::lpsolve::{optimize_over_optimal_face, solve, LpError, LpProblem, LpSolution, LpStatus, Sense};
use crate::netmodel::{Constraint, NetworkModel, Side};
use crate::support::{support_value, PriceVector, SupportError};

/// Classification threshold on multiplier values, in $/MW.
pub const TAU: f64 = 1e-6;
/// Relative tolerance of the sensitivity inequalities.
pub const SENSITIVITY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttributionError {
    #[error("dual of the {market} support problem is infeasible: support is unbounded (missing limits)")]
    DualInfeasible { market: String },
    #[error("dual of the {market} support problem is unbounded: the polytope is empty")]
    PrimalInfeasible { market: String },
    #[error(transparent)]
    Support(#[from] SupportError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    /// Multipliers on upper limits, one per stacked row.
    pub mu_upper: Vec<f64>,
    /// Multipliers on lower limits, one per stacked row.
    pub mu_lower: Vec<f64>,
    /// Power-balance multiplier.
    pub s: f64,
    /// `μᵀb` against the model the certificate was built for.
    pub objective: f64,
}

impl DualCertificate {
    pub fn new(model: &NetworkModel, mu_upper: Vec<f64>, mu_lower: Vec<f64>, s: f64) -> Self {
        let mut cert = DualCertificate {
            mu_upper,
            mu_lower,
            s,
            objective: 0.0,
        };
        cert.objective = cert.price(model);
        cert
    }

    /// Stacked multipliers `[μ_upper; μ_lower]`.
    pub fn mu(&self) -> Vec<f64> {
        self.mu_upper.iter().chain(&self.mu_lower).copied().collect()
    }

    pub fn get(&self, c: Constraint) -> f64 {
        match c.side {
            Side::Upper => self.mu_upper[c.row],
            Side::Lower => self.mu_lower[c.row],
        }
    }

    /// `μ_upper - μ_lower` on a row.
    pub fn net(&self, row: usize) -> f64 {
        self.mu_upper[row] - self.mu_lower[row]
    }

    /// `μᵀb` under the limits of `model`; multipliers on constraints absent
    /// from `model` price at infinity unless zero.
    pub fn price(&self, model: &NetworkModel) -> f64 {
        let mut v = 0.0;
        for (i, (&up, &lo)) in self.mu_upper.iter().zip(&self.mu_lower).enumerate() {
            for (c, mu) in [(Constraint::upper(i), up), (Constraint::lower(i), lo)] {
                if mu != 0.0 {
                    v += mu * model.stacked_limit(c).unwrap_or(f64::INFINITY);
                }
            }
        }
        v
    }

    /// `max_j |(Kᵀ(μ_upper - μ_lower))_j + s - (Kᵀy)_j|`. Depends only on the
    /// PTDF matrix, never on limits.
    pub fn feasibility_residual(&self, model: &NetworkModel, y: &PriceVector) -> f64 {
        let net: Vec<f64> = (0..self.mu_upper.len()).map(|i| self.net(i)).collect();
        let lhs = model.price_direction(&net);
        let rhs = model.price_direction(y.values());
        lhs.iter()
            .zip(&rhs)
            .map(|(a, b)| (a + self.s - b).abs())
            .fold(0.0, f64::max)
    }

    /// Whether the certificate puts weight on a constraint `model` does not
    /// enforce.
    pub fn uses_absent(&self, model: &NetworkModel) -> bool {
        (0..self.mu_upper.len()).any(|i| {
            (self.mu_upper[i] != 0.0 && model.stacked_limit(Constraint::upper(i)).is_none())
                || (self.mu_lower[i] != 0.0 && model.stacked_limit(Constraint::lower(i)).is_none())
        })
    }

    /// Removes simultaneous upper and lower weight on a row by subtracting
    /// their minimum from both. The net value and the feasibility residual
    /// are unchanged; the objective is recomputed.
    pub fn canonicalized(&self, model: &NetworkModel) -> DualCertificate {
        let mut up = self.mu_upper.clone();
        let mut lo = self.mu_lower.clone();
        for (u, l) in up.iter_mut().zip(lo.iter_mut()) {
            let m = u.min(*l);
            *u -= m;
            *l -= m;
        }
        DualCertificate::new(model, up, lo, self.s)
    }
}

/// Dual of the support problem: `min μᵀb` over certificates, posed as a
/// maximization of `-bᵀμ`. Variables are the multipliers of
/// `model.finite_constraints()` followed by the free `s`.
pub fn dual_problem(model: &NetworkModel, y: &PriceVector) -> (LpProblem, Vec<Constraint>) {
    let constraints = model.finite_constraints();
    let n = model.num_nodes();
    let nv = constraints.len() + 1;
    let mut objective: Vec<f64> = constraints
        .iter()
        .map(|c| -model.stacked_limit(*c).expect("finite constraint"))
        .collect();
    objective.push(0.0);
    let mut lp = LpProblem::maximize(objective);
    let k = model.k();
    let direction = model.price_direction(y.values());
    for (j, &d) in direction.iter().enumerate() {
        let mut row = vec![0.0; nv];
        for (v, c) in constraints.iter().enumerate() {
            row[v] = match c.side {
                Side::Upper => k[(c.row, j)],
                Side::Lower => -k[(c.row, j)],
            };
        }
        row[nv - 1] = 1.0;
        lp.add_eq(row, d);
    }
    for v in 0..constraints.len() {
        lp.set_bounds(v, Some(0.0), None);
    }
    debug_assert_eq!(lp.eq_rows.len(), n);
    (lp, constraints)
}

fn check_dual_status(model: &NetworkModel, sol: &LpSolution) -> Result<(), AttributionError> {
    let market = model.market().label().to_string();
    match sol.status {
        LpStatus::Optimal => Ok(()),
        LpStatus::Infeasible => Err(AttributionError::DualInfeasible { market }),
        LpStatus::Unbounded => Err(AttributionError::PrimalInfeasible { market }),
    }
}

fn certificate_from(model: &NetworkModel, constraints: &[Constraint], x: &[f64]) -> DualCertificate {
    let rows = model.rows();
    let mut up = vec![0.0; rows];
    let mut lo = vec![0.0; rows];
    for (c, &mu) in constraints.iter().zip(x) {
        match c.side {
            Side::Upper => up[c.row] = mu.max(0.0),
            Side::Lower => lo[c.row] = mu.max(0.0),
        }
    }
    DualCertificate::new(model, up, lo, x[constraints.len()])
}

/// Solves the dual support problem directly.
pub fn dual_support(model: &NetworkModel, y: &PriceVector) -> Result<DualCertificate, AttributionError> {
    y.check(model)?;
    let (lp, constraints) = dual_problem(model, y);
    let sol = solve(&lp)?;
    check_dual_status(model, &sol)?;
    Ok(certificate_from(model, &constraints, &sol.x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BindingClass {
    DefinitelyBinding,
    DegeneratelyBinding,
    DefinitelySlack,
}

impl BindingClass {
    pub fn from_range(lo: f64, hi: f64, tau: f64) -> Self {
        if lo > tau {
            BindingClass::DefinitelyBinding
        } else if hi > tau {
            BindingClass::DegeneratelyBinding
        } else {
            BindingClass::DefinitelySlack
        }
    }
}

impl fmt::Display for BindingClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BindingClass::DefinitelyBinding => "definitely-binding",
            BindingClass::DegeneratelyBinding => "degenerately-binding",
            BindingClass::DefinitelySlack => "definitely-slack",
        })
    }
}

/// Range of one multiplier over all optimal certificates. `hi` is infinite
/// when the optimal set is unbounded in that coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierRange {
    pub constraint: Constraint,
    pub lo: f64,
    pub hi: f64,
    pub class: BindingClass,
}

impl MultiplierRange {
    fn new(constraint: Constraint, lo: f64, hi: f64) -> Self {
        let lo = lo.max(0.0);
        let hi = hi.max(lo);
        MultiplierRange {
            constraint,
            lo,
            hi,
            class: BindingClass::from_range(lo, hi, TAU),
        }
    }

    fn absent(constraint: Constraint) -> Self {
        MultiplierRange::new(constraint, 0.0, 0.0)
    }
}

/// The dual support problem solved once, ready for per-coordinate range
/// queries over its optimal face.
pub struct DualFace {
    lp: LpProblem,
    constraints: Vec<Constraint>,
    optimum: LpSolution,
    rows: usize,
    certificate: DualCertificate,
}

impl DualFace {
    pub fn new(model: &NetworkModel, y: &PriceVector) -> Result<Self, AttributionError> {
        y.check(model)?;
        let (lp, constraints) = dual_problem(model, y);
        let optimum = solve(&lp)?;
        check_dual_status(model, &optimum)?;
        let certificate = certificate_from(model, &constraints, &optimum.x);
        Ok(DualFace {
            lp,
            constraints,
            optimum,
            rows: model.rows(),
            certificate,
        })
    }

    /// Support value `φ(b; y)`.
    pub fn value(&self) -> f64 {
        -self.optimum.objective
    }

    pub fn certificate(&self) -> &DualCertificate {
        &self.certificate
    }

    pub fn range(&self, c: Constraint) -> Result<MultiplierRange, AttributionError> {
        let Some(v) = self.constraints.iter().position(|x| *x == c) else {
            return Ok(MultiplierRange::absent(c));
        };
        let mut e = vec![0.0; self.lp.num_vars()];
        e[v] = 1.0;
        let lo = optimize_over_optimal_face(&self.lp, &self.optimum, &e, Sense::Minimize)?;
        let hi = optimize_over_optimal_face(&self.lp, &self.optimum, &e, Sense::Maximize)?;
        let hi = match hi.status {
            LpStatus::Unbounded => f64::INFINITY,
            _ => hi.objective,
        };
        Ok(MultiplierRange::new(c, lo.objective, hi))
    }

    /// Smallest total weight `Σ μ_c` over `set` among optimal certificates.
    pub fn min_total_weight(&self, set: &[Constraint]) -> Result<f64, AttributionError> {
        let mut e = vec![0.0; self.lp.num_vars()];
        let mut any = false;
        for c in set {
            if let Some(v) = self.constraints.iter().position(|x| x == c) {
                e[v] = 1.0;
                any = true;
            }
        }
        if !any {
            return Ok(0.0);
        }
        let sol = optimize_over_optimal_face(&self.lp, &self.optimum, &e, Sense::Minimize)?;
        Ok(sol.objective.max(0.0))
    }

    /// Ranges of every stacked constraint, in stacked order.
    pub fn all_ranges(&self) -> Result<Vec<MultiplierRange>, AttributionError> {
        (0..2 * self.rows)
            .into_par_iter()
            .map(|i| self.range(Constraint::from_stacked_index(i, self.rows)))
            .collect()
    }
}

/// Range of the multiplier on constraint `c` across all optimal certificates.
pub fn robust_bounds(
    model: &NetworkModel,
    y: &PriceVector,
    c: Constraint,
) -> Result<MultiplierRange, AttributionError> {
    if model.stacked_limit(c).is_none() {
        return Ok(MultiplierRange::absent(c));
    }
    DualFace::new(model, y)?.range(c)
}

/// One range per stacked constraint (`2mℓ` entries, upper sides first).
/// Absent constraints are reported slack without solving anything.
pub fn classify_all(model: &NetworkModel, y: &PriceVector) -> Result<Vec<MultiplierRange>, AttributionError> {
    DualFace::new(model, y)?.all_ranges()
}

/// One inequality of the sensitivity audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    pub constraint: Constraint,
    pub delta: f64,
    pub phi: f64,
    pub phi_loosened: f64,
    /// `None` when tightening empties the polytope.
    pub phi_tightened: Option<f64>,
    pub range: MultiplierRange,
    /// Multiplier values the inequalities were checked against: the solver
    /// certificate and both range endpoints.
    pub sampled: Vec<f64>,
    pub checks: Vec<SensitivityCheck>,
}

impl SensitivityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Re-solves the support problem with constraint `c` loosened and tightened
/// by `delta` and checks the bounds implied by every sampled optimal
/// multiplier `μ_c`:
///
/// * `φ(b + δe_c) <= φ(b) + δμ_c`, with equality when `μ_c` can be zero;
/// * `φ(b - δe_c) <= φ(b) - δμ_c`, strictly below `φ(b)` when every
///   optimal `μ_c` is positive.
pub fn sensitivity_check(
    model: &NetworkModel,
    y: &PriceVector,
    c: Constraint,
    delta: f64,
) -> Result<SensitivityReport, AttributionError> {
    let b = model
        .stacked_limit(c)
        .ok_or_else(|| LpError::Malformed(format!("constraint {} is absent", model.constraint_label(c))))?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(LpError::Malformed(format!("perturbation {delta} must be positive")).into());
    }
    let face = DualFace::new(model, y)?;
    let phi = face.value();
    let range = face.range(c)?;
    let mut sampled = vec![face.certificate().get(c), range.lo];
    if range.hi.is_finite() {
        sampled.push(range.hi);
    }

    let phi_loosened = support_value(&model.with_stacked_limit(c, b + delta), y)?.value;
    let phi_tightened = match support_value(&model.with_stacked_limit(c, b - delta), y) {
        Ok(r) => Some(r.value),
        Err(SupportError::Infeasible { .. }) => None,
        Err(e) => return Err(e.into()),
    };

    let tol = SENSITIVITY_TOL * phi.abs().max(1.0);
    let mut checks = Vec::new();
    for &mu in &sampled {
        let rhs = phi + delta * mu;
        checks.push(SensitivityCheck {
            name: format!("loosen <= phi + delta*{mu:.6}"),
            lhs: phi_loosened,
            rhs,
            passed: phi_loosened <= rhs + tol,
        });
        let rhs = phi - delta * mu;
        let lhs = phi_tightened.unwrap_or(f64::NEG_INFINITY);
        checks.push(SensitivityCheck {
            name: format!("tighten <= phi - delta*{mu:.6}"),
            lhs,
            rhs,
            passed: lhs <= rhs + tol,
        });
    }
    checks.push(SensitivityCheck {
        name: "loosen >= phi".into(),
        lhs: phi_loosened,
        rhs: phi,
        passed: phi_loosened >= phi - tol,
    });
    if range.lo <= TAU {
        checks.push(SensitivityCheck {
            name: "loosen = phi (zero multiplier attainable)".into(),
            lhs: phi_loosened,
            rhs: phi,
            passed: (phi_loosened - phi).abs() <= tol + delta * range.lo,
        });
    } else {
        let lhs = phi_tightened.unwrap_or(f64::NEG_INFINITY);
        checks.push(SensitivityCheck {
            name: "tighten < phi (multiplier positive on every optimum)".into(),
            lhs,
            rhs: phi,
            passed: lhs < phi - tol.min(0.5 * delta * range.lo),
        });
    }
    Ok(SensitivityReport {
        constraint: c,
        delta,
        phi,
        phi_loosened,
        phi_tightened,
        range,
        sampled,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{stack_model, Contingency, Limit, LimitVector, Line, Market, Topology};

    fn triangle() -> Topology {
        Topology::new(
            vec!["S".into(), "C".into(), "L".into()],
            vec![
                Line::new("SL", "S", "L", 1.0),
                Line::new("SC", "S", "C", 1.0),
                Line::new("CL", "C", "L", 1.0),
            ],
            "L",
        )
        .unwrap()
    }

    fn toy() -> NetworkModel {
        let limits = LimitVector::new(vec![
            Limit::symmetric(75.0),
            Limit::symmetric(25.0),
            Limit::ABSENT,
        ]);
        stack_model(&triangle(), &[Contingency::base("B")], limits, Market::Dam).unwrap()
    }

    #[test]
    fn pattern_a_certificate() {
        let m = toy();
        let y = PriceVector::from_entries(&m, &[("B", "SL", 435.0)]).unwrap();
        let cert = dual_support(&m, &y).unwrap();
        assert!((cert.objective - 32625.0).abs() < 1e-8);
        assert!((cert.mu_upper[0] - 435.0).abs() < 1e-8);
        assert!(cert.mu().iter().enumerate().all(|(i, v)| i == 0 || v.abs() < 1e-9));
        assert!(cert.feasibility_residual(&m, &y) < 1e-8);
    }

    #[test]
    fn zero_direction_certificate() {
        let m = toy();
        let cert = dual_support(&m, &PriceVector::zeros(3)).unwrap();
        assert_eq!(cert.objective, 0.0);
        assert!(cert.s.abs() < 1e-12);
        let ranges = classify_all(&m, &PriceVector::zeros(3)).unwrap();
        assert!(ranges.iter().all(|r| r.class == BindingClass::DefinitelySlack));
    }

    #[test]
    fn pattern_a_classes() {
        let m = toy();
        let y = PriceVector::from_entries(&m, &[("B", "SL", 435.0)]).unwrap();
        let ranges = classify_all(&m, &y).unwrap();
        assert_eq!(ranges.len(), 6);
        assert_eq!(ranges[0].class, BindingClass::DefinitelyBinding);
        assert!((ranges[0].lo - 435.0).abs() < 1e-7 && (ranges[0].hi - 435.0).abs() < 1e-7);
        for i in [1, 2, 3, 4, 5] {
            assert_eq!(ranges[i].class, BindingClass::DefinitelySlack, "{i}");
        }
        let cl = robust_bounds(&m, &y, Constraint::upper(2)).unwrap();
        assert_eq!((cl.lo, cl.hi), (0.0, 0.0));
    }

    #[test]
    fn duplicated_row_is_degenerate() {
        // Two parallel copies of SL carrying the same limit in separate
        // blocks of a base-case-only stack.
        let limits = LimitVector::new(vec![
            Limit::symmetric(75.0),
            Limit::symmetric(25.0),
            Limit::ABSENT,
            Limit::symmetric(75.0),
            Limit::symmetric(25.0),
            Limit::ABSENT,
        ]);
        let m = stack_model(
            &triangle(),
            &[Contingency::base("B"), Contingency::base("B2")],
            limits,
            Market::Dam,
        )
        .unwrap();
        let y = PriceVector::from_entries(&m, &[("B", "SL", 435.0)]).unwrap();
        for row in [0, 3] {
            let r = robust_bounds(&m, &y, Constraint::upper(row)).unwrap();
            assert!(r.lo.abs() < 1e-7 && (r.hi - 435.0).abs() < 1e-6, "{r:?}");
            assert_eq!(r.class, BindingClass::DegeneratelyBinding);
        }
    }

    #[test]
    fn canonicalization_keeps_net() {
        let m = toy();
        let cert = DualCertificate::new(&m, vec![5.0, 0.0, 0.0], vec![2.0, 0.0, 0.0], 0.0);
        let c = cert.canonicalized(&m);
        assert_eq!(c.mu_upper[0], 3.0);
        assert_eq!(c.mu_lower[0], 0.0);
        assert_eq!(c.net(0), cert.net(0));
    }

    #[test]
    fn tightening_a_binding_limit() {
        let m = toy();
        let y = PriceVector::from_entries(&m, &[("B", "SL", 435.0)]).unwrap();
        let r = sensitivity_check(&m, &y, Constraint::upper(0), 18.75).unwrap();
        assert!(r.passed(), "{r:#?}");
        assert!((r.phi - r.phi_tightened.unwrap() - 8156.25).abs() < 1e-7);
        let r = sensitivity_check(&m, &y, Constraint::upper(1), 5.0).unwrap();
        assert!(r.passed(), "{r:#?}");
        assert!((r.phi_tightened.unwrap() - r.phi).abs() < 1e-7);
    }
}
