//! Support function of the network-feasible injection polytope and the
//! alignment gap between a day-ahead and an FTR model.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::attribution::DualCertificate;
use crate::clearing::ClearingResult;
use crate::lpsolve::{solve, LpError, LpProblem, LpStatus};
use crate::netmodel::{Constraint, NetworkModel, Side};

/// Threshold below which a support value counts as zero.
pub const ZERO_SUPPORT: f64 = 1e-6;
/// Relative tolerance for calling a gap zero.
pub const ALIGNED_TOL: f64 = 1e-6;
/// Relative tolerance of the merchandising-surplus identity.
pub const IDENTITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SupportError {
    #[error("support of the {market} model is unbounded (missing limits)")]
    Unbounded { market: String },
    #[error("the {market} model has an empty feasible set")]
    Infeasible { market: String },
    #[error("price vector has {got} entries, model has {expected} rows")]
    Length { expected: usize, got: usize },
    #[error("price vector has a non-finite entry at row {0}")]
    NonFinite(usize),
    #[error("models do not share a common network representation")]
    GeometryMismatch,
    #[error("unknown row {contingency}:{line}")]
    UnknownRow { contingency: String, line: String },
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Shadow-price direction over the stacked `(contingency, line)` rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceVector(Vec<f64>);

impl PriceVector {
    pub fn new(values: Vec<f64>) -> Self {
        PriceVector(values)
    }

    pub fn zeros(rows: usize) -> Self {
        PriceVector(vec![0.0; rows])
    }

    /// Sparse construction from `(contingency, line, value)` triples; repeated
    /// rows accumulate.
    pub fn from_entries(
        model: &NetworkModel,
        entries: &[(&str, &str, f64)],
    ) -> Result<Self, SupportError> {
        let mut y = vec![0.0; model.rows()];
        for &(c, l, v) in entries {
            let row = model
                .row_index(c, l)
                .ok_or_else(|| SupportError::UnknownRow {
                    contingency: c.to_string(),
                    line: l.to_string(),
                })?;
            y[row] += v;
        }
        Ok(PriceVector(y))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, t: f64) -> PriceVector {
        PriceVector(self.0.iter().map(|v| v * t).collect())
    }

    pub fn add(&self, other: &PriceVector) -> PriceVector {
        PriceVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Nonzero entries as `(row, value)`.
    pub fn support(&self) -> Vec<(usize, f64)> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .collect()
    }

    pub(crate) fn check(&self, model: &NetworkModel) -> Result<(), SupportError> {
        if self.0.len() != model.rows() {
            return Err(SupportError::Length {
                expected: model.rows(),
                got: self.0.len(),
            });
        }
        match self.0.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(SupportError::NonFinite(i)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportResult {
    pub value: f64,
    /// Injection attaining the value.
    pub q: Vec<f64>,
    pub certificate: DualCertificate,
}

/// `max yᵀK q` over the polytope as an LP; inequality rows follow
/// `model.finite_constraints()`, and the single equality is `1ᵀq = 0`.
pub fn support_problem(model: &NetworkModel, y: &PriceVector) -> (LpProblem, Vec<Constraint>) {
    let k = model.k();
    let n = model.num_nodes();
    let mut lp = LpProblem::maximize(model.price_direction(y.values()));
    let constraints = model.finite_constraints();
    for c in &constraints {
        let sign = match c.side {
            Side::Upper => 1.0,
            Side::Lower => -1.0,
        };
        let row = (0..n).map(|j| sign * k[(c.row, j)]).collect();
        lp.add_le(row, model.stacked_limit(*c).expect("finite constraint"));
    }
    lp.add_eq(vec![1.0; n], 0.0);
    (lp, constraints)
}

/// Evaluates `φ(b̲, b̄; y)` with an attaining injection and dual certificate.
pub fn support_value(model: &NetworkModel, y: &PriceVector) -> Result<SupportResult, SupportError> {
    y.check(model)?;
    let (lp, constraints) = support_problem(model, y);
    let sol = solve(&lp)?;
    match sol.status {
        LpStatus::Unbounded => {
            return Err(SupportError::Unbounded {
                market: model.market().label().to_string(),
            })
        }
        LpStatus::Infeasible => {
            return Err(SupportError::Infeasible {
                market: model.market().label().to_string(),
            })
        }
        LpStatus::Optimal => {}
    }
    let rows = model.rows();
    let mut mu_upper = vec![0.0; rows];
    let mut mu_lower = vec![0.0; rows];
    for (c, &mu) in constraints.iter().zip(&sol.ineq_duals) {
        match c.side {
            Side::Upper => mu_upper[c.row] = mu.max(0.0),
            Side::Lower => mu_lower[c.row] = mu.max(0.0),
        }
    }
    let certificate = DualCertificate::new(model, mu_upper, mu_lower, sol.eq_duals[0]);
    Ok(SupportResult {
        value: sol.objective,
        q: sol.x,
        certificate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    UnderfundingRisk,
    HedgingInefficiency,
    Aligned,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::UnderfundingRisk => "underfunding-risk",
            Classification::HedgingInefficiency => "hedging-inefficiency",
            Classification::Aligned => "aligned",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentReport {
    pub ms_dam: f64,
    pub po_ftr_max: f64,
    pub gap: f64,
    pub ratio: Option<f64>,
    /// Why `ratio` is missing, when it is.
    pub ratio_note: Option<String>,
    pub classification: Classification,
}

pub fn classify_gap(gap: f64, ms_dam: f64) -> Classification {
    let tol = ALIGNED_TOL * ms_dam.abs().max(1.0);
    if gap > tol {
        Classification::UnderfundingRisk
    } else if gap < -tol {
        Classification::HedgingInefficiency
    } else {
        Classification::Aligned
    }
}

/// Support values of both models at `y`, their gap and ratio.
///
/// When the day-ahead support is at most [`ZERO_SUPPORT`] the ratio is left
/// undefined; the gap is still computed from both support values.
pub fn alignment(
    dam: &NetworkModel,
    ftr: &NetworkModel,
    y: &PriceVector,
) -> Result<AlignmentReport, SupportError> {
    if !dam.same_geometry(ftr) {
        return Err(SupportError::GeometryMismatch);
    }
    let ms_dam = support_value(dam, y)?.value;
    let po_ftr_max = support_value(ftr, y)?.value;
    Ok(report_from_values(ms_dam, po_ftr_max))
}

pub fn report_from_values(ms_dam: f64, po_ftr_max: f64) -> AlignmentReport {
    let gap = po_ftr_max - ms_dam;
    let (ratio, ratio_note) = if ms_dam > ZERO_SUPPORT {
        (Some(po_ftr_max / ms_dam), None)
    } else {
        (
            None,
            Some(format!(
                "day-ahead support {ms_dam:.3e} is at most {ZERO_SUPPORT:e}; ratio undefined"
            )),
        )
    };
    AlignmentReport {
        ms_dam,
        po_ftr_max,
        gap,
        ratio,
        ratio_note,
        classification: classify_gap(gap, ms_dam),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub merchandising_surplus: f64,
    pub support: f64,
    pub residual: f64,
    pub passed: bool,
}

/// Checks that the surplus of a clearing equals the support value of its
/// model at the clearing's shadow prices.
pub fn verify_support_identity(
    clearing: &ClearingResult,
    model: &NetworkModel,
) -> Result<IdentityReport, SupportError> {
    let support = support_value(model, &clearing.y)?.value;
    let residual = clearing.surplus - support;
    Ok(IdentityReport {
        merchandising_surplus: clearing.surplus,
        support,
        residual,
        passed: residual.abs() <= IDENTITY_TOL * support.abs().max(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{stack_model, Contingency, Limit, LimitVector, Line, Market, Topology};

    fn toy() -> NetworkModel {
        let topo = Topology::new(
            vec!["S".into(), "C".into(), "L".into()],
            vec![
                Line::new("SL", "S", "L", 1.0),
                Line::new("SC", "S", "C", 1.0),
                Line::new("CL", "C", "L", 1.0),
            ],
            "L",
        )
        .unwrap();
        let limits = LimitVector::new(vec![
            Limit::symmetric(75.0),
            Limit::symmetric(25.0),
            Limit::ABSENT,
        ]);
        stack_model(&topo, &[Contingency::base("B")], limits, Market::Dam).unwrap()
    }

    #[test]
    fn pattern_a_support() {
        let m = toy();
        let y = PriceVector::from_entries(&m, &[("B", "SL", 435.0)]).unwrap();
        let r = support_value(&m, &y).unwrap();
        assert!((r.value - 32625.0).abs() < 1e-8);
        assert!(m.is_feasible(&r.q, 1e-8));
        assert!((r.certificate.mu_upper[0] - 435.0).abs() < 1e-8);
        assert!((r.certificate.objective - r.value).abs() < 1e-8);
    }

    #[test]
    fn lower_side_pattern() {
        let m = toy();
        let y = PriceVector::from_entries(&m, &[("B", "SC", -59.375)]).unwrap();
        let r = support_value(&m, &y).unwrap();
        assert!((r.value - 1484.375).abs() < 1e-8);
        assert!((r.certificate.mu_lower[1] - 59.375).abs() < 1e-8);
    }

    #[test]
    fn zero_direction() {
        let m = toy();
        let r = support_value(&m, &PriceVector::zeros(3)).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn missing_limits_are_unbounded() {
        let m = toy()
            .with_limits(LimitVector::new(vec![Limit::ABSENT; 3]))
            .unwrap();
        let y = PriceVector::from_entries(&m, &[("B", "SL", 1.0)]).unwrap();
        let err = support_value(&m, &y).unwrap_err();
        assert!(err.to_string().contains("unbounded (missing limits)"));
    }

    #[test]
    fn identical_models_are_aligned() {
        let m = toy();
        let y = PriceVector::from_entries(&m, &[("B", "SL", 435.0)]).unwrap();
        let r = alignment(&m, &m, &y).unwrap();
        assert_eq!(r.gap, 0.0);
        assert_eq!(r.ratio, Some(1.0));
        assert_eq!(r.classification, Classification::Aligned);
    }

    #[test]
    fn zero_support_leaves_ratio_undefined() {
        let m = toy();
        let r = alignment(&m, &m, &PriceVector::zeros(3)).unwrap();
        assert!(r.ratio.is_none());
        assert!(r.ratio_note.is_some());
    }

    #[test]
    fn rejects_bad_lengths() {
        let m = toy();
        assert!(matches!(
            support_value(&m, &PriceVector::zeros(2)),
            Err(SupportError::Length { .. })
        ));
        assert!(PriceVector::from_entries(&m, &[("X", "SL", 1.0)]).is_err());
    }
}
