//! Day-ahead market and FTR auction clearing over network-feasible
//! injections, LMP decomposition, surplus and FTR settlement.
//!
//! Prices follow `λ = s·1 - Kᵀy` with `y = y_upper - y_lower` the net flow
//! shadow prices. A withdrawal unit (direction -1) bids its willingness to
//! pay as a negative price in the cost objective, so fixed loads are units
//! with equal quantity bounds.

use thiserror::Error;

use crate::lpsolve::{optimize_over_optimal_face, solve, LpError, LpProblem, LpSolution, LpStatus, Sense};
use crate::netmodel::{Constraint, NetworkModel, Side};
use crate::support::{support_value, PriceVector, SupportError};

/// Residual tolerance of the KKT audit, relative to the data scale.
pub const KKT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClearingError {
    #[error("bid set is empty")]
    EmptyBids,
    #[error("bid `{bid}` references unknown node `{node}`")]
    UnknownNode { bid: String, node: String },
    #[error("bid `{0}` has inverted or non-finite quantity bounds")]
    BadBounds(String),
    #[error("bid `{0}` has a non-finite price")]
    BadPrice(String),
    #[error("unit `{0}` must have direction +1 or -1")]
    BadDirection(String),
    #[error("FTR bid `{0}` has identical source and sink")]
    SameSourceSink(String),
    #[error("clearing is infeasible: no dispatch satisfies the bids and network limits")]
    Infeasible,
    #[error("clearing is unbounded: bids are ill-posed")]
    Unbounded,
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Support(#[from] SupportError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DamUnit {
    pub id: String,
    pub node: String,
    /// `+1` for injection, `-1` for withdrawal.
    pub direction: f64,
    pub min: f64,
    pub max: f64,
    pub price: f64,
}

impl DamUnit {
    pub fn new(id: &str, node: &str, direction: f64, min: f64, max: f64, price: f64) -> Self {
        DamUnit {
            id: id.to_string(),
            node: node.to_string(),
            direction,
            min,
            max,
            price,
        }
    }

    pub fn generator(id: &str, node: &str, max: f64, price: f64) -> Self {
        DamUnit::new(id, node, 1.0, 0.0, max, price)
    }

    /// Inelastic withdrawal of `quantity`.
    pub fn fixed_load(id: &str, node: &str, quantity: f64) -> Self {
        DamUnit::new(id, node, -1.0, quantity, quantity, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DamBidSet {
    pub units: Vec<DamUnit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FtrBid {
    pub id: String,
    pub source: String,
    pub sink: String,
    pub min: f64,
    pub max: f64,
    pub price: f64,
}

impl FtrBid {
    pub fn new(id: &str, source: &str, sink: &str, min: f64, max: f64, price: f64) -> Self {
        FtrBid {
            id: id.to_string(),
            source: source.to_string(),
            sink: sink.to_string(),
            min,
            max,
            price,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FtrBidSet {
    pub bids: Vec<FtrBid>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClearingResult {
    /// Cleared quantity per unit or bid, in input order.
    pub awards: Vec<f64>,
    /// Net nodal injections `q*`.
    pub injections: Vec<f64>,
    /// Total bid-in cost (day-ahead) or total bid value (FTR).
    pub objective: f64,
    pub lmp: Vec<f64>,
    /// Energy component of the LMPs.
    pub s: f64,
    /// Net flow shadow prices `y_upper - y_lower`.
    pub y: PriceVector,
    pub y_upper: Vec<f64>,
    pub y_lower: Vec<f64>,
    /// Merchandising surplus (day-ahead) or payout at the auction's own
    /// prices (FTR): `yᵀK q*`.
    pub surplus: f64,
}

/// A cleared product as a column of nodal coefficients with a cost.
struct Column {
    coeffs: Vec<(usize, f64)>,
    min: f64,
    max: f64,
    cost: f64,
}

fn node(model: &NetworkModel, bid: &str, id: &str) -> Result<usize, ClearingError> {
    model
        .topology()
        .node_index(id)
        .ok_or_else(|| ClearingError::UnknownNode {
            bid: bid.to_string(),
            node: id.to_string(),
        })
}

fn check_bounds(id: &str, min: f64, max: f64, price: f64) -> Result<(), ClearingError> {
    if !(min.is_finite() && max.is_finite() && min <= max) {
        return Err(ClearingError::BadBounds(id.to_string()));
    }
    if !price.is_finite() {
        return Err(ClearingError::BadPrice(id.to_string()));
    }
    Ok(())
}

fn dam_columns(model: &NetworkModel, bids: &DamBidSet) -> Result<Vec<Column>, ClearingError> {
    bids.units
        .iter()
        .map(|u| {
            check_bounds(&u.id, u.min, u.max, u.price)?;
            if u.direction != 1.0 && u.direction != -1.0 {
                return Err(ClearingError::BadDirection(u.id.clone()));
            }
            Ok(Column {
                coeffs: vec![(node(model, &u.id, &u.node)?, u.direction)],
                min: u.min,
                max: u.max,
                cost: u.price,
            })
        })
        .collect()
}

fn ftr_columns(model: &NetworkModel, bids: &FtrBidSet) -> Result<Vec<Column>, ClearingError> {
    bids.bids
        .iter()
        .map(|b| {
            check_bounds(&b.id, b.min, b.max, b.price)?;
            let src = node(model, &b.id, &b.source)?;
            let snk = node(model, &b.id, &b.sink)?;
            if src == snk {
                return Err(ClearingError::SameSourceSink(b.id.clone()));
            }
            Ok(Column {
                coeffs: vec![(src, 1.0), (snk, -1.0)],
                min: b.min,
                max: b.max,
                cost: -b.price,
            })
        })
        .collect()
}

fn injections(n: usize, cols: &[Column], x: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; n];
    for (col, &v) in cols.iter().zip(x) {
        for &(k, a) in &col.coeffs {
            q[k] += a * v;
        }
    }
    q
}

/// `min Σ cost·x` over bounds, network limits and balance, as a maximization.
fn clearing_problem(model: &NetworkModel, cols: &[Column]) -> (LpProblem, Vec<Constraint>) {
    let k = model.k();
    let mut lp = LpProblem::maximize(cols.iter().map(|c| -c.cost).collect());
    // K M, column by column.
    let km: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| {
            (0..model.rows())
                .map(|i| c.coeffs.iter().map(|&(j, a)| a * k[(i, j)]).sum())
                .collect()
        })
        .collect();
    let constraints = model.finite_constraints();
    for c in &constraints {
        let sign = match c.side {
            Side::Upper => 1.0,
            Side::Lower => -1.0,
        };
        lp.add_le(
            km.iter().map(|col| sign * col[c.row]).collect(),
            model.stacked_limit(*c).expect("finite constraint"),
        );
    }
    lp.add_eq(
        cols.iter()
            .map(|c| c.coeffs.iter().map(|&(_, a)| a).sum())
            .collect(),
        0.0,
    );
    for (v, c) in cols.iter().enumerate() {
        lp.set_bounds(v, Some(c.min), Some(c.max));
    }
    (lp, constraints)
}

fn clear(model: &NetworkModel, cols: &[Column]) -> Result<ClearingResult, ClearingError> {
    let (lp, constraints) = clearing_problem(model, cols);
    let primary = solve(&lp)?;
    match primary.status {
        LpStatus::Infeasible => return Err(ClearingError::Infeasible),
        LpStatus::Unbounded => return Err(ClearingError::Unbounded),
        LpStatus::Optimal => {}
    }
    // Among optimal dispatches prefer lower input indices.
    let u = cols.len() as f64;
    let weights: Vec<f64> = (0..cols.len()).map(|i| (u - i as f64) / u).collect();
    let awards = match optimize_over_optimal_face(&lp, &primary, &weights, Sense::Maximize) {
        Ok(sol) if sol.is_optimal() => sol.x,
        _ => primary.x.clone(),
    };
    Ok(result_from(model, cols, &constraints, &primary, awards))
}

fn result_from(
    model: &NetworkModel,
    cols: &[Column],
    constraints: &[Constraint],
    primary: &LpSolution,
    awards: Vec<f64>,
) -> ClearingResult {
    let rows = model.rows();
    let mut y_upper = vec![0.0; rows];
    let mut y_lower = vec![0.0; rows];
    for (c, &mu) in constraints.iter().zip(&primary.ineq_duals) {
        match c.side {
            Side::Upper => y_upper[c.row] = mu.max(0.0),
            Side::Lower => y_lower[c.row] = mu.max(0.0),
        }
    }
    let y: Vec<f64> = y_upper.iter().zip(&y_lower).map(|(a, b)| a - b).collect();
    let s = -primary.eq_duals[0];
    let g = model.price_direction(&y);
    let lmp: Vec<f64> = g.iter().map(|gk| s - gk).collect();
    let q = injections(model.num_nodes(), cols, &awards);
    let flows = model.flows(&q);
    let surplus = y.iter().zip(&flows).map(|(a, b)| a * b).sum();
    let objective = cols.iter().zip(&awards).map(|(c, x)| c.cost * x).sum::<f64>();
    ClearingResult {
        awards,
        injections: q,
        objective,
        lmp,
        s,
        y: PriceVector::new(y),
        y_upper,
        y_lower,
        surplus,
    }
}

/// Minimizes total bid-in cost subject to network feasibility.
pub fn clear_dam(model: &NetworkModel, bids: &DamBidSet) -> Result<ClearingResult, ClearingError> {
    if bids.units.is_empty() {
        return Err(ClearingError::EmptyBids);
    }
    let cols = dam_columns(model, bids)?;
    clear(model, &cols)
}

/// Maximizes total FTR bid value subject to simultaneous feasibility. The
/// reported `objective` is the total value of the awarded bids.
pub fn clear_ftr(model: &NetworkModel, bids: &FtrBidSet) -> Result<ClearingResult, ClearingError> {
    if bids.bids.is_empty() {
        let n = model.num_nodes();
        let rows = model.rows();
        return Ok(ClearingResult {
            awards: Vec::new(),
            injections: vec![0.0; n],
            objective: 0.0,
            lmp: vec![0.0; n],
            s: 0.0,
            y: PriceVector::zeros(rows),
            y_upper: vec![0.0; rows],
            y_lower: vec![0.0; rows],
            surplus: 0.0,
        });
    }
    let cols = ftr_columns(model, bids)?;
    let mut r = clear(model, &cols)?;
    r.objective = -r.objective;
    Ok(r)
}

/// Payout `-λᵀq` of FTR positions at day-ahead prices.
pub fn settle_ftr(awards: &ClearingResult, dam: &ClearingResult) -> f64 {
    -dam.lmp
        .iter()
        .zip(&awards.injections)
        .map(|(l, q)| l * q)
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settlement {
    pub payout: f64,
    /// Largest payout any FTR-feasible position could receive.
    pub po_max: f64,
    pub within_bound: bool,
}

/// Settlement together with its bound `φ(g̲, ḡ; y*)` over the FTR model.
pub fn settle_with_bound(
    awards: &ClearingResult,
    dam: &ClearingResult,
    ftr_model: &NetworkModel,
) -> Result<Settlement, ClearingError> {
    let payout = settle_ftr(awards, dam);
    let po_max = support_value(ftr_model, &dam.y)?.value;
    Ok(Settlement {
        payout,
        po_max,
        within_bound: payout <= po_max + 1e-6 * po_max.abs().max(1.0),
    })
}

/// Residuals of the clearing optimality conditions for a candidate
/// dispatch and shadow prices.
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// Largest network, bound or balance violation of the dispatch.
    pub primal: f64,
    /// Largest violation of the per-unit price conditions.
    pub stationarity: f64,
    /// Largest `|y_i|·slack_i`, with infinite slack on absent sides.
    pub complementarity: f64,
    /// Energy component used (derived when not supplied).
    pub s: f64,
    pub passed: bool,
}

fn audit(
    model: &NetworkModel,
    cols: &[Column],
    awards: &[f64],
    y: &PriceVector,
    s: Option<f64>,
) -> Result<KktReport, ClearingError> {
    y.check(model)?;
    if awards.len() != cols.len() {
        return Err(LpError::Malformed(format!(
            "{} awards for {} bids",
            awards.len(),
            cols.len()
        ))
        .into());
    }
    let q = injections(model.num_nodes(), cols, awards);
    let flows = model.flows(&q);
    let g = model.price_direction(y.values());
    let limit_scale = model
        .finite_constraints()
        .iter()
        .filter_map(|c| model.stacked_limit(*c))
        .chain(cols.iter().flat_map(|c| [c.min, c.max]))
        .fold(1.0f64, |a, v| a.max(v.abs()));
    let price_scale = cols
        .iter()
        .map(|c| c.cost)
        .chain(y.values().iter().copied())
        .fold(1.0f64, |a, v| a.max(v.abs()));
    let qtol = KKT_TOL * limit_scale;

    let mut primal = q.iter().sum::<f64>().abs();
    for (col, &x) in cols.iter().zip(awards) {
        primal = primal.max(col.min - x).max(x - col.max);
    }
    let mut complementarity: f64 = 0.0;
    for (i, &f) in flows.iter().enumerate() {
        let lim = model.limits().get(i);
        if let Some(hi) = lim.upper.value() {
            primal = primal.max(f - hi);
        }
        if let Some(lo) = lim.lower.value() {
            primal = primal.max(lo - f);
        }
        let yi = y.values()[i];
        let slack = if yi > 0.0 {
            lim.upper.value().map_or(f64::INFINITY, |hi| (hi - f).abs())
        } else if yi < 0.0 {
            lim.lower.value().map_or(f64::INFINITY, |lo| (f - lo).abs())
        } else {
            0.0
        };
        complementarity = complementarity.max(yi.abs() * slack);
    }

    // Reduced cost r(s) = cost - Σ_k a_k (s - g_k) = base - total·s.
    let terms: Vec<(f64, f64, usize)> = cols
        .iter()
        .enumerate()
        .map(|(u, col)| {
            let base = col.cost + col.coeffs.iter().map(|&(k, a)| a * g[k]).sum::<f64>();
            let total = col.coeffs.iter().map(|&(_, a)| a).sum::<f64>();
            (base, total, u)
        })
        .collect();
    let at_min = |u: usize| awards[u] <= cols[u].min + qtol;
    let at_max = |u: usize| awards[u] >= cols[u].max - qtol;
    let s = s.unwrap_or_else(|| {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for &(base, total, u) in &terms {
            if total == 0.0 || (at_min(u) && at_max(u)) {
                continue;
            }
            // r >= 0 at min, r <= 0 at max, r = 0 in between.
            let root = base / total;
            let (need_ge, need_le) = match (at_min(u), at_max(u)) {
                (true, false) => (total < 0.0, total > 0.0),
                (false, true) => (total > 0.0, total < 0.0),
                _ => (true, true),
            };
            if need_le {
                hi = hi.min(root);
            }
            if need_ge {
                lo = lo.max(root);
            }
        }
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo,
            (false, true) => hi,
            (false, false) => 0.0,
        }
    });
    let mut stationarity: f64 = 0.0;
    for &(base, total, u) in &terms {
        let r = base - total * s;
        let v = match (at_min(u), at_max(u)) {
            (true, true) => 0.0,
            (true, false) => (-r).max(0.0),
            (false, true) => r.max(0.0),
            (false, false) => r.abs(),
        };
        stationarity = stationarity.max(v);
    }
    let passed = primal <= qtol
        && stationarity <= KKT_TOL * price_scale
        && complementarity <= KKT_TOL * price_scale * limit_scale;
    Ok(KktReport {
        primal: primal.max(0.0),
        stationarity,
        complementarity,
        s,
        passed,
    })
}

/// Audits a day-ahead dispatch against shadow prices `y`. When `s` is
/// `None` the energy component is chosen from the interval the marginal
/// conditions allow.
pub fn audit_dam(
    model: &NetworkModel,
    bids: &DamBidSet,
    awards: &[f64],
    y: &PriceVector,
    s: Option<f64>,
) -> Result<KktReport, ClearingError> {
    audit(model, &dam_columns(model, bids)?, awards, y, s)
}

pub fn audit_ftr(
    model: &NetworkModel,
    bids: &FtrBidSet,
    awards: &[f64],
    y: &PriceVector,
) -> Result<KktReport, ClearingError> {
    audit(model, &ftr_columns(model, bids)?, awards, y, Some(0.0))
}

impl ClearingResult {
    /// Largest deviation of `λ` from `s·1 - Kᵀy`.
    pub fn decomposition_residual(&self, model: &NetworkModel) -> f64 {
        let g = model.price_direction(self.y.values());
        self.lmp
            .iter()
            .zip(&g)
            .map(|(l, gk)| (l - (self.s - gk)).abs())
            .fold(0.0, f64::max)
    }

    /// `-λᵀq*`, equal to `surplus` under power balance.
    pub fn rent(&self) -> f64 {
        -self
            .lmp
            .iter()
            .zip(&self.injections)
            .map(|(l, q)| l * q)
            .sum::<f64>()
    }
}
