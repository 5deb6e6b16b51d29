//! Oracles and instance generators shared by the integration suites.
#![allow(dead_code)]

use ftr_align::clearing::{DamBidSet, DamUnit};
use ftr_align::lpsolve::{enumerate_vertices, LpProblem};
use ftr_align::netmodel::{
    stack_model, Constraint, Contingency, Limit, LimitVector, Line, Market, NetworkModel, Topology,
};
use ftr_align::random::{random_contingencies, random_limits, random_prices, random_topology};
use ftr_align::support::PriceVector;
use rand::Rng;

/// Guard large enough for every oracle instance built here.
pub const ORACLE_GUARD: usize = 64;

/// Dual of the support problem written out from `K` and the limits:
/// variables are one multiplier per enforced stacked constraint, then `s`;
/// `Σ_c μ_c a_c + s·1 = Kᵀy` row by row; maximize `-Σ_c b_c μ_c`.
pub fn dual_lp(model: &NetworkModel, y: &PriceVector) -> (LpProblem, Vec<Constraint>) {
    let k = model.k();
    let rows = model.rows();
    let n = model.num_nodes();
    let mut cons = Vec::new();
    for side in 0..2 {
        for r in 0..rows {
            let c = if side == 0 { Constraint::upper(r) } else { Constraint::lower(r) };
            if model.stacked_limit(c).is_some() {
                cons.push(c);
            }
        }
    }
    let objective: Vec<f64> = cons
        .iter()
        .map(|c| -model.stacked_limit(*c).unwrap())
        .chain(std::iter::once(0.0))
        .collect();
    let mut lp = LpProblem::maximize(objective);
    for j in 0..cons.len() {
        lp.set_bounds(j, Some(0.0), None);
    }
    for i in 0..n {
        let mut row: Vec<f64> = cons
            .iter()
            .map(|c| {
                let a = k[(c.row, i)];
                if c == &Constraint::upper(c.row) { a } else { -a }
            })
            .collect();
        row.push(1.0);
        let rhs: f64 = (0..rows).map(|r| k[(r, i)] * y.values()[r]).sum();
        lp.add_eq(row, rhs);
    }
    (lp, cons)
}

/// Support value and multiplier ranges over the optimal dual face, found by
/// enumerating every vertex of the dual feasible set and keeping those
/// within `tol` of the best objective. The face must be bounded, which
/// holds whenever every enforced limit is strictly zero-feasible.
pub fn face_vertex_ranges(model: &NetworkModel, y: &PriceVector, tol: f64) -> (f64, Vec<(Constraint, f64, f64)>) {
    let (lp, cons) = dual_lp(model, y);
    let vertices = enumerate_vertices(&lp, ORACLE_GUARD).expect("oracle instance within guard");
    assert!(!vertices.is_empty(), "dual feasible set has no vertex");
    let best = vertices.iter().map(|v| lp.evaluate(v)).fold(f64::NEG_INFINITY, f64::max);
    let face: Vec<&Vec<f64>> = vertices
        .iter()
        .filter(|v| lp.evaluate(v) >= best - tol * best.abs().max(1.0))
        .collect();
    let ranges = cons
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let lo = face.iter().map(|v| v[j]).fold(f64::INFINITY, f64::min);
            let hi = face.iter().map(|v| v[j]).fold(f64::NEG_INFINITY, f64::max);
            (*c, lo.max(0.0), hi.max(0.0))
        })
        .collect();
    (-best, ranges)
}

/// Small network for the vertex oracle: three or four nodes, up to two
/// blocks. With `duplicate` the second block is a copy of the base case
/// with identical limits, so every base row appears twice.
pub fn oracle_model<R: Rng>(rng: &mut R, duplicate: bool) -> NetworkModel {
    loop {
        let n = rng.random_range(3..=4);
        let topology = random_topology(rng, n);
        if topology.num_lines() > 5 {
            continue;
        }
        let l = topology.num_lines();
        if duplicate {
            let conts = vec![Contingency::base("B"), Contingency::base("B2")];
            let base = random_limits(rng, &topology, &[true]);
            let mut entries = base.entries().to_vec();
            entries.extend_from_slice(base.entries());
            let model = stack_model(&topology, &conts, LimitVector::new(entries), Market::Dam).unwrap();
            debug_assert_eq!(model.rows(), 2 * l);
            return model;
        }
        let outages = rng.random_range(0..=1);
        let conts = random_contingencies(rng, &topology, outages);
        let limits = random_limits(rng, &topology, &vec![true; conts.len()]);
        return stack_model(&topology, &conts, limits, Market::Dam).unwrap();
    }
}

/// Price vector that is nonzero somewhere on an enforced row.
pub fn priced<R: Rng>(rng: &mut R, model: &NetworkModel) -> PriceVector {
    loop {
        let y = random_prices(rng, model.rows());
        let touches = y
            .support()
            .iter()
            .any(|(r, _)| !model.limits().get(*r).is_absent());
        if touches {
            return y;
        }
    }
}

/// Two nodes joined by one line limited to `limit` MW in each direction.
pub fn two_node(limit: f64) -> NetworkModel {
    let topo = Topology::new(
        vec!["1".into(), "2".into()],
        vec![Line::new("L12", "1", "2", 1.0)],
        "2",
    )
    .unwrap();
    stack_model(
        &topo,
        &[Contingency::base("B")],
        LimitVector::new(vec![Limit::symmetric(limit)]),
        Market::Dam,
    )
    .unwrap()
}

/// Cheap generator at node 1, expensive generator and a 15 MW load at 2.
pub fn two_node_bids() -> DamBidSet {
    DamBidSet {
        units: vec![
            DamUnit::generator("g1", "1", 100.0, 10.0),
            DamUnit::generator("g2", "2", 100.0, 50.0),
            DamUnit::fixed_load("d2", "2", 15.0),
        ],
    }
}

/// Cheapest dispatch cost on a 0.25 MW grid for loads `(d1, d2)`, with the
/// flow on the line limited to `limit`.
fn two_node_cost(limit: f64, d1: f64, d2: f64) -> f64 {
    let total = d1 + d2;
    let mut best = f64::INFINITY;
    for k in 0..=400 {
        let g1 = 0.25 * k as f64;
        let g2 = total - g1;
        if !(0.0..=100.0).contains(&g2) || (g1 - d1).abs() > limit + 1e-9 {
            continue;
        }
        best = best.min(10.0 * g1 + 50.0 * g2);
    }
    best
}

/// Brute-force oracle for the two-node case: nodal prices as one-MW cost
/// increments, the congested dispatch, and the resulting rent
/// `Σ λ_i (d_i - g_i)`.
pub struct TwoNodeOracle {
    pub lmp: [f64; 2],
    pub g1: f64,
    pub rent: f64,
}

pub fn two_node_oracle(limit: f64) -> TwoNodeOracle {
    let base = two_node_cost(limit, 0.0, 15.0);
    let lmp = [
        two_node_cost(limit, 1.0, 15.0) - base,
        two_node_cost(limit, 0.0, 16.0) - base,
    ];
    let g1 = (0..=400)
        .map(|k| 0.25 * k as f64)
        .filter(|g1| (15.0 - g1) >= 0.0 && g1.abs() <= limit + 1e-9)
        .min_by(|a, b| {
            let ca = 10.0 * a + 50.0 * (15.0 - a);
            let cb = 10.0 * b + 50.0 * (15.0 - b);
            ca.total_cmp(&cb)
        })
        .unwrap();
    let g2 = 15.0 - g1;
    let rent = lmp[0] * (0.0 - g1) + lmp[1] * (15.0 - g2);
    TwoNodeOracle { lmp, g1, rent }
}
