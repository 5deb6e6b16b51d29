//! Seeded generators of random networks, price vectors, small LPs and
//! clearing instances for property suites and oracle checks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clearing::{DamBidSet, DamUnit};
use crate::lpsolve::LpProblem;
use crate::netmodel::{
    apply_contingency, stack_model, Contingency, Limit, LimitVector, Line, Market, NetworkModel,
    Topology,
};
use crate::support::PriceVector;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Connected topology on `n` nodes: a random spanning tree plus a few chords.
pub fn random_topology<R: Rng>(rng: &mut R, n: usize) -> Topology {
    let nodes: Vec<String> = (0..n).map(|i| format!("N{i}")).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for k in 1..n {
        let parent = order[rng.random_range(0..k)];
        edges.push((parent, order[k]));
    }
    let chords = rng.random_range(1..=n.saturating_sub(1).max(1));
    for _ in 0..chords {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b && !edges.iter().any(|&(u, v)| (u, v) == (a, b) || (u, v) == (b, a)) {
            edges.push((a, b));
        }
    }
    let lines = edges
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| Line::new(&format!("L{k}"), &nodes[a], &nodes[b], rng.random_range(0.5..2.0)))
        .collect();
    let slack = nodes[n - 1].clone();
    Topology::new(nodes, lines, &slack).expect("generated topology is valid")
}

/// Base case plus up to `outages` single-line outages that keep the
/// network connected.
pub fn random_contingencies<R: Rng>(rng: &mut R, topology: &Topology, outages: usize) -> Vec<Contingency> {
    let mut out = vec![Contingency::base("B")];
    let mut ids: Vec<String> = topology.lines().iter().map(|l| l.id.clone()).collect();
    ids.shuffle(rng);
    for id in ids {
        if out.len() > outages {
            break;
        }
        let c = Contingency::outage(&format!("X{id}"), &[id.as_str()]);
        if apply_contingency(topology, &c).is_ok() {
            out.push(c);
        }
    }
    out
}

/// Strictly zero-feasible limit with finite sides.
pub fn random_limit<R: Rng>(rng: &mut R) -> Limit {
    let upper = rng.random_range(5.0..150.0);
    let lower = if rng.random_bool(0.7) {
        -upper
    } else {
        -rng.random_range(5.0..150.0)
    };
    Limit::new(lower, upper)
}

/// Limits for the blocks flagged in `enforced`; the base block is always
/// fully finite so every support value is bounded.
pub fn random_limits<R: Rng>(rng: &mut R, topology: &Topology, enforced: &[bool]) -> LimitVector {
    let l = topology.num_lines();
    let mut entries = Vec::with_capacity(enforced.len() * l);
    for (c, &on) in enforced.iter().enumerate() {
        for _ in 0..l {
            entries.push(if on && (c == 0 || rng.random_bool(0.85)) {
                random_limit(rng)
            } else {
                Limit::ABSENT
            });
        }
    }
    LimitVector::new(entries)
}

/// Network with `3..=5` nodes and `1..=3` contingency blocks, all enforced.
pub fn random_model<R: Rng>(rng: &mut R) -> NetworkModel {
    let n = rng.random_range(3..=5);
    let topology = random_topology(rng, n);
    let outages = rng.random_range(0..=2);
    let conts = random_contingencies(rng, &topology, outages);
    let limits = random_limits(rng, &topology, &vec![true; conts.len()]);
    stack_model(&topology, &conts, limits, Market::Dam).expect("generated model is valid")
}

/// Two models over the same contingencies that differ by whole blocks: the
/// first enforces a strict subset of the second's blocks (base always on).
pub fn random_block_pair<R: Rng>(rng: &mut R) -> (NetworkModel, NetworkModel) {
    loop {
        let n = rng.random_range(3..=5);
        let topology = random_topology(rng, n);
        let outages = rng.random_range(1..=2);
        let conts = random_contingencies(rng, &topology, outages);
        if conts.len() < 2 {
            continue;
        }
        let full = random_limits(rng, &topology, &vec![true; conts.len()]);
        let l = topology.num_lines();
        let mut small = full.clone();
        let mut dropped = false;
        for c in 1..conts.len() {
            if !dropped || rng.random_bool(0.3) {
                for k in 0..l {
                    small.set(c * l + k, Limit::ABSENT);
                }
                dropped = true;
            }
        }
        let big = stack_model(&topology, &conts, full, Market::Ftr).expect("valid");
        let small = stack_model(&topology, &conts, small, Market::Dam).expect("valid");
        // Outaged rows already carry absent limits, so a block may coincide.
        if (1..conts.len()).any(|c| !big.block_absent(c)) {
            return (small, big);
        }
    }
}

/// Sparse price vector with at least one nonzero entry.
pub fn random_prices<R: Rng>(rng: &mut R, rows: usize) -> PriceVector {
    loop {
        let y: Vec<f64> = (0..rows)
            .map(|_| {
                if rng.random_bool(0.4) {
                    rng.random_range(-100.0..100.0)
                } else {
                    0.0
                }
            })
            .collect();
        if y.iter().any(|v| *v != 0.0) {
            return PriceVector::new(y);
        }
    }
}

/// Bounded LP with `1..=4` variables and at most 8 inequality rows. Every
/// variable has a finite lower bound and one row has positive coefficients,
/// which keeps the region bounded; an equality row is added occasionally.
pub fn random_lp<R: Rng>(rng: &mut R) -> LpProblem {
    let n = rng.random_range(1..=4);
    let objective = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    let mut lp = LpProblem::maximize(objective);
    for j in 0..n {
        let upper = rng.random_bool(0.3).then(|| rng.random_range(1.0..10.0));
        lp.set_bounds(j, Some(-rng.random_range(0.0..10.0)), upper);
    }
    lp.add_le((0..n).map(|_| rng.random_range(0.2..3.0)).collect(), rng.random_range(1.0..20.0));
    for _ in 0..rng.random_range(0..=7) {
        let row: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.8) { rng.random_range(-3.0..3.0) } else { 0.0 })
            .collect();
        lp.add_le(row, rng.random_range(-2.0..10.0));
    }
    if n > 1 && rng.random_bool(0.2) {
        let row = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        lp.add_eq(row, rng.random_range(-1.0..1.0));
    }
    lp
}

/// Random feasible day-ahead instance: cheap generators spread over the
/// network, fixed loads, and a local expensive generator at every load node
/// so that serving each load locally is always feasible.
pub fn random_clearing<R: Rng>(rng: &mut R) -> (NetworkModel, DamBidSet) {
    let model = random_model(rng);
    let nodes: Vec<String> = model.topology().nodes().to_vec();
    let mut units = Vec::new();
    for (i, node) in nodes.iter().enumerate() {
        if rng.random_bool(0.6) {
            units.push(DamUnit::generator(
                &format!("g{i}"),
                node,
                rng.random_range(20.0..200.0),
                rng.random_range(5.0..60.0),
            ));
        }
        if rng.random_bool(0.5) {
            let load = rng.random_range(10.0..150.0);
            units.push(DamUnit::fixed_load(&format!("d{i}"), node, load));
            units.push(DamUnit::generator(
                &format!("p{i}"),
                node,
                load,
                rng.random_range(200.0..400.0),
            ));
        }
    }
    if units.is_empty() {
        let load = rng.random_range(10.0..150.0);
        units.push(DamUnit::generator("g0", &nodes[0], 200.0, 20.0));
        units.push(DamUnit::fixed_load("d0", &nodes[0], load));
    }
    (model, DamBidSet { units })
}
