mod common;

use ftr_align::netmodel::{derate, stack_model, Limit, LimitVector, NetworkModel};
use ftr_align::random::{random_model, rng};
use ftr_align::support::{support_value, PriceVector};
use proptest::prelude::*;

use common::priced;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn phi(model: &NetworkModel, y: &PriceVector) -> f64 {
    support_value(model, y).expect("random models have finite base limits").value
}

/// Same network with every finite limit widened by a random amount.
fn loosened(model: &NetworkModel, seed: u64) -> NetworkModel {
    let mut r = rng(seed);
    let entries = model
        .limits()
        .entries()
        .iter()
        .map(|lim| match (lim.lower.value(), lim.upper.value()) {
            (Some(lo), Some(hi)) => Limit::new(lo - r.random_range(0.0..20.0), hi + r.random_range(0.0..20.0)),
            _ => *lim,
        })
        .collect();
    model.with_limits(LimitVector::new(entries)).unwrap()
}

use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn positively_homogeneous(seed in any::<u64>(), t in 0.0f64..20.0) {
        let mut r = rng(seed);
        let m = random_model(&mut r);
        let y = priced(&mut r, &m);
        prop_assert!(close(phi(&m, &y.scaled(t)), t * phi(&m, &y), 1e-9));
    }

    #[test]
    fn subadditive(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = random_model(&mut r);
        let y1 = priced(&mut r, &m);
        let y2 = priced(&mut r, &m);
        let lhs = phi(&m, &y1.add(&y2));
        let rhs = phi(&m, &y1) + phi(&m, &y2);
        prop_assert!(lhs <= rhs + 1e-8 * rhs.abs().max(1.0));
    }

    #[test]
    fn nonnegative_when_zero_is_feasible(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = random_model(&mut r);
        let y = priced(&mut r, &m);
        prop_assert!(phi(&m, &y) >= -1e-9);
    }

    #[test]
    fn monotone_in_limits(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = random_model(&mut r);
        let y = priced(&mut r, &m);
        let wide = loosened(&m, seed ^ 0x5a5a);
        prop_assert!(phi(&wide, &y) >= phi(&m, &y) - 1e-9 * phi(&m, &y).abs().max(1.0));
    }

    #[test]
    fn maximizer_is_feasible_and_attains_value(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = random_model(&mut r);
        let y = priced(&mut r, &m);
        let s = support_value(&m, &y).unwrap();
        prop_assert!(m.is_feasible(&s.q, 1e-7));
        let flows = m.flows(&s.q);
        let attained: f64 = flows.iter().zip(y.values()).map(|(f, p)| f * p).sum();
        prop_assert!(close(attained, s.value, 1e-9));
        prop_assert!(close(s.certificate.objective, s.value, 1e-9));
    }

    #[test]
    fn independent_of_reference_node(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = random_model(&mut r);
        let y = priced(&mut r, &m);
        let topo = m.topology();
        let other = topo.nodes()[r.random_range(0..topo.num_nodes())].clone();
        let moved = stack_model(
            &topo.with_slack(&other).unwrap(),
            m.contingencies(),
            m.limits().clone(),
            m.market().clone(),
        )
        .unwrap();
        prop_assert!(close(phi(&moved, &y), phi(&m, &y), 1e-9));
    }

    #[test]
    fn scales_with_uniform_derate(seed in any::<u64>(), alpha in 0.05f64..1.0) {
        let mut r = rng(seed);
        let m = random_model(&mut r);
        let y = priced(&mut r, &m);
        let d = derate(&m, alpha).unwrap();
        prop_assert!(close(phi(&d, &y), alpha * phi(&m, &y), 1e-9));
    }

    #[test]
    fn shared_geometry_under_derate(seed in any::<u64>(), alpha in 0.05f64..1.0) {
        let mut r = rng(seed);
        let m = random_model(&mut r);
        let d = derate(&m, alpha).unwrap();
        prop_assert!(m.same_geometry(&d));
        prop_assert_eq!(m.k(), d.k());
    }
}

#[test]
fn weak_duality_on_sampled_points() {
    let mut r = rng(99);
    for _ in 0..50 {
        let m = random_model(&mut r);
        let y = priced(&mut r, &m);
        let s = support_value(&m, &y).unwrap();
        for _ in 0..20 {
            // Shrinking the maximizer toward zero keeps it feasible.
            let t: f64 = r.random_range(0.0..1.0);
            let q: Vec<f64> = s.q.iter().map(|v| t * v).collect();
            let val: f64 = m.flows(&q).iter().zip(y.values()).map(|(f, p)| f * p).sum();
            assert!(val <= s.value + 1e-9 * s.value.abs().max(1.0));
        }
    }
}
