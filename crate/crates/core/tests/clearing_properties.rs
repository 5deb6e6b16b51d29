mod common;

use ftr_align::attribution::sensitivity_check;
use ftr_align::clearing::{
    audit_dam, clear_dam, clear_ftr, settle_ftr, settle_with_bound, FtrBid, FtrBidSet,
};
use ftr_align::netmodel::Constraint;
use ftr_align::random::{random_clearing, random_model, rng};
use ftr_align::support::verify_support_identity;
use proptest::prelude::*;
use rand::Rng;

use common::{priced, two_node, two_node_bids, two_node_oracle};

#[test]
fn two_node_matches_brute_force() {
    let oracle = two_node_oracle(10.0);
    let model = two_node(10.0);
    let r = clear_dam(&model, &two_node_bids()).unwrap();
    assert!((r.lmp[0] - oracle.lmp[0]).abs() <= 1e-9);
    assert!((r.lmp[1] - oracle.lmp[1]).abs() <= 1e-9);
    assert!((r.surplus - oracle.rent).abs() <= 1e-9);
    assert!((r.awards[0] - oracle.g1).abs() <= 1e-9);
    assert!((r.y.values()[0] - 40.0).abs() <= 1e-9);
}

#[test]
fn two_node_ftr_collects_the_rent() {
    let model = two_node(10.0);
    let dam = clear_dam(&model, &two_node_bids()).unwrap();
    let ftr_model = model.clone().with_market(ftr_align::netmodel::Market::Ftr);
    let bids = FtrBidSet {
        bids: vec![FtrBid::new("f", "1", "2", 0.0, 10.0, 45.0)],
    };
    let awards = clear_ftr(&ftr_model, &bids).unwrap();
    assert!((awards.awards[0] - 10.0).abs() <= 1e-9);
    assert!((settle_ftr(&awards, &dam) - 400.0).abs() <= 1e-9);
    let s = settle_with_bound(&awards, &dam, &ftr_model).unwrap();
    assert!(s.within_bound);
    assert!((s.po_max - 400.0).abs() <= 1e-9);
}

#[test]
fn uncongested_line_has_no_rent() {
    let model = two_node(50.0);
    let r = clear_dam(&model, &two_node_bids()).unwrap();
    assert!(r.surplus.abs() <= 1e-9);
    assert!((r.lmp[0] - r.lmp[1]).abs() <= 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn surplus_equals_support_at_clearing_prices(seed in any::<u64>()) {
        let (model, bids) = random_clearing(&mut rng(seed));
        let r = clear_dam(&model, &bids).unwrap();
        let id = verify_support_identity(&r, &model).unwrap();
        prop_assert!(id.passed, "{:?}", id);
        prop_assert!((r.rent() - r.surplus).abs() <= 1e-6 * r.surplus.abs().max(1.0));
        prop_assert!(r.decomposition_residual(&model) <= 1e-8);
        let kkt = audit_dam(&model, &bids, &r.awards, &r.y, None).unwrap();
        prop_assert!(kkt.passed, "{:?}", kkt);
    }

    #[test]
    fn limit_perturbations_respect_multiplier_bounds(seed in any::<u64>(), delta in 0.01f64..5.0) {
        let mut r = rng(seed);
        let model = random_model(&mut r);
        let y = priced(&mut r, &model);
        let finite = model.finite_constraints();
        let j: Constraint = finite[r.random_range(0..finite.len())];
        let report = sensitivity_check(&model, &y, j, delta).unwrap();
        prop_assert!(report.passed(), "{:?}", report.checks);
    }
}
