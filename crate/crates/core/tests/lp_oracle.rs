mod common;

use ftr_align::attribution::classify_all;
use ftr_align::lpsolve::{solve, vertex_optimum, LpProblem, LpStatus, DEFAULT_DIMENSION_GUARD};
use ftr_align::random::{random_lp, rng};
use proptest::prelude::*;

use common::{face_vertex_ranges, oracle_model, priced};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn simplex_matches_vertex_enumeration(seed in any::<u64>()) {
        let lp = random_lp(&mut rng(seed));
        let sol = solve(&lp).unwrap();
        match vertex_optimum(&lp, DEFAULT_DIMENSION_GUARD).unwrap() {
            Some(best) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.objective - best).abs() <= 1e-7 * best.abs().max(1.0));
                prop_assert!(sol.residuals(&lp).max() <= 1e-7);
            }
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
        }
    }
}

#[test]
fn duplicated_rows_share_the_multiplier() {
    let mut r = rng(5);
    for _ in 0..20 {
        let m = oracle_model(&mut r, true);
        let y = priced(&mut r, &m);
        let ranges = classify_all(&m, &y).unwrap();
        let (_, oracle) = face_vertex_ranges(&m, &y, 1e-9);
        for (c, lo, hi) in oracle {
            let got = ranges.iter().find(|g| g.constraint == c).unwrap();
            assert!((got.lo - lo).abs() <= 1e-7 * hi.max(1.0), "{c:?}: {} vs {lo}", got.lo);
            assert!((got.hi - hi).abs() <= 1e-7 * hi.max(1.0), "{c:?}: {} vs {hi}", got.hi);
        }
    }
}

#[test]
fn robust_ranges_match_face_vertices() {
    let mut r = rng(17);
    for _ in 0..40 {
        let m = oracle_model(&mut r, false);
        let y = priced(&mut r, &m);
        let ranges = classify_all(&m, &y).unwrap();
        let (value, oracle) = face_vertex_ranges(&m, &y, 1e-9);
        let support = ftr_align::support::support_value(&m, &y).unwrap().value;
        assert!((support - value).abs() <= 1e-7 * value.abs().max(1.0));
        for (c, lo, hi) in oracle {
            let got = ranges.iter().find(|g| g.constraint == c).unwrap();
            assert!(got.hi.is_finite());
            assert!((got.lo - lo).abs() <= 1e-7 * hi.max(1.0));
            assert!((got.hi - hi).abs() <= 1e-7 * hi.max(1.0));
        }
    }
}

#[test]
fn degenerate_vertex_is_handled() {
    // Three constraints through one vertex of a 2-D region.
    let mut lp = LpProblem::maximize(vec![1.0, 1.0]);
    lp.add_le(vec![1.0, 0.0], 1.0);
    lp.add_le(vec![0.0, 1.0], 1.0);
    lp.add_le(vec![1.0, 1.0], 2.0);
    lp.set_bounds(0, Some(0.0), None);
    lp.set_bounds(1, Some(0.0), None);
    let sol = solve(&lp).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective - 2.0).abs() < 1e-12);
    assert_eq!(vertex_optimum(&lp, 6).unwrap(), Some(2.0));
}
