//! The bilateral-trade sandwich: a posted price can never beat the
//! incentive-constrained optimum, which in turn can never beat full
//! efficiency. Checked exactly on randomized discrete value laws.

use agora::library::random_bilateral_instances;
use agora::lp::{best_posted_price, expected_first_best_bilateral, second_best_bilateral};
use agora::Rat;

#[test]
fn posted_price_second_best_and_first_best_sandwich() {
    for (idx, sc) in random_bilateral_instances(12, 2026).into_iter().enumerate() {
        let db = &sc.buyer_dists[0];
        let ds = &sc.seller_dists[0];
        let first_best = expected_first_best_bilateral(db, ds).unwrap();
        let second_best = second_best_bilateral(db, ds).unwrap();
        let (_, posted) = best_posted_price(db, ds).unwrap();
        assert!(
            posted <= second_best,
            "instance {idx}: posted {posted} above the constrained optimum {second_best}"
        );
        assert!(
            second_best <= first_best,
            "instance {idx}: constrained optimum {second_best} above first best {first_best}"
        );
        assert!(posted >= Rat::zero());
    }
}

#[test]
fn constrained_optimum_can_fall_strictly_short_of_first_best() {
    // two-point laws with a known wedge between full efficiency and any
    // incentive-compatible budget-balanced mechanism
    let db = agora::dist::Distribution::discrete(vec![
        (Rat::int(1), Rat::new(1, 2)),
        (Rat::int(10), Rat::new(1, 2)),
    ])
    .unwrap();
    let ds = agora::dist::Distribution::discrete(vec![
        (Rat::int(0), Rat::new(1, 2)),
        (Rat::int(9), Rat::new(1, 2)),
    ])
    .unwrap();
    let first_best = expected_first_best_bilateral(&db, &ds).unwrap();
    let second_best = second_best_bilateral(&db, &ds).unwrap();
    assert_eq!(first_best, Rat::int(3));
    assert!(second_best < first_best);
}
