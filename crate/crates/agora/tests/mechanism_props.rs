//! Mechanism-level invariants on randomized markets: participation and
//! budget safety, reduction equivalences, corridor validity on arbitrary
//! trade graphs, and the expected-gains floor of the randomized
//! virtual-weight matching.

use proptest::collection::vec;
use proptest::prelude::*;

use agora::audit::bb_is_guaranteed;
use agora::library::{discrete_catalog, matching_3x3_scenarios};
use agora::matching::{efficient_trade_size_q, first_best};
use agora::mechanisms::{
    run_gbom, run_gsom, run_hybrid_da, run_hybrid_matching, run_mechanism, run_offering_matching,
    run_tr_da, run_tr_matching, MechanismKind, NaiveOptions, Scenario,
};
use agora::model::{gft, Coin, MarketGraph, ValuationProfile};
use agora::Rat;

fn ints(xs: Vec<i64>) -> Vec<Rat> {
    xs.into_iter().map(Rat::int).collect()
}

const KINDS: [MechanismKind; 10] = [
    MechanismKind::TrDa,
    MechanismKind::HybridDa,
    MechanismKind::TrMatching,
    MechanismKind::Offering,
    MechanismKind::HybridMatching,
    MechanismKind::Rvwm,
    MechanismKind::Gsom,
    MechanismKind::Gbom,
    MechanismKind::NaiveMax,
    MechanismKind::NaiveQSwitch,
];

fn catalog_market(dist_pick: &[usize], atom_pick: &[usize]) -> (Scenario, ValuationProfile) {
    let catalog = discrete_catalog();
    let sc = Scenario::new(
        MarketGraph::complete(2, 2),
        vec![catalog[dist_pick[0]].1.clone(), catalog[dist_pick[1]].1.clone()],
        vec![catalog[dist_pick[2]].1.clone(), catalog[dist_pick[3]].1.clone()],
    )
    .unwrap();
    let sizes = sc.support_sizes().unwrap();
    let indices: Vec<usize> = atom_pick.iter().zip(&sizes).map(|(&a, &k)| a % k).collect();
    let (profile, _) = sc.profile_from_indices(&indices).unwrap();
    (sc, profile)
}

proptest! {
    #[test]
    fn trades_never_hurt_anyone(
        dist_pick in vec(0..6usize, 4),
        atom_pick in vec(0..6usize, 4),
    ) {
        let (sc, profile) = catalog_market(&dist_pick, &atom_pick);
        let opts = NaiveOptions::default();
        for kind in KINDS {
            for coin in Coin::BOTH {
                let outcome = run_mechanism(kind, &sc, &profile, coin, &opts).unwrap();
                for t in &outcome.trades {
                    prop_assert!(t.buyer_payment <= profile.b[t.buyer], "{kind}");
                    prop_assert!(t.seller_receipt >= profile.s[t.seller], "{kind}");
                    if bb_is_guaranteed(kind) {
                        prop_assert!(t.buyer_payment >= t.seller_receipt, "{kind}");
                    }
                }
            }
        }
    }

    #[test]
    fn class_reduction_collapses_to_plain_reduction_on_full_markets(
        b in vec(0..=9i64, 4),
        s in vec(0..=9i64, 4),
    ) {
        let graph = MarketGraph::complete(4, 4);
        let profile = ValuationProfile::new(ints(b), ints(s));
        let plain = run_tr_da(&graph, &profile).unwrap();
        let classed = run_tr_matching(&graph, &profile).unwrap();
        prop_assert_eq!(plain.trades, classed.trades);
    }

    #[test]
    fn hybrid_runs_reduction_exactly_when_the_market_is_thick(
        dist_pick in vec(0..6usize, 4),
        atom_pick in vec(0..6usize, 4),
    ) {
        let (sc, profile) = catalog_market(&dist_pick, &atom_pick);
        let q = efficient_trade_size_q(&profile);
        for coin in Coin::BOTH {
            let hybrid = run_hybrid_da(&sc, &profile, coin).unwrap();
            prop_assert_eq!(hybrid.mechanism.as_str(), "hybrid-da");
            if q >= 2 {
                let reduction = run_tr_da(&sc.graph, &profile).unwrap();
                prop_assert_eq!(&hybrid.trades, &reduction.trades);
            } else {
                prop_assert!(hybrid.trades.len() <= 1);
            }
        }
    }
}

#[test]
fn randomized_virtual_matching_secures_half_the_efficient_gains_in_expectation() {
    for (label, sc) in matching_3x3_scenarios() {
        let mut avg_gains = Rat::zero();
        let mut best_gains = Rat::zero();
        for (profile, p) in sc.enumerate_profiles().unwrap() {
            let g1 = gft(&run_gsom(&sc, &profile).unwrap(), &profile);
            let g2 = gft(&run_gbom(&sc, &profile).unwrap(), &profile);
            avg_gains += &p * &((g1 + g2) / Rat::int(2));
            best_gains += &p * &gft(&first_best(&sc.graph, &profile), &profile);
        }
        let half = &best_gains / &Rat::int(2);
        assert!(avg_gains >= half, "{label}: {avg_gains} below half of {best_gains}");
    }
}

#[test]
fn offer_based_matching_always_finds_a_valid_corridor() {
    // every threshold corridor the mechanisms build must be well formed,
    // whatever the trade graph looks like
    for (label, sc) in matching_3x3_scenarios() {
        for (profile, _) in sc.enumerate_profiles().unwrap() {
            for coin in Coin::BOTH {
                let offered = run_offering_matching(&sc, &profile, coin);
                assert!(offered.is_ok(), "{label}: {offered:?}");
                let hybrid = run_hybrid_matching(&sc, &profile, coin);
                assert!(hybrid.is_ok(), "{label}: {hybrid:?}");
            }
        }
    }
}
