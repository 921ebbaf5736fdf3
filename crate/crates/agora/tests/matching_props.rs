//! Randomized cross-checks of the matching engine against exhaustive
//! enumeration, on general trade graphs with heavy value ties.

use proptest::collection::vec;
use proptest::prelude::*;

use agora::library::{brute_force_first_best, brute_force_max_weight, brute_force_optimal_weight};
use agora::matching::{
    buyer_threshold, efficient_trade_size_q, first_best, matching_without, max_weight_matching,
    optimal_weight, seller_threshold, NodeWeights,
};
use agora::model::{AgentId, MarketGraph, Side, ValuationProfile};
use agora::Rat;

fn ints(xs: Vec<i64>) -> Vec<Rat> {
    xs.into_iter().map(Rat::int).collect()
}

fn graph_from_mask(nb: usize, ns: usize, mask: &[bool]) -> MarketGraph {
    let edges = (0..nb)
        .flat_map(|i| (0..ns).map(move |j| (i, j)))
        .zip(mask.iter().copied())
        .filter_map(|(e, keep)| keep.then_some(e));
    MarketGraph::new(nb, ns, edges).unwrap()
}

proptest! {
    #[test]
    fn engine_matches_enumeration(
        mask in vec(any::<bool>(), 9),
        b in vec(0..=8i64, 3),
        s in vec(0..=8i64, 3),
    ) {
        let graph = graph_from_mask(3, 3, &mask);
        let profile = ValuationProfile::new(ints(b), ints(s));
        let weights = NodeWeights::gains(&profile);
        prop_assert_eq!(
            optimal_weight(&graph, &weights),
            brute_force_optimal_weight(&graph, &weights)
        );
        prop_assert_eq!(first_best(&graph, &profile), brute_force_first_best(&graph, &profile));
    }

    #[test]
    fn engine_matches_enumeration_on_wide_markets(
        mask in vec(any::<bool>(), 12),
        b in vec(0..=6i64, 4),
        s in vec(0..=6i64, 3),
    ) {
        let graph = graph_from_mask(4, 3, &mask);
        let profile = ValuationProfile::new(ints(b), ints(s));
        let weights = NodeWeights::gains(&profile);
        prop_assert_eq!(
            optimal_weight(&graph, &weights),
            brute_force_optimal_weight(&graph, &weights)
        );
        prop_assert_eq!(first_best(&graph, &profile), brute_force_first_best(&graph, &profile));
    }

    #[test]
    fn signed_node_weights_also_agree(
        mask in vec(any::<bool>(), 9),
        bw in vec(-6..=8i64, 3),
        sw in vec(-8..=6i64, 3),
    ) {
        // weight shapes the virtual matchings produce, signs included
        let graph = graph_from_mask(3, 3, &mask);
        let weights = NodeWeights::new(ints(bw), ints(sw));
        prop_assert_eq!(
            max_weight_matching(&graph, &weights),
            brute_force_max_weight(&graph, &weights)
        );
    }

    #[test]
    fn removing_an_agent_matches_enumeration_on_the_reduced_graph(
        mask in vec(any::<bool>(), 9),
        b in vec(0..=8i64, 3),
        s in vec(0..=8i64, 3),
        buyer_side in any::<bool>(),
        idx in 0..3usize,
    ) {
        let graph = graph_from_mask(3, 3, &mask);
        let profile = ValuationProfile::new(ints(b), ints(s));
        let agent = if buyer_side { AgentId::buyer(idx) } else { AgentId::seller(idx) };
        let reduced_edges: Vec<(usize, usize)> = graph
            .edges()
            .filter(|&(i, j)| match agent.side {
                Side::Buyer => i != agent.index,
                Side::Seller => j != agent.index,
            })
            .collect();
        let reduced = MarketGraph::new(3, 3, reduced_edges).unwrap();
        prop_assert_eq!(
            matching_without(&graph, &profile, agent).unwrap(),
            brute_force_first_best(&reduced, &profile)
        );
    }

    #[test]
    fn q_counts_the_efficient_trades_on_full_markets(
        b in vec(0..=8i64, 4),
        s in vec(0..=8i64, 4),
    ) {
        let graph = MarketGraph::complete(4, 4);
        let profile = ValuationProfile::new(ints(b), ints(s));
        prop_assert_eq!(efficient_trade_size_q(&profile), first_best(&graph, &profile).len());
    }

    #[test]
    fn efficient_pairs_frame_a_nonempty_price_corridor(
        mask in vec(any::<bool>(), 9),
        b in vec(0..=8i64, 3),
        s in vec(0..=8i64, 3),
    ) {
        let graph = graph_from_mask(3, 3, &mask);
        let profile = ValuationProfile::new(ints(b), ints(s));
        for (i, j) in first_best(&graph, &profile).pairs() {
            let floor = seller_threshold(&graph, &profile, i, j).unwrap();
            prop_assert!(floor >= Rat::zero());
            if let Some(cap) = buyer_threshold(&graph, &profile, i, j).unwrap() {
                prop_assert!(floor <= cap, "floor {} above cap {} for ({}, {})", floor, cap, i, j);
            }
        }
    }
}
