//! A fixed menu of small markets for the test suites and the command line
//! tool: a catalog of discrete laws, every two-by-two full-market
//! assignment of them, handbuilt three-by-three trade graphs, and seeded
//! random instances. The brute-force matching oracles live here too.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dist::Distribution;
use crate::matching::NodeWeights;
use crate::mechanisms::Scenario;
use crate::model::{lex_compare, MarketGraph, Matching, ValuationProfile};
use crate::rat::Rat;

/// Six discrete laws covering the shapes the mechanisms care about: a
/// point mass, two-point laws with different skew, and three-point laws
/// whose revenue or cost curves need ironing.
pub fn discrete_catalog() -> Vec<(&'static str, Distribution)> {
    let d = |pairs: &[(i64, i64, i64)]| {
        Distribution::discrete(
            pairs.iter().map(|&(v, n, den)| (Rat::int(v), Rat::new(n, den))).collect(),
        )
        .unwrap()
    };
    vec![
        ("p2", Distribution::point(Rat::int(2))),
        ("b1-3", d(&[(1, 1, 2), (3, 1, 2)])),
        ("b1-4", d(&[(1, 1, 4), (4, 3, 4)])),
        ("t1-2-4", d(&[(1, 1, 4), (2, 1, 4), (4, 1, 2)])),
        ("t2-3-4", d(&[(2, 3, 8), (3, 1, 8), (4, 1, 2)])),
        ("t1-2-3", d(&[(1, 1, 2), (2, 1, 8), (3, 3, 8)])),
    ]
}

/// Every way of assigning catalog laws to a full two-by-two market,
/// labeled by the four catalog indices in agent order.
pub fn da_2x2_scenarios() -> Vec<(String, Scenario)> {
    let catalog = discrete_catalog();
    let n = catalog.len();
    let mut out = Vec::with_capacity(n * n * n * n);
    for b0 in 0..n {
        for b1 in 0..n {
            for s0 in 0..n {
                for s1 in 0..n {
                    let sc = Scenario::new(
                        MarketGraph::complete(2, 2),
                        vec![catalog[b0].1.clone(), catalog[b1].1.clone()],
                        vec![catalog[s0].1.clone(), catalog[s1].1.clone()],
                    )
                    .expect("catalog laws fit the graph");
                    out.push((format!("da2x2-{b0}{b1}{s0}{s1}"), sc));
                }
            }
        }
    }
    out
}

/// Twenty-two three-by-three trade graphs spanning the neighborhood
/// structures the class statistics distinguish: complete, nested, starred,
/// disconnected, cyclic, and graphs with isolated agents.
pub fn handbuilt_3x3_graphs() -> Vec<MarketGraph> {
    let g = |edges: &[(usize, usize)]| MarketGraph::new(3, 3, edges.iter().copied()).unwrap();
    let all: Vec<(usize, usize)> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).collect();
    let complete_minus = |drop: &[(usize, usize)]| {
        MarketGraph::new(3, 3, all.iter().copied().filter(|e| !drop.contains(e))).unwrap()
    };
    vec![
        MarketGraph::complete(3, 3),
        g(&[(0, 0), (1, 1), (2, 2)]),
        g(&[(0, 2), (1, 1), (2, 0)]),
        g(&[(0, 0), (1, 0), (1, 1), (2, 1), (2, 2)]),
        g(&[(0, 0), (1, 0), (1, 1), (2, 1), (2, 2), (0, 2)]),
        g(&[(0, 0), (1, 0), (2, 0)]),
        g(&[(0, 0), (0, 1), (0, 2)]),
        g(&[(0, 0), (1, 0), (2, 0), (0, 1), (0, 2)]),
        complete_minus(&[(0, 0), (1, 1), (2, 2)]),
        complete_minus(&[(2, 2)]),
        g(&[(0, 0), (1, 0), (1, 1), (2, 0), (2, 1), (2, 2)]),
        g(&[(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (2, 0)]),
        g(&[(0, 0), (0, 1), (1, 0), (1, 1), (2, 2)]),
        g(&[(0, 0), (0, 1), (1, 0), (1, 1)]),
        g(&[(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]),
        g(&[(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]),
        g(&[(0, 0), (0, 1), (1, 1), (1, 2), (2, 2), (2, 0)]),
        g(&[(0, 0), (1, 1), (2, 2), (0, 1), (1, 2)]),
        g(&[(0, 0), (0, 1), (1, 0), (1, 1), (2, 1), (2, 2)]),
        g(&[(0, 0), (1, 0), (2, 0), (1, 1), (2, 2)]),
        complete_minus(&[(0, 0), (2, 2)]),
        g(&[(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]),
    ]
}

/// The handbuilt graphs equipped with a fixed assignment of catalog laws:
/// mixed two- and three-point values for buyers; a point mass and two
/// wider laws for sellers. Each market enumerates to 108 pure profiles.
pub fn matching_3x3_scenarios() -> Vec<(String, Scenario)> {
    let catalog = discrete_catalog();
    let buyers = vec![catalog[1].1.clone(), catalog[3].1.clone(), catalog[4].1.clone()];
    let sellers = vec![catalog[0].1.clone(), catalog[1].1.clone(), catalog[5].1.clone()];
    handbuilt_3x3_graphs()
        .into_iter()
        .enumerate()
        .map(|(idx, graph)| {
            let sc =
                Scenario::new(graph, buyers.clone(), sellers.clone()).expect("three laws per side");
            (format!("m3x3-{idx:02}"), sc)
        })
        .collect()
}

/// A discrete law with `k` distinct integer values in 0..=12 and random
/// weights in 1..=5.
fn random_discrete(rng: &mut ChaCha8Rng, k: usize) -> Distribution {
    let mut values = BTreeSet::new();
    while values.len() < k {
        values.insert(rng.random_range(0..=12i64));
    }
    let weights: Vec<i64> = (0..k).map(|_| rng.random_range(1..=5i64)).collect();
    let total: i64 = weights.iter().sum();
    let atoms = values
        .into_iter()
        .zip(weights)
        .map(|(v, w)| (Rat::int(v), Rat::new(w, total)))
        .collect();
    Distribution::discrete(atoms).expect("positive weights on distinct values")
}

/// Seeded random bilateral-trade instances on the 1x1 full market. The
/// first instance gets a five-atom value law and the second a six-atom
/// cost law; everything else stays at two to four atoms.
pub fn random_bilateral_instances(count: usize, seed: u64) -> Vec<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|idx| {
            let (kb, ks) = match idx {
                0 => (5, rng.random_range(2..=4)),
                1 => (rng.random_range(2..=4), 6),
                _ => (rng.random_range(2..=4), rng.random_range(2..=4)),
            };
            Scenario::new(
                MarketGraph::complete(1, 1),
                vec![random_discrete(&mut rng, kb)],
                vec![random_discrete(&mut rng, ks)],
            )
            .expect("one law per side")
        })
        .collect()
}

/// Three seeded four-by-four markets with random trade graphs and mixed
/// support sizes, each enumerating to exactly 1296 pure profiles.
pub fn random_4x4_scenarios(seed: u64) -> Vec<(String, Scenario)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let buyer_sizes = [3, 2, 3, 2];
    let seller_sizes = [2, 3, 2, 3];
    (0..3)
        .map(|t| {
            let mut edges: Vec<(usize, usize)> = (0..4)
                .flat_map(|i| (0..4).map(move |j| (i, j)))
                .filter(|_| rng.random_ratio(5, 8))
                .collect();
            if edges.is_empty() {
                edges.push((0, 0));
            }
            let graph = MarketGraph::new(4, 4, edges).expect("edges lie in range");
            let buyers = buyer_sizes.iter().map(|&k| random_discrete(&mut rng, k)).collect();
            let sellers = seller_sizes.iter().map(|&k| random_discrete(&mut rng, k)).collect();
            let sc = Scenario::new(graph, buyers, sellers).expect("four laws per side");
            (format!("rand4x4-{t}"), sc)
        })
        .collect()
}

/// Every matching the graph admits, the empty one included.
pub fn all_matchings(graph: &MarketGraph) -> Vec<Matching> {
    fn recurse(
        edges: &[(usize, usize)],
        from: usize,
        current: &mut Vec<(usize, usize)>,
        out: &mut Vec<Matching>,
    ) {
        out.push(Matching::new(current.iter().copied()).expect("disjoint by construction"));
        for k in from..edges.len() {
            let (i, j) = edges[k];
            if current.iter().any(|&(a, b)| a == i || b == j) {
                continue;
            }
            current.push((i, j));
            recurse(edges, k + 1, current, out);
            current.pop();
        }
    }
    let edges: Vec<(usize, usize)> = graph.edges().collect();
    let mut out = Vec::new();
    recurse(&edges, 0, &mut Vec::new(), &mut out);
    out
}

fn matching_weight(m: &Matching, weights: &NodeWeights) -> Rat {
    m.pairs().map(|(i, j)| &weights.buyer[i] + &weights.seller[j]).sum()
}

/// Reference maximum weight by exhaustive enumeration.
pub fn brute_force_optimal_weight(graph: &MarketGraph, weights: &NodeWeights) -> Rat {
    all_matchings(graph)
        .iter()
        .map(|m| matching_weight(m, weights))
        .max()
        .expect("the empty matching always exists")
}

/// Reference lex-highest maximum-weight matching by exhaustive search.
pub fn brute_force_max_weight(graph: &MarketGraph, weights: &NodeWeights) -> Matching {
    let mut best: Option<(Rat, Matching)> = None;
    for m in all_matchings(graph) {
        let w = matching_weight(&m, weights);
        let replace = match &best {
            None => true,
            Some((bw, bm)) => {
                w > *bw || (w == *bw && lex_compare(&m, bm) == std::cmp::Ordering::Greater)
            }
        };
        if replace {
            best = Some((w, m));
        }
    }
    best.expect("the empty matching always exists").1
}

/// Reference efficient matching on true gains.
pub fn brute_force_first_best(graph: &MarketGraph, profile: &ValuationProfile) -> Matching {
    brute_force_max_weight(graph, &NodeWeights::gains(profile))
}
