//! Maximum-weight bipartite matching with deterministic ID-based
//! tie-breaking, plus the welfare statistics built on it: externality
//! payments, trade-size, neighborhood-class counts and threshold values.
//!
//! Edge weights are node-separable: an edge (i, j) weighs
//! `buyer[i] + seller[j]`, where seller entries already carry their sign
//! (negated costs or negated virtual costs). Gains from trade, virtual
//! welfare and every reduced market used here fit that form, and it makes
//! augmenting-path search cheap: the gain of an augmenting path depends
//! only on its two free endpoints.

use std::collections::{BTreeMap, VecDeque};

use crate::model::{
    class_partition, AgentId, ClassPartition, MarketGraph, Matching, Side, ValuationProfile,
};
use crate::rat::Rat;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MatchError {
    #[error("agent {0} out of range")]
    AgentOutOfRange(AgentId),
    #[error("agent {0} is not matched in the efficient matching")]
    NotMatched(AgentId),
    #[error("pair ({0}, {1}) is not in the efficient matching")]
    PairNotEfficient(usize, usize),
    #[error("weights cover {got} {side:?} agents, graph has {want}")]
    WeightLength { side: Side, got: usize, want: usize },
}

/// Node-separable weights. Seller entries are already negated, so the
/// weight of edge (i, j) is `buyer[i] + seller[j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeWeights {
    pub buyer: Vec<Rat>,
    pub seller: Vec<Rat>,
}

impl NodeWeights {
    pub fn new(buyer: Vec<Rat>, seller: Vec<Rat>) -> Self {
        NodeWeights { buyer, seller }
    }

    /// Gains-from-trade weights: values against negated costs.
    pub fn gains(profile: &ValuationProfile) -> Self {
        NodeWeights {
            buyer: profile.b.clone(),
            seller: profile.s.iter().map(|c| -c).collect(),
        }
    }

    pub fn edge_weight(&self, buyer: usize, seller: usize) -> Rat {
        &self.buyer[buyer] + &self.seller[seller]
    }

    fn check(&self, graph: &MarketGraph) -> Result<(), MatchError> {
        if self.buyer.len() != graph.buyer_count() {
            return Err(MatchError::WeightLength {
                side: Side::Buyer,
                got: self.buyer.len(),
                want: graph.buyer_count(),
            });
        }
        if self.seller.len() != graph.seller_count() {
            return Err(MatchError::WeightLength {
                side: Side::Seller,
                got: self.seller.len(),
                want: graph.seller_count(),
            });
        }
        Ok(())
    }
}

/// Solver scratch over one graph and weight assignment. Masks select the
/// active submarket; reduced markets never reindex agents.
struct Engine<'a> {
    graph: &'a MarketGraph,
    weights: &'a NodeWeights,
    adj: Vec<Vec<usize>>,
}

impl<'a> Engine<'a> {
    fn new(graph: &'a MarketGraph, weights: &'a NodeWeights) -> Self {
        let mut adj = vec![Vec::new(); graph.buyer_count()];
        for (i, j) in graph.edges() {
            adj[i].push(j);
        }
        Engine { graph, weights, adj }
    }

    /// Maximum total weight over matchings of the active submarket.
    /// Successive augmentation: repeatedly add the best-gain augmenting
    /// path. With node-separable weights the gain of a path from free
    /// buyer i to free seller j is exactly buyer[i] + seller[j], so each
    /// round scans free buyers in weight order and stops early once no
    /// remaining pair can beat the best found.
    fn optimal_weight(&self, b_act: &[bool], s_act: &[bool]) -> Rat {
        let matching = self.greedy_augment(b_act, s_act);
        let mut total = Rat::zero();
        for (i, j) in &matching {
            total += &self.weights.buyer[*i];
            total += &self.weights.seller[*j];
        }
        total
    }

    fn greedy_augment(&self, b_act: &[bool], s_act: &[bool]) -> Vec<(usize, usize)> {
        if self.graph.is_complete() {
            return self.complete_pairs(b_act, s_act);
        }
        let nb = self.graph.buyer_count();
        let ns = self.graph.seller_count();
        let mut match_b: Vec<Option<usize>> = vec![None; nb];
        let mut match_s: Vec<Option<usize>> = vec![None; ns];
        loop {
            let mut free_buyers: Vec<usize> = (0..nb)
                .filter(|&i| b_act[i] && match_b[i].is_none())
                .collect();
            free_buyers
                .sort_by(|&a, &b| self.weights.buyer[b].cmp(&self.weights.buyer[a]).then(a.cmp(&b)));
            let best_free_seller = (0..ns)
                .filter(|&j| s_act[j] && match_s[j].is_none())
                .map(|j| self.weights.seller[j].clone())
                .max();
            let Some(seller_cap) = best_free_seller else { break };

            let mut best: Option<(Rat, usize, Vec<Option<usize>>)> = None;
            for &i in &free_buyers {
                let ceiling = &self.weights.buyer[i] + &seller_cap;
                if let Some((gain, _, _)) = &best {
                    if ceiling <= *gain {
                        break; // buyers are sorted, nothing later can improve
                    }
                }
                let (parents, reachable) = self.alternating_bfs(i, s_act, &match_s, b_act);
                let target = reachable
                    .into_iter()
                    .max_by(|&a, &b| self.weights.seller[a].cmp(&self.weights.seller[b]));
                if let Some(j) = target {
                    let gain = &self.weights.buyer[i] + &self.weights.seller[j];
                    if best.as_ref().is_none_or(|(g, _, _)| gain > *g) {
                        best = Some((gain, j, parents));
                    }
                }
            }

            match best {
                Some((gain, j_end, parents)) if gain.is_positive() => {
                    let mut j = j_end;
                    loop {
                        let i = parents[j].expect("reached sellers have parents");
                        let prev = match_b[i];
                        match_b[i] = Some(j);
                        match_s[j] = Some(i);
                        match prev {
                            Some(pj) => j = pj,
                            None => break,
                        }
                    }
                }
                _ => break,
            }
        }
        (0..nb).filter_map(|i| match_b[i].map(|j| (i, j))).collect()
    }

    /// BFS over alternating structure from a free buyer: unmatched edges
    /// buyer to seller, matched edges seller back to buyer. Returns parent
    /// pointers for sellers and the free sellers reached.
    fn alternating_bfs(
        &self,
        start: usize,
        s_act: &[bool],
        match_s: &[Option<usize>],
        b_act: &[bool],
    ) -> (Vec<Option<usize>>, Vec<usize>) {
        let ns = self.graph.seller_count();
        let nb = self.graph.buyer_count();
        let mut parents: Vec<Option<usize>> = vec![None; ns];
        let mut seen_b = vec![false; nb];
        let mut free = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen_b[start] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &self.adj[i] {
                if !s_act[j] || parents[j].is_some() {
                    continue;
                }
                parents[j] = Some(i);
                match match_s[j] {
                    None => free.push(j),
                    Some(i2) => {
                        if b_act[i2] && !seen_b[i2] {
                            seen_b[i2] = true;
                            queue.push_back(i2);
                        }
                    }
                }
            }
        }
        (parents, free)
    }

    /// Complete markets shortcut. Rank each active side by (weight desc,
    /// index asc), take the longest prefix whose pair sums stay
    /// nonnegative, and pair the chosen sets in index order. That is
    /// exactly the matching the generic path (optimal weight + greedy
    /// lexicographic fixing) produces on a complete graph.
    fn complete_pairs(&self, b_act: &[bool], s_act: &[bool]) -> Vec<(usize, usize)> {
        let mut buyers: Vec<usize> = (0..self.graph.buyer_count()).filter(|&i| b_act[i]).collect();
        buyers.sort_by(|&a, &b| self.weights.buyer[b].cmp(&self.weights.buyer[a]).then(a.cmp(&b)));
        let mut sellers: Vec<usize> =
            (0..self.graph.seller_count()).filter(|&j| s_act[j]).collect();
        sellers
            .sort_by(|&a, &b| self.weights.seller[b].cmp(&self.weights.seller[a]).then(a.cmp(&b)));
        let mut k = 0;
        while k < buyers.len() && k < sellers.len() {
            if (&self.weights.buyer[buyers[k]] + &self.weights.seller[sellers[k]]).is_negative() {
                break;
            }
            k += 1;
        }
        let mut chosen_b = buyers[..k].to_vec();
        let mut chosen_s = sellers[..k].to_vec();
        chosen_b.sort_unstable();
        chosen_s.sort_unstable();
        chosen_b.into_iter().zip(chosen_s).collect()
    }

    /// The maximum-weight matching ranked highest in the ID lexicographic
    /// order: scan edges in (buyer, seller) order and keep an edge exactly
    /// when some maximum-weight completion still contains it. One optimal
    /// weight solve per candidate edge.
    fn lex_matching(&self, b_act: &[bool], s_act: &[bool]) -> Matching {
        if self.graph.is_complete() {
            return Matching::new(self.complete_pairs(b_act, s_act))
                .expect("disjoint by construction");
        }
        let opt = self.optimal_weight(b_act, s_act);
        let mut b_act = b_act.to_vec();
        let mut s_act = s_act.to_vec();
        let mut fixed = Vec::new();
        let mut fixed_weight = Rat::zero();
        for (i, j) in self.graph.edges() {
            if !b_act[i] || !s_act[j] {
                continue;
            }
            b_act[i] = false;
            s_act[j] = false;
            let rest = self.optimal_weight(&b_act, &s_act);
            if &fixed_weight + &self.weights.edge_weight(i, j) + &rest == opt {
                fixed_weight += self.weights.edge_weight(i, j);
                fixed.push((i, j));
            } else {
                b_act[i] = true;
                s_act[j] = true;
            }
        }
        Matching::new(fixed).expect("greedy fixing never reuses an endpoint")
    }
}

fn all_active(graph: &MarketGraph) -> (Vec<bool>, Vec<bool>) {
    (vec![true; graph.buyer_count()], vec![true; graph.seller_count()])
}

fn active_without(graph: &MarketGraph, agent: AgentId) -> (Vec<bool>, Vec<bool>) {
    let (mut b, mut s) = all_active(graph);
    match agent.side {
        Side::Buyer => b[agent.index] = false,
        Side::Seller => s[agent.index] = false,
    }
    (b, s)
}

fn check_agent(graph: &MarketGraph, agent: AgentId) -> Result<(), MatchError> {
    let bound = match agent.side {
        Side::Buyer => graph.buyer_count(),
        Side::Seller => graph.seller_count(),
    };
    if agent.index >= bound {
        return Err(MatchError::AgentOutOfRange(agent));
    }
    Ok(())
}

/// Maximum achievable total weight (the matching itself is not needed).
pub fn optimal_weight(graph: &MarketGraph, weights: &NodeWeights) -> Rat {
    weights.check(graph).expect("weight vectors must match the graph");
    let (b, s) = all_active(graph);
    Engine::new(graph, weights).optimal_weight(&b, &s)
}

/// The unique maximum-weight matching that ranks highest in the ID
/// lexicographic order. Never contains an edge of negative weight
/// (dropping such an edge would raise the weight), and always contains
/// every zero-weight edge it can (supersets outrank subsets).
pub fn max_weight_matching(graph: &MarketGraph, weights: &NodeWeights) -> Matching {
    weights.check(graph).expect("weight vectors must match the graph");
    let (b, s) = all_active(graph);
    Engine::new(graph, weights).lex_matching(&b, &s)
}

/// Gains-from-trade maximizing matching under the deterministic
/// tie-breaking rule.
pub fn first_best(graph: &MarketGraph, profile: &ValuationProfile) -> Matching {
    max_weight_matching(graph, &NodeWeights::gains(profile))
}

/// First-best of the market with one agent removed.
pub fn matching_without(
    graph: &MarketGraph,
    profile: &ValuationProfile,
    agent: AgentId,
) -> Result<Matching, MatchError> {
    check_agent(graph, agent)?;
    let weights = NodeWeights::gains(profile);
    let (b, s) = active_without(graph, agent);
    Ok(Engine::new(graph, &weights).lex_matching(&b, &s))
}

/// Largest achievable gains from trade once the given agents are removed
/// from the market.
pub fn optimal_gft_without(
    graph: &MarketGraph,
    profile: &ValuationProfile,
    removed: &[AgentId],
) -> Result<Rat, MatchError> {
    let (mut b, mut s) = all_active(graph);
    for &agent in removed {
        check_agent(graph, agent)?;
        match agent.side {
            Side::Buyer => b[agent.index] = false,
            Side::Seller => s[agent.index] = false,
        }
    }
    let weights = NodeWeights::gains(profile);
    Ok(Engine::new(graph, &weights).optimal_weight(&b, &s))
}

/// Externality payment of a matched buyer: welfare others lose from her
/// presence. Always lands between her partner's cost and her own value.
pub fn vcg_buyer_payment(
    graph: &MarketGraph,
    profile: &ValuationProfile,
    buyer: usize,
) -> Result<Rat, MatchError> {
    check_agent(graph, AgentId::buyer(buyer))?;
    let matching = first_best(graph, profile);
    let Some(seller) = matching.buyer_partner(buyer) else {
        return Err(MatchError::NotMatched(AgentId::buyer(buyer)));
    };
    let weights = NodeWeights::gains(profile);
    let engine = Engine::new(graph, &weights);
    let (b, s) = all_active(graph);
    let with = engine.optimal_weight(&b, &s);
    let (b, s) = active_without(graph, AgentId::buyer(buyer));
    let without = engine.optimal_weight(&b, &s);
    let payment = &without - &with + &profile.b[buyer];
    debug_assert!(payment <= profile.b[buyer]);
    debug_assert!(payment >= profile.s[seller]);
    Ok(payment)
}

/// Externality receipt of a matched seller: welfare others gain from his
/// presence. Always lands between his own cost and his partner's value.
pub fn vcg_seller_payment(
    graph: &MarketGraph,
    profile: &ValuationProfile,
    seller: usize,
) -> Result<Rat, MatchError> {
    check_agent(graph, AgentId::seller(seller))?;
    let matching = first_best(graph, profile);
    let Some(buyer) = matching.seller_partner(seller) else {
        return Err(MatchError::NotMatched(AgentId::seller(seller)));
    };
    let weights = NodeWeights::gains(profile);
    let engine = Engine::new(graph, &weights);
    let (b, s) = all_active(graph);
    let with = engine.optimal_weight(&b, &s);
    let (b, s) = active_without(graph, AgentId::seller(seller));
    let without = engine.optimal_weight(&b, &s);
    let receipt = &with - &without + &profile.s[seller];
    debug_assert!(receipt >= profile.s[seller]);
    debug_assert!(receipt <= profile.b[buyer]);
    Ok(receipt)
}

/// Number of efficient trades in a full bilateral market: the largest k
/// such that the k-th highest value weakly exceeds the k-th lowest cost.
/// Equals the size of the first-best matching on a complete graph.
pub fn efficient_trade_size_q(profile: &ValuationProfile) -> usize {
    let mut values = profile.b.clone();
    values.sort_by(|a, b| b.cmp(a));
    let mut costs = profile.s.clone();
    costs.sort();
    let mut q = 0;
    while q < values.len() && q < costs.len() && values[q] >= costs[q] {
        q += 1;
    }
    q
}

/// Per-class trade statistics of the first-best matching, and the two
/// competition ratios derived from them. For a class t, `matched[t]`
/// counts its members in the matching and `distinct_partners[t]` the
/// distinct classes on the other end of those pairs; `pair_count[(t,u)]`
/// counts matched pairs between buyer class t and seller class u.
///
/// `alpha` is the smallest 1 - d_t/q_t over classes that trade, `beta`
/// the smallest 1 - 1/r over trading class pairs; both default to 1 when
/// nothing trades, and beta never exceeds alpha.
#[derive(Debug, Clone)]
pub struct ClassStats {
    pub partition: ClassPartition,
    pub matching: Matching,
    pub matched: Vec<usize>,
    pub distinct_partners: Vec<usize>,
    pub pair_count: BTreeMap<(usize, usize), usize>,
    pub alpha: Rat,
    pub beta: Rat,
}

pub fn class_stats(graph: &MarketGraph, profile: &ValuationProfile) -> ClassStats {
    let partition = class_partition(graph);
    let matching = first_best(graph, profile);
    let n_classes = partition.classes.len();
    let mut matched = vec![0usize; n_classes];
    let mut partner_sets: Vec<std::collections::BTreeSet<usize>> =
        vec![Default::default(); n_classes];
    let mut pair_count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (i, j) in matching.pairs() {
        let tb = partition.buyer_class[i];
        let ts = partition.seller_class[j];
        matched[tb] += 1;
        matched[ts] += 1;
        partner_sets[tb].insert(ts);
        partner_sets[ts].insert(tb);
        *pair_count.entry((tb, ts)).or_insert(0) += 1;
    }
    let distinct_partners: Vec<usize> = partner_sets.iter().map(|s| s.len()).collect();

    let mut alpha = Rat::one();
    for t in 0..n_classes {
        if matched[t] > 0 {
            let ratio = Rat::one()
                - Rat::from(distinct_partners[t]) / Rat::from(matched[t]);
            alpha = alpha.min(ratio);
        }
    }
    let mut beta = Rat::one();
    for &r in pair_count.values() {
        if r > 0 {
            beta = beta.min(Rat::one() - Rat::one() / Rat::from(r));
        }
    }
    ClassStats { partition, matching, matched, distinct_partners, pair_count, alpha, beta }
}

/// Sentinel bid strictly dominating every welfare difference in the
/// market, used to force an agent into reduced-market matchings.
fn sentinel_bid(profile: &ValuationProfile) -> Rat {
    profile.b.iter().sum::<Rat>() + profile.s.iter().sum::<Rat>() + Rat::int(2)
}

/// Highest value buyer i could report and still trade with someone in the
/// market without seller j; her externality payment when bidding high
/// enough to surely match there. `None` when she has no partner left at
/// any bid (the threshold is unbounded).
///
/// Requires (i, j) to be a pair of the first-best matching.
pub fn buyer_threshold(
    graph: &MarketGraph,
    profile: &ValuationProfile,
    buyer: usize,
    seller: usize,
) -> Result<Option<Rat>, MatchError> {
    check_agent(graph, AgentId::buyer(buyer))?;
    check_agent(graph, AgentId::seller(seller))?;
    if !first_best(graph, profile).contains_pair(buyer, seller) {
        return Err(MatchError::PairNotEfficient(buyer, seller));
    }
    let sentinel = sentinel_bid(profile);
    let mut weights = NodeWeights::gains(profile);
    weights.buyer[buyer] = sentinel.clone();
    let engine = Engine::new(graph, &weights);
    let (b, s) = active_without(graph, AgentId::seller(seller));
    let with = engine.optimal_weight(&b, &s);
    let (mut b2, s2) = (b.clone(), s.clone());
    b2[buyer] = false;
    let without = engine.optimal_weight(&b2, &s2);
    if with == without {
        // no neighbor left, the sentinel bid changed nothing
        return Ok(None);
    }
    Ok(Some(&without - &with + &sentinel))
}

/// Lowest value the market without buyer i would still pay seller j: his
/// externality receipt there when reporting cost zero. Zero when he cannot
/// trade at any cost.
///
/// Requires (i, j) to be a pair of the first-best matching.
pub fn seller_threshold(
    graph: &MarketGraph,
    profile: &ValuationProfile,
    buyer: usize,
    seller: usize,
) -> Result<Rat, MatchError> {
    check_agent(graph, AgentId::buyer(buyer))?;
    check_agent(graph, AgentId::seller(seller))?;
    if !first_best(graph, profile).contains_pair(buyer, seller) {
        return Err(MatchError::PairNotEfficient(buyer, seller));
    }
    let mut weights = NodeWeights::gains(profile);
    weights.seller[seller] = Rat::zero();
    let engine = Engine::new(graph, &weights);
    let (b, s) = active_without(graph, AgentId::buyer(buyer));
    let with = engine.optimal_weight(&b, &s);
    let (b2, mut s2) = (b.clone(), s.clone());
    s2[seller] = false;
    let without = engine.optimal_weight(&b2, &s2);
    // receipt = with - without + reported cost, and the report is zero
    Ok(&with - &without)
}
