//! Market primitives: agents, bipartite trade graphs, valuation profiles,
//! matchings and trade outcomes.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rat::Rat;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("edge ({0}, {1}) out of range for {2} buyers x {3} sellers")]
    EdgeOutOfRange(usize, usize, usize, usize),
    #[error("profile has {got} {side:?} entries, graph has {want}")]
    ProfileLength { side: Side, got: usize, want: usize },
    #[error("negative {side:?} entry at index {index}")]
    NegativeEntry { side: Side, index: usize },
    #[error("matching reuses {0}")]
    MatchingReusesAgent(AgentId),
    #[error("matching pair ({0}, {1}) is not a graph edge")]
    PairNotInGraph(usize, usize),
    #[error("graph gives both \"complete\": true and an edge list")]
    AmbiguousGraph,
    #[error("graph needs either \"complete\": true or an edge list")]
    MissingEdges,
}

/// Market side. Buyers order before sellers wherever a total order over
/// agents is needed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    Buyer,
    Seller,
}

/// Agent identity, ordered by (side, index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId {
    pub side: Side,
    pub index: usize,
}

impl AgentId {
    pub fn buyer(index: usize) -> Self {
        AgentId { side: Side::Buyer, index }
    }

    pub fn seller(index: usize) -> Self {
        AgentId { side: Side::Seller, index }
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.side {
            Side::Buyer => 'b',
            Side::Seller => 's',
        };
        write!(f, "{tag}{}", self.index)
    }
}

/// Which side moves first when a mechanism flips its fair coin. The seller
/// branch covers seller-made offers and the matching rule that virtualizes
/// buyer values; the buyer branch is the mirror.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Coin {
    SellerOffers,
    BuyerOffers,
}

impl Coin {
    pub const BOTH: [Coin; 2] = [Coin::SellerOffers, Coin::BuyerOffers];
}

impl fmt::Display for Coin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coin::SellerOffers => f.write_str("seller"),
            Coin::BuyerOffers => f.write_str("buyer"),
        }
    }
}

/// Bipartite trade graph. An edge (i, j) means buyer i may trade with
/// seller j. Edges are kept sorted; iteration order is (buyer, seller).
///
/// The wire form is `{"buyers": n, "sellers": m, "edges": [[i, j], ...]}`,
/// or `{"buyers": n, "sellers": m, "complete": true}` as a shorthand for
/// the full graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphSchema", into = "GraphSchema")]
pub struct MarketGraph {
    buyer_count: usize,
    seller_count: usize,
    edges: BTreeSet<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphSchema {
    buyers: usize,
    sellers: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edges: Option<Vec<(usize, usize)>>,
}

impl TryFrom<GraphSchema> for MarketGraph {
    type Error = ModelError;

    fn try_from(raw: GraphSchema) -> Result<Self, ModelError> {
        match (raw.complete, raw.edges) {
            (true, None) => Ok(MarketGraph::complete(raw.buyers, raw.sellers)),
            (false, Some(edges)) => MarketGraph::new(raw.buyers, raw.sellers, edges),
            (true, Some(_)) => Err(ModelError::AmbiguousGraph),
            (false, None) => Err(ModelError::MissingEdges),
        }
    }
}

impl From<MarketGraph> for GraphSchema {
    fn from(g: MarketGraph) -> GraphSchema {
        if g.is_complete() && g.buyer_count > 0 && g.seller_count > 0 {
            GraphSchema { buyers: g.buyer_count, sellers: g.seller_count, complete: true, edges: None }
        } else {
            GraphSchema {
                buyers: g.buyer_count,
                sellers: g.seller_count,
                complete: false,
                edges: Some(g.edges.into_iter().collect()),
            }
        }
    }
}

impl MarketGraph {
    pub fn new(
        buyer_count: usize,
        seller_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, ModelError> {
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= buyer_count || j >= seller_count {
                return Err(ModelError::EdgeOutOfRange(i, j, buyer_count, seller_count));
            }
            set.insert((i, j));
        }
        Ok(MarketGraph { buyer_count, seller_count, edges: set })
    }

    pub fn complete(buyer_count: usize, seller_count: usize) -> Self {
        let edges = (0..buyer_count)
            .flat_map(|i| (0..seller_count).map(move |j| (i, j)))
            .collect();
        MarketGraph { buyer_count, seller_count, edges }
    }

    pub fn buyer_count(&self) -> usize {
        self.buyer_count
    }

    pub fn seller_count(&self) -> usize {
        self.seller_count
    }

    pub fn is_complete(&self) -> bool {
        self.edges.len() == self.buyer_count * self.seller_count
    }

    pub fn has_edge(&self, buyer: usize, seller: usize) -> bool {
        self.edges.contains(&(buyer, seller))
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn buyer_neighbors(&self, buyer: usize) -> BTreeSet<usize> {
        self.edges
            .range((buyer, 0)..=(buyer, usize::MAX))
            .map(|&(_, j)| j)
            .collect()
    }

    pub fn seller_neighbors(&self, seller: usize) -> BTreeSet<usize> {
        self.edges
            .iter()
            .filter(|&&(_, j)| j == seller)
            .map(|&(i, _)| i)
            .collect()
    }
}

/// Reported values and costs for one market instance. Entries are
/// nonnegative; zero costs and zero values are legal (point masses at zero
/// occur in the canonical examples).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ValuationProfile {
    pub b: Vec<Rat>,
    pub s: Vec<Rat>,
}

impl ValuationProfile {
    pub fn new(b: Vec<Rat>, s: Vec<Rat>) -> Self {
        ValuationProfile { b, s }
    }

    pub fn validate_for(&self, graph: &MarketGraph) -> Result<(), ModelError> {
        if self.b.len() != graph.buyer_count() {
            return Err(ModelError::ProfileLength {
                side: Side::Buyer,
                got: self.b.len(),
                want: graph.buyer_count(),
            });
        }
        if self.s.len() != graph.seller_count() {
            return Err(ModelError::ProfileLength {
                side: Side::Seller,
                got: self.s.len(),
                want: graph.seller_count(),
            });
        }
        for (index, v) in self.b.iter().enumerate() {
            if v.is_negative() {
                return Err(ModelError::NegativeEntry { side: Side::Buyer, index });
            }
        }
        for (index, c) in self.s.iter().enumerate() {
            if c.is_negative() {
                return Err(ModelError::NegativeEntry { side: Side::Seller, index });
            }
        }
        Ok(())
    }

    /// Gain of a single pair, b_i - s_j.
    pub fn gain(&self, buyer: usize, seller: usize) -> Rat {
        &self.b[buyer] - &self.s[seller]
    }
}

/// A set of disjoint buyer-seller pairs, kept sorted by buyer index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Matching {
    pairs: BTreeSet<(usize, usize)>,
}

impl Matching {
    pub fn empty() -> Self {
        Matching::default()
    }

    pub fn new(pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, ModelError> {
        let mut set = BTreeSet::new();
        let mut buyers = BTreeSet::new();
        let mut sellers = BTreeSet::new();
        for (i, j) in pairs {
            if !buyers.insert(i) {
                return Err(ModelError::MatchingReusesAgent(AgentId::buyer(i)));
            }
            if !sellers.insert(j) {
                return Err(ModelError::MatchingReusesAgent(AgentId::seller(j)));
            }
            set.insert((i, j));
        }
        Ok(Matching { pairs: set })
    }

    pub fn validate_for(&self, graph: &MarketGraph) -> Result<(), ModelError> {
        for &(i, j) in &self.pairs {
            if !graph.has_edge(i, j) {
                return Err(ModelError::PairNotInGraph(i, j));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pairs in (buyer, seller) order; buyer indices are strictly increasing.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn contains_pair(&self, buyer: usize, seller: usize) -> bool {
        self.pairs.contains(&(buyer, seller))
    }

    pub fn buyer_partner(&self, buyer: usize) -> Option<usize> {
        self.pairs
            .range((buyer, 0)..=(buyer, usize::MAX))
            .next()
            .map(|&(_, j)| j)
    }

    pub fn seller_partner(&self, seller: usize) -> Option<usize> {
        self.pairs.iter().find(|&&(_, j)| j == seller).map(|&(i, _)| i)
    }

    pub fn matches_agent(&self, agent: AgentId) -> bool {
        match agent.side {
            Side::Buyer => self.buyer_partner(agent.index).is_some(),
            Side::Seller => self.seller_partner(agent.index).is_some(),
        }
    }
}

impl Serialize for Matching {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.pairs.iter())
    }
}

/// Total gains from trade of a matching under a profile: the sum of
/// b_i - s_j over its pairs. Pairs with negative gain count negatively.
pub fn gft(matching: &Matching, profile: &ValuationProfile) -> Rat {
    matching.pairs().map(|(i, j)| profile.gain(i, j)).sum()
}

/// Ranks two matchings in the ID-based lexicographic preference order.
/// Walk both pair lists sorted by buyer index; at the first difference, a
/// present pair beats an absent one, then the lower buyer index wins, then
/// the lower seller index. `Greater` means `a` is ranked higher.
///
/// The order is total on matchings of a given graph and ignores weights
/// entirely, so it is unaffected by perturbations; a superset of a matching
/// always ranks above it.
pub fn lex_compare(a: &Matching, b: &Matching) -> Ordering {
    let mut xs = a.pairs();
    let mut ys = b.pairs();
    loop {
        match (xs.next(), ys.next()) {
            (None, None) => return Ordering::Equal,
            (Some(_), None) => return Ordering::Greater,
            (None, Some(_)) => return Ordering::Less,
            (Some((i1, j1)), Some((i2, j2))) => {
                if i1 != i2 {
                    // lower buyer index ranks higher
                    return if i1 < i2 { Ordering::Greater } else { Ordering::Less };
                }
                if j1 != j2 {
                    return if j1 < j2 { Ordering::Greater } else { Ordering::Less };
                }
            }
        }
    }
}

/// One executed trade. The buyer pays `buyer_payment`, the seller receives
/// `seller_receipt`; the difference, when positive, is surplus withheld by
/// the mechanism.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Trade {
    pub buyer: usize,
    pub seller: usize,
    pub buyer_payment: Rat,
    pub seller_receipt: Rat,
}

/// Everything a mechanism run decides: who trades and at what transfers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TradeOutcome {
    pub mechanism: String,
    pub coin: Option<Coin>,
    pub trades: Vec<Trade>,
}

impl TradeOutcome {
    pub fn new(mechanism: &str, coin: Option<Coin>, trades: Vec<Trade>) -> Self {
        TradeOutcome { mechanism: mechanism.to_owned(), coin, trades }
    }

    pub fn matching(&self) -> Matching {
        Matching::new(self.trades.iter().map(|t| (t.buyer, t.seller)))
            .expect("trade lists never reuse an agent")
    }

    /// Realized gains from trade against the true profile.
    pub fn realized_gft(&self, profile: &ValuationProfile) -> Rat {
        self.trades.iter().map(|t| profile.gain(t.buyer, t.seller)).sum()
    }

    pub fn trade_of(&self, agent: AgentId) -> Option<&Trade> {
        self.trades.iter().find(|t| match agent.side {
            Side::Buyer => t.buyer == agent.index,
            Side::Seller => t.seller == agent.index,
        })
    }

    /// Utility of an agent under the true profile: value minus payment for a
    /// trading buyer, receipt minus cost for a trading seller, zero otherwise.
    pub fn utility_of(&self, agent: AgentId, profile: &ValuationProfile) -> Rat {
        match self.trade_of(agent) {
            None => Rat::zero(),
            Some(t) => match agent.side {
                Side::Buyer => &profile.b[agent.index] - &t.buyer_payment,
                Side::Seller => &t.seller_receipt - &profile.s[agent.index],
            },
        }
    }
}

/// A group of same-side agents with identical neighbor sets. Agents with no
/// edges at all share the per-side empty-neighborhood class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentClass {
    pub side: Side,
    pub members: Vec<usize>,
    pub neighbors: BTreeSet<usize>,
}

/// Partition of both sides into identical-neighborhood classes. Classes are
/// indexed buyers first, each side ordered by smallest member index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassPartition {
    pub classes: Vec<AgentClass>,
    pub buyer_class: Vec<usize>,
    pub seller_class: Vec<usize>,
}

impl ClassPartition {
    pub fn class_of(&self, agent: AgentId) -> usize {
        match agent.side {
            Side::Buyer => self.buyer_class[agent.index],
            Side::Seller => self.seller_class[agent.index],
        }
    }
}

/// Groups agents by neighbor set on each side.
pub fn class_partition(graph: &MarketGraph) -> ClassPartition {
    let mut classes = Vec::new();
    let mut buyer_class = vec![usize::MAX; graph.buyer_count()];
    let mut seller_class = vec![usize::MAX; graph.seller_count()];

    let mut by_nbrs: BTreeMap<BTreeSet<usize>, Vec<usize>> = BTreeMap::new();
    for i in 0..graph.buyer_count() {
        by_nbrs.entry(graph.buyer_neighbors(i)).or_default().push(i);
    }
    let mut buyer_groups: Vec<(BTreeSet<usize>, Vec<usize>)> = by_nbrs.into_iter().collect();
    buyer_groups.sort_by_key(|(_, members)| members[0]);
    for (neighbors, members) in buyer_groups {
        let id = classes.len();
        for &i in &members {
            buyer_class[i] = id;
        }
        classes.push(AgentClass { side: Side::Buyer, members, neighbors });
    }

    let mut by_nbrs: BTreeMap<BTreeSet<usize>, Vec<usize>> = BTreeMap::new();
    for j in 0..graph.seller_count() {
        by_nbrs.entry(graph.seller_neighbors(j)).or_default().push(j);
    }
    let mut seller_groups: Vec<(BTreeSet<usize>, Vec<usize>)> = by_nbrs.into_iter().collect();
    seller_groups.sort_by_key(|(_, members)| members[0]);
    for (neighbors, members) in seller_groups {
        let id = classes.len();
        for &j in &members {
            seller_class[j] = id;
        }
        classes.push(AgentClass { side: Side::Seller, members, neighbors });
    }

    ClassPartition { classes, buyer_class, seller_class }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(pairs: &[(usize, usize)]) -> Matching {
        Matching::new(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn graph_validates_edge_range() {
        assert!(MarketGraph::new(2, 2, [(0, 0), (1, 1)]).is_ok());
        assert_eq!(
            MarketGraph::new(2, 2, [(2, 0)]),
            Err(ModelError::EdgeOutOfRange(2, 0, 2, 2))
        );
    }

    #[test]
    fn complete_graph_has_all_edges() {
        let g = MarketGraph::complete(3, 2);
        assert!(g.is_complete());
        assert_eq!(g.edge_count(), 6);
        assert_eq!(g.buyer_neighbors(1), BTreeSet::from([0, 1]));
        assert_eq!(g.seller_neighbors(0), BTreeSet::from([0, 1, 2]));
    }

    #[test]
    fn profile_validation() {
        let g = MarketGraph::complete(2, 2);
        let ok = ValuationProfile::new(
            vec![Rat::int(9), Rat::int(7)],
            vec![Rat::int(0), Rat::int(2)],
        );
        ok.validate_for(&g).unwrap();
        let neg = ValuationProfile::new(
            vec![Rat::int(9), Rat::int(-1)],
            vec![Rat::int(1), Rat::int(2)],
        );
        assert_eq!(
            neg.validate_for(&g),
            Err(ModelError::NegativeEntry { side: Side::Buyer, index: 1 })
        );
        let short = ValuationProfile::new(vec![Rat::int(9)], vec![Rat::int(1), Rat::int(2)]);
        assert!(short.validate_for(&g).is_err());
    }

    #[test]
    fn matching_rejects_reuse() {
        assert!(Matching::new([(0, 0), (0, 1)]).is_err());
        assert!(Matching::new([(0, 0), (1, 0)]).is_err());
        assert!(Matching::new([(0, 1), (1, 0)]).is_ok());
    }

    #[test]
    fn gft_sums_pair_gains() {
        let p = ValuationProfile::new(
            vec![Rat::int(9), Rat::int(7)],
            vec![Rat::int(1), Rat::int(2)],
        );
        assert_eq!(gft(&m(&[(0, 0), (1, 1)]), &p), Rat::int(13));
        assert_eq!(gft(&m(&[(0, 1), (1, 0)]), &p), Rat::int(13));
        assert_eq!(gft(&Matching::empty(), &p), Rat::zero());
    }

    #[test]
    fn lex_order_prefers_present_edges_then_low_ids() {
        // any nonempty matching beats the empty one
        assert_eq!(lex_compare(&m(&[(0, 0)]), &Matching::empty()), Ordering::Greater);
        // same first buyer, lower seller wins
        assert_eq!(lex_compare(&m(&[(0, 0)]), &m(&[(0, 1)])), Ordering::Greater);
        // lower buyer index wins
        assert_eq!(lex_compare(&m(&[(0, 1)]), &m(&[(1, 0)])), Ordering::Greater);
        // supersets rank above subsets regardless of where the extra pair sits
        assert_eq!(lex_compare(&m(&[(0, 0), (1, 1)]), &m(&[(0, 0)])), Ordering::Greater);
        assert_eq!(lex_compare(&m(&[(0, 1), (1, 0)]), &m(&[(1, 0)])), Ordering::Greater);
        assert_eq!(lex_compare(&m(&[(0, 0)]), &m(&[(0, 0)])), Ordering::Equal);
    }

    #[test]
    fn outcome_utilities() {
        let p = ValuationProfile::new(vec![Rat::int(9)], vec![Rat::int(2)]);
        let out = TradeOutcome::new(
            "test",
            None,
            vec![Trade {
                buyer: 0,
                seller: 0,
                buyer_payment: Rat::int(7),
                seller_receipt: Rat::int(5),
            }],
        );
        assert_eq!(out.utility_of(AgentId::buyer(0), &p), Rat::int(2));
        assert_eq!(out.utility_of(AgentId::seller(0), &p), Rat::int(3));
        assert_eq!(out.realized_gft(&p), Rat::int(7));
    }

    #[test]
    fn classes_group_identical_neighborhoods() {
        // buyers 0,1 see both sellers; buyer 2 sees only seller 1; buyer 3 isolated
        let g = MarketGraph::new(4, 2, [(0, 0), (0, 1), (1, 0), (1, 1), (2, 1)]).unwrap();
        let cp = class_partition(&g);
        assert_eq!(cp.buyer_class[0], cp.buyer_class[1]);
        assert_ne!(cp.buyer_class[0], cp.buyer_class[2]);
        assert_ne!(cp.buyer_class[2], cp.buyer_class[3]);
        assert!(cp.classes[cp.buyer_class[3]].neighbors.is_empty());
        // sellers have distinct neighborhoods
        assert_ne!(cp.seller_class[0], cp.seller_class[1]);
        // complete graphs collapse to one class per side
        let cp2 = class_partition(&MarketGraph::complete(3, 3));
        assert_eq!(cp2.classes.len(), 2);
        assert_eq!(cp2.buyer_class, vec![0, 0, 0]);
        assert_eq!(cp2.seller_class, vec![1, 1, 1]);
        // isolated agents on both sides share their side's empty class
        let g3 = MarketGraph::new(2, 2, [(0, 0)]).unwrap();
        let cp3 = class_partition(&g3);
        assert_eq!(cp3.classes.len(), 4);
        assert!(cp3.classes[cp3.buyer_class[1]].neighbors.is_empty());
        assert!(cp3.classes[cp3.seller_class[1]].neighbors.is_empty());
    }
}
