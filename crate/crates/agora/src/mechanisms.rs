//! The trading mechanisms. Every mechanism consumes a reported valuation
//! profile and produces a `TradeOutcome`: who trades, what each buyer pays,
//! what each seller receives. Randomized mechanisms take the fair coin as
//! an explicit argument so callers control both branches.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bilateral::{run_ro, BilateralError, RoParams};
use crate::dist::{DistError, Distribution};
use crate::matching::{
    buyer_threshold, class_stats, efficient_trade_size_q, first_best, max_weight_matching,
    seller_threshold, MatchError, NodeWeights,
};
use crate::model::{
    AgentId, Coin, MarketGraph, Matching, ModelError, Side, Trade, TradeOutcome,
    ValuationProfile,
};
use crate::rat::Rat;

#[derive(Debug, thiserror::Error)]
pub enum MechError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Bilateral(#[from] BilateralError),
    #[error("mechanism requires a complete trade graph")]
    NotComplete,
    #[error("mechanism requires at least one agent per side")]
    EmptySide,
    #[error("{side:?} distributions: got {got}, graph has {want}")]
    DistLength { side: Side, got: usize, want: usize },
    #[error("type space is not finitely enumerable")]
    InfiniteTypeSpace,
    #[error("type space holds {0} profiles, too many to enumerate")]
    TypeSpaceTooLarge(u128),
    #[error("allocation is not monotone in {0}'s report")]
    NonMonotoneAllocation(AgentId),
    #[error("{0} makes no per-profile guarantee of this kind")]
    NoPointwiseGuarantee(String),
    #[error("unknown mechanism {0:?}")]
    UnknownMechanism(String),
}

/// A market environment: the trade graph plus one value law per buyer and
/// one cost law per seller.
///
/// Wire form:
/// `{"graph": {...}, "buyer_dists": [dist, ...], "seller_dists": [dist, ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioSchema", into = "ScenarioSchema")]
pub struct Scenario {
    pub graph: MarketGraph,
    pub buyer_dists: Vec<Distribution>,
    pub seller_dists: Vec<Distribution>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSchema {
    graph: MarketGraph,
    #[serde(rename = "buyer_dists")]
    buyers: Vec<Distribution>,
    #[serde(rename = "seller_dists")]
    sellers: Vec<Distribution>,
}

impl TryFrom<ScenarioSchema> for Scenario {
    type Error = MechError;

    fn try_from(raw: ScenarioSchema) -> Result<Self, MechError> {
        Scenario::new(raw.graph, raw.buyers, raw.sellers)
    }
}

impl From<Scenario> for ScenarioSchema {
    fn from(sc: Scenario) -> ScenarioSchema {
        ScenarioSchema { graph: sc.graph, buyers: sc.buyer_dists, sellers: sc.seller_dists }
    }
}

impl Scenario {
    pub fn new(
        graph: MarketGraph,
        buyer_dists: Vec<Distribution>,
        seller_dists: Vec<Distribution>,
    ) -> Result<Self, MechError> {
        if buyer_dists.len() != graph.buyer_count() {
            return Err(MechError::DistLength {
                side: Side::Buyer,
                got: buyer_dists.len(),
                want: graph.buyer_count(),
            });
        }
        if seller_dists.len() != graph.seller_count() {
            return Err(MechError::DistLength {
                side: Side::Seller,
                got: seller_dists.len(),
                want: graph.seller_count(),
            });
        }
        Ok(Scenario { graph, buyer_dists, seller_dists })
    }

    pub fn dist_of(&self, agent: AgentId) -> &Distribution {
        match agent.side {
            Side::Buyer => &self.buyer_dists[agent.index],
            Side::Seller => &self.seller_dists[agent.index],
        }
    }

    /// All agents in the canonical order: buyers by index, then sellers.
    pub fn agents(&self) -> impl Iterator<Item = AgentId> + '_ {
        let buyers = (0..self.graph.buyer_count()).map(AgentId::buyer);
        let sellers = (0..self.graph.seller_count()).map(AgentId::seller);
        buyers.chain(sellers)
    }

    pub fn validate_profile(&self, profile: &ValuationProfile) -> Result<(), MechError> {
        profile.validate_for(&self.graph)?;
        Ok(())
    }

    /// Atom counts per agent in canonical order; `None` when any law has
    /// infinite support.
    pub fn support_sizes(&self) -> Option<Vec<usize>> {
        self.agents().map(|a| self.dist_of(a).atoms().map(<[_]>::len)).collect()
    }

    /// Number of pure type profiles, when finite and representable.
    pub fn profile_space_size(&self) -> Option<u128> {
        let mut n: u128 = 1;
        for k in self.support_sizes()? {
            n = n.checked_mul(k as u128)?;
        }
        Some(n)
    }

    /// The profile selecting the given atom index for every agent, with
    /// its product probability. Indices follow the canonical agent order.
    pub fn profile_from_indices(
        &self,
        indices: &[usize],
    ) -> Result<(ValuationProfile, Rat), MechError> {
        let nb = self.graph.buyer_count();
        let ns = self.graph.seller_count();
        assert_eq!(indices.len(), nb + ns, "one atom index per agent");
        let mut b = Vec::with_capacity(nb);
        let mut s = Vec::with_capacity(ns);
        let mut prob = Rat::one();
        for (slot, agent) in self.agents().enumerate() {
            let atoms = self.dist_of(agent).atoms().ok_or(MechError::InfiniteTypeSpace)?;
            let (x, p) = &atoms[indices[slot]];
            prob *= p;
            match agent.side {
                Side::Buyer => b.push(x.clone()),
                Side::Seller => s.push(x.clone()),
            }
        }
        Ok((ValuationProfile::new(b, s), prob))
    }

    /// Every pure type profile with its probability, the last agent's
    /// index varying fastest. Errors on infinite type spaces; callers
    /// should bound `profile_space_size` first.
    pub fn enumerate_profiles(&self) -> Result<Vec<(ValuationProfile, Rat)>, MechError> {
        let sizes = self.support_sizes().ok_or(MechError::InfiniteTypeSpace)?;
        let total = self.profile_space_size().ok_or(MechError::InfiniteTypeSpace)?;
        let mut out = Vec::with_capacity(total.min(1 << 20) as usize);
        let mut indices = vec![0usize; sizes.len()];
        loop {
            out.push(self.profile_from_indices(&indices)?);
            let mut slot = sizes.len();
            loop {
                if slot == 0 {
                    return Ok(out);
                }
                slot -= 1;
                indices[slot] += 1;
                if indices[slot] < sizes[slot] {
                    break;
                }
                indices[slot] = 0;
            }
        }
    }
}

/// Identifier of one mechanism family, as used on the command line and in
/// report labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MechanismKind {
    TrDa,
    HybridDa,
    TrMatching,
    Offering,
    HybridMatching,
    Rvwm,
    Gsom,
    Gbom,
    NaiveMax,
    NaiveQSwitch,
}

impl MechanismKind {
    pub fn label(self) -> &'static str {
        match self {
            MechanismKind::TrDa => "tr-da",
            MechanismKind::HybridDa => "hybrid-da",
            MechanismKind::TrMatching => "tr-matching",
            MechanismKind::Offering => "offering",
            MechanismKind::HybridMatching => "hybrid-matching",
            MechanismKind::Rvwm => "rvwm",
            MechanismKind::Gsom => "gsom",
            MechanismKind::Gbom => "gbom",
            MechanismKind::NaiveMax => "naive-max",
            MechanismKind::NaiveQSwitch => "naive-qswitch",
        }
    }

    /// Whether the outcome depends on the fair coin.
    pub fn uses_coin(self) -> bool {
        matches!(
            self,
            MechanismKind::HybridDa
                | MechanismKind::Offering
                | MechanismKind::HybridMatching
                | MechanismKind::Rvwm
                | MechanismKind::NaiveMax
                | MechanismKind::NaiveQSwitch
        )
    }
}

impl std::fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for MechanismKind {
    type Err = MechError;

    fn from_str(s: &str) -> Result<Self, MechError> {
        Ok(match s {
            "tr-da" => MechanismKind::TrDa,
            "hybrid-da" => MechanismKind::HybridDa,
            "tr-matching" => MechanismKind::TrMatching,
            "offering" => MechanismKind::Offering,
            "hybrid-matching" => MechanismKind::HybridMatching,
            "rvwm" => MechanismKind::Rvwm,
            "naive-max" => MechanismKind::NaiveMax,
            "naive-qswitch" => MechanismKind::NaiveQSwitch,
            other => return Err(MechError::UnknownMechanism(other.to_string())),
        })
    }
}

/// Buyer indices sorted by value descending, index ascending.
fn buyers_desc(profile: &ValuationProfile) -> Vec<usize> {
    let mut order: Vec<usize> = (0..profile.b.len()).collect();
    order.sort_by(|&a, &b| profile.b[b].cmp(&profile.b[a]).then(a.cmp(&b)));
    order
}

/// Seller indices sorted by cost ascending, index ascending.
fn sellers_asc(profile: &ValuationProfile) -> Vec<usize> {
    let mut order: Vec<usize> = (0..profile.s.len()).collect();
    order.sort_by(|&a, &b| profile.s[a].cmp(&profile.s[b]).then(a.cmp(&b)));
    order
}

/// Trade-reduction double auction on a full market: with q efficient
/// trades, the q-1 strongest pairs trade at the pivotal prices, buyers
/// paying the q-th highest value and sellers receiving the q-th lowest
/// cost. One or zero efficient trades means nobody trades.
pub fn run_tr_da(
    graph: &MarketGraph,
    profile: &ValuationProfile,
) -> Result<TradeOutcome, MechError> {
    profile.validate_for(graph)?;
    if !graph.is_complete() {
        return Err(MechError::NotComplete);
    }
    let q = efficient_trade_size_q(profile);
    if q < 2 {
        return Ok(TradeOutcome::new(MechanismKind::TrDa.label(), None, vec![]));
    }
    let bi = buyers_desc(profile);
    let si = sellers_asc(profile);
    let pay = profile.b[bi[q - 1]].clone();
    let receive = profile.s[si[q - 1]].clone();
    debug_assert!(pay >= receive, "pivotal prices must not run a deficit");
    let mut trades: Vec<Trade> = (0..q - 1)
        .map(|k| Trade {
            buyer: bi[k],
            seller: si[k],
            buyer_payment: pay.clone(),
            seller_receipt: receive.clone(),
        })
        .collect();
    trades.sort_by_key(|t| (t.buyer, t.seller));
    Ok(TradeOutcome::new(MechanismKind::TrDa.label(), None, trades))
}

/// Ironed-virtual-value weights on the buyer side, true costs on the
/// seller side; the resulting maximum-weight matching.
pub fn run_gsom(sc: &Scenario, profile: &ValuationProfile) -> Result<Matching, MechError> {
    sc.validate_profile(profile)?;
    let mut buyer = Vec::with_capacity(profile.b.len());
    for (i, v) in profile.b.iter().enumerate() {
        buyer.push(sc.buyer_dists[i].ironed_virtual_value(v)?);
    }
    let seller = profile.s.iter().map(|s| -s).collect();
    Ok(max_weight_matching(&sc.graph, &NodeWeights::new(buyer, seller)))
}

/// True values on the buyer side, ironed-virtual-cost weights on the
/// seller side; the resulting maximum-weight matching.
pub fn run_gbom(sc: &Scenario, profile: &ValuationProfile) -> Result<Matching, MechError> {
    sc.validate_profile(profile)?;
    let buyer = profile.b.clone();
    let mut seller = Vec::with_capacity(profile.s.len());
    for (j, s) in profile.s.iter().enumerate() {
        seller.push(-sc.seller_dists[j].ironed_virtual_cost(s)?);
    }
    Ok(max_weight_matching(&sc.graph, &NodeWeights::new(buyer, seller)))
}

/// Which virtual-weight matching a coin branch runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchingRule {
    Gsom,
    Gbom,
}

impl MatchingRule {
    pub fn for_coin(coin: Coin) -> Self {
        match coin {
            Coin::SellerOffers => MatchingRule::Gsom,
            Coin::BuyerOffers => MatchingRule::Gbom,
        }
    }
}

fn matching_for(
    sc: &Scenario,
    profile: &ValuationProfile,
    rule: MatchingRule,
) -> Result<Matching, MechError> {
    match rule {
        MatchingRule::Gsom => run_gsom(sc, profile),
        MatchingRule::Gbom => run_gbom(sc, profile),
    }
}

/// Width below which the bisection for a critical price on an interval
/// type space stops. The returned price is always on the winning side of
/// the true threshold, so truthful participation never loses money.
pub fn critical_price_tolerance() -> Rat {
    Rat::new(1, 1 << 40)
}

/// Critical prices of every agent matched under the given rule: the worst
/// report that still trades. Buyers pay the lowest winning value in their
/// type space, sellers receive the highest winning cost. Finite supports
/// are swept exactly; interval supports are bisected to
/// `critical_price_tolerance`.
pub fn critical_payments(
    sc: &Scenario,
    profile: &ValuationProfile,
    rule: MatchingRule,
) -> Result<Vec<(AgentId, Rat)>, MechError> {
    let matching = matching_for(sc, profile, rule)?;
    let mut out = Vec::new();
    for (i, j) in matching.pairs() {
        out.push((AgentId::buyer(i), critical_price(sc, profile, rule, AgentId::buyer(i))?));
        out.push((AgentId::seller(j), critical_price(sc, profile, rule, AgentId::seller(j))?));
    }
    Ok(out)
}

fn critical_price(
    sc: &Scenario,
    profile: &ValuationProfile,
    rule: MatchingRule,
    agent: AgentId,
) -> Result<Rat, MechError> {
    let wins = |report: &Rat| -> Result<bool, MechError> {
        let mut p = profile.clone();
        match agent.side {
            Side::Buyer => p.b[agent.index] = report.clone(),
            Side::Seller => p.s[agent.index] = report.clone(),
        }
        Ok(matching_for(sc, &p, rule)?.matches_agent(agent))
    };
    let dist = sc.dist_of(agent);
    let truthful = match agent.side {
        Side::Buyer => &profile.b[agent.index],
        Side::Seller => &profile.s[agent.index],
    };
    if let Some(atoms) = dist.atoms() {
        // sweep the support from the losing end toward the agent's report
        // and demand a single switch-over
        let reports: Vec<&Rat> = match agent.side {
            Side::Buyer => atoms.iter().map(|(v, _)| v).collect(),
            Side::Seller => atoms.iter().rev().map(|(v, _)| v).collect(),
        };
        let mut critical = None;
        let mut in_winning_tail = false;
        for r in reports {
            let w = wins(r)?;
            if w && !in_winning_tail {
                in_winning_tail = true;
                critical = Some(r.clone());
            }
            if !w && in_winning_tail {
                return Err(MechError::NonMonotoneAllocation(agent));
            }
        }
        critical.ok_or(MechError::NonMonotoneAllocation(agent))
    } else {
        // interval support: bisect between the losing end of the interval
        // and the truthful (winning) report
        let (lo, hi) = dist.uniform_bounds().expect("non-finite law is an interval");
        let (mut lose, mut win) = match agent.side {
            Side::Buyer => {
                if wins(lo)? {
                    return Ok(lo.clone());
                }
                (lo.clone(), truthful.clone())
            }
            Side::Seller => {
                if wins(hi)? {
                    return Ok(hi.clone());
                }
                (hi.clone(), truthful.clone())
            }
        };
        let tol = critical_price_tolerance();
        while (&win - &lose).abs() > tol {
            let mid = (&win + &lose) / Rat::int(2);
            if wins(&mid)? {
                win = mid;
            } else {
                lose = mid;
            }
        }
        Ok(win)
    }
}

/// Randomized virtual-weight matching: a coin picks one of the two
/// virtual-weight matchings, and every matched agent trades at her
/// critical price.
pub fn run_rvwm(
    sc: &Scenario,
    profile: &ValuationProfile,
    coin: Coin,
) -> Result<TradeOutcome, MechError> {
    let rule = MatchingRule::for_coin(coin);
    let matching = matching_for(sc, profile, rule)?;
    let payments: BTreeMap<AgentId, Rat> =
        critical_payments(sc, profile, rule)?.into_iter().collect();
    let trades = matching
        .pairs()
        .map(|(i, j)| Trade {
            buyer: i,
            seller: j,
            buyer_payment: payments[&AgentId::buyer(i)].clone(),
            seller_receipt: payments[&AgentId::seller(j)].clone(),
        })
        .collect();
    Ok(TradeOutcome::new(MechanismKind::Rvwm.label(), Some(coin), trades))
}

/// The double auction that never runs a deficit and still captures a
/// guaranteed share of the efficient gains: trade reduction when two or
/// more trades are efficient, otherwise a randomized price offer between
/// the strongest pair inside the corridor set by the second-strongest
/// values.
pub fn run_hybrid_da(
    sc: &Scenario,
    profile: &ValuationProfile,
    coin: Coin,
) -> Result<TradeOutcome, MechError> {
    sc.validate_profile(profile)?;
    if !sc.graph.is_complete() {
        return Err(MechError::NotComplete);
    }
    if sc.graph.buyer_count() == 0 || sc.graph.seller_count() == 0 {
        return Err(MechError::EmptySide);
    }
    let label = MechanismKind::HybridDa.label();
    let q = efficient_trade_size_q(profile);
    if q >= 2 {
        let tr = run_tr_da(&sc.graph, profile)?;
        return Ok(TradeOutcome::new(label, Some(coin), tr.trades));
    }
    let bi = buyers_desc(profile);
    let si = sellers_asc(profile);
    let top_b = bi[0];
    let bot_s = si[0];
    let floor = if bi.len() >= 2 { profile.b[bi[1]].clone() } else { Rat::zero() };
    let cap = if si.len() >= 2 { Some(profile.s[si[1]].clone()) } else { None };
    // each offer target is the top agent's law conditioned on the exact
    // event that she keeps her spot: ties go to the smaller index, so a
    // top agent with the larger index holds it only strictly past the
    // runner-up
    let so_target = if bi.len() >= 2 && top_b > bi[1] {
        sc.buyer_dists[top_b].condition_above(&floor)?
    } else {
        sc.buyer_dists[top_b].condition_at_least(&floor)?
    };
    let bo_target = match &cap {
        Some(c) if bot_s > si[1] => sc.seller_dists[bot_s].condition_below(c)?,
        Some(c) => sc.seller_dists[bot_s].condition_at_most(c)?,
        None => sc.seller_dists[bot_s].clone(),
    };
    let params = RoParams::new(cap, so_target, floor, bo_target)?;
    let ro = run_ro(&profile.s[bot_s], &profile.b[top_b], &params, coin)?;
    let trades = if ro.traded {
        vec![Trade {
            buyer: top_b,
            seller: bot_s,
            buyer_payment: ro.price.clone(),
            seller_receipt: ro.price,
        }]
    } else {
        vec![]
    };
    Ok(TradeOutcome::new(label, Some(coin), trades))
}

/// Trade reduction generalized to an arbitrary trade graph: one efficient
/// pair is dropped per pair of trading agent classes, survivors trade at
/// their class's threshold prices (the best reduced value, the lowest
/// reduced cost).
pub fn run_tr_matching(
    graph: &MarketGraph,
    profile: &ValuationProfile,
) -> Result<TradeOutcome, MechError> {
    profile.validate_for(graph)?;
    let label = MechanismKind::TrMatching.label();
    let stats = class_stats(graph, profile);
    if stats.matching.is_empty() {
        return Ok(TradeOutcome::new(label, None, vec![]));
    }
    let part = &stats.partition;

    // matched members per class, in strength order: buyers by value
    // descending, sellers by cost ascending, indices breaking ties
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, j) in stats.matching.pairs() {
        members.entry(part.buyer_class[i]).or_default().push(i);
        members.entry(part.seller_class[j]).or_default().push(j);
    }
    let mut winners: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut threshold: BTreeMap<usize, Rat> = BTreeMap::new();
    for (&class, list) in members.iter_mut() {
        let side = part.classes[class].side;
        match side {
            Side::Buyer => list.sort_by(|&a, &b| profile.b[b].cmp(&profile.b[a]).then(a.cmp(&b))),
            Side::Seller => list.sort_by(|&a, &b| profile.s[a].cmp(&profile.s[b]).then(a.cmp(&b))),
        }
        let keep = stats.matched[class] - stats.distinct_partners[class];
        // the strongest displaced member sets the class price; one member
        // per partner class is displaced, so the index is always in range
        let pivot = list[keep];
        threshold.insert(
            class,
            match side {
                Side::Buyer => profile.b[pivot].clone(),
                Side::Seller => profile.s[pivot].clone(),
            },
        );
        winners.insert(class, list[..keep].to_vec());
    }

    // hand out winners pair by pair: buyer chunks advance over partner
    // classes in ascending order, seller chunks over buyer classes in
    // ascending order, which is exactly the sorted pair_count order on
    // each side
    let mut buyer_cursor: BTreeMap<usize, usize> = BTreeMap::new();
    let mut seller_chunks: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    let mut by_seller: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (&(tb, ts), &r) in &stats.pair_count {
        by_seller.entry(ts).or_default().push((tb, r));
    }
    let mut seller_cursor: BTreeMap<usize, usize> = BTreeMap::new();
    for (&ts, pairs) in &by_seller {
        for &(tb, r) in pairs {
            let cur = seller_cursor.entry(ts).or_insert(0);
            let take = r - 1;
            let list = &winners[&ts];
            seller_chunks.insert((tb, ts), list[*cur..*cur + take].to_vec());
            *cur += take;
        }
    }
    let mut trades = Vec::new();
    for (&(tb, ts), &r) in &stats.pair_count {
        let cur = buyer_cursor.entry(tb).or_insert(0);
        let take = r - 1;
        let buyers = &winners[&tb][*cur..*cur + take];
        *cur += take;
        let sellers = &seller_chunks[&(tb, ts)];
        for (&i, &j) in buyers.iter().zip(sellers) {
            let buyer_payment = threshold[&tb].clone();
            let seller_receipt = threshold[&ts].clone();
            debug_assert!(
                buyer_payment >= seller_receipt,
                "class thresholds must not run a deficit"
            );
            trades.push(Trade { buyer: i, seller: j, buyer_payment, seller_receipt });
        }
    }
    trades.sort_by_key(|t| (t.buyer, t.seller));
    Ok(TradeOutcome::new(label, None, trades))
}

/// Price corridors for one efficient pair: the buyer's threshold in the
/// market without her partner caps the price, the seller's threshold in
/// the market without his partner floors it.
fn pair_corridor(
    sc: &Scenario,
    profile: &ValuationProfile,
    buyer: usize,
    seller: usize,
) -> Result<RoParams, MechError> {
    let cap = buyer_threshold(&sc.graph, profile, buyer, seller)?;
    let floor = seller_threshold(&sc.graph, profile, buyer, seller)?;
    let so_target = sc.buyer_dists[buyer].condition_at_least(&floor)?;
    let bo_target = match &cap {
        Some(c) => sc.seller_dists[seller].condition_at_most(c)?,
        None => sc.seller_dists[seller].clone(),
    };
    Ok(RoParams::new(cap, so_target, floor, bo_target)?)
}

/// Randomized price offers along the efficient matching: each efficient
/// pair gets a take-it-or-leave-it price inside its own threshold
/// corridor, the single coin deciding for all pairs at once which side
/// proposes.
pub fn run_offering_matching(
    sc: &Scenario,
    profile: &ValuationProfile,
    coin: Coin,
) -> Result<TradeOutcome, MechError> {
    sc.validate_profile(profile)?;
    let matching = first_best(&sc.graph, profile);
    let mut trades = Vec::new();
    for (i, j) in matching.pairs() {
        let params = pair_corridor(sc, profile, i, j)?;
        let ro = run_ro(&profile.s[j], &profile.b[i], &params, coin)?;
        if ro.traded {
            trades.push(Trade {
                buyer: i,
                seller: j,
                buyer_payment: ro.price.clone(),
                seller_receipt: ro.price,
            });
        }
    }
    Ok(TradeOutcome::new(MechanismKind::Offering.label(), Some(coin), trades))
}

/// Deficit-free mechanism for arbitrary trade graphs: class-based trade
/// reduction when every trading class has enough internal competition
/// (alpha at least one half), per-pair randomized offers otherwise.
pub fn run_hybrid_matching(
    sc: &Scenario,
    profile: &ValuationProfile,
    coin: Coin,
) -> Result<TradeOutcome, MechError> {
    sc.validate_profile(profile)?;
    let stats = class_stats(&sc.graph, profile);
    let half = Rat::new(1, 2);
    let inner = if stats.alpha >= half {
        run_tr_matching(&sc.graph, profile)?
    } else {
        run_offering_matching(sc, profile, coin)?
    };
    Ok(TradeOutcome::new(MechanismKind::HybridMatching.label(), Some(coin), inner.trades))
}

/// Options for the naive comparison mechanisms.
#[derive(Debug, Clone, Copy, Default)]
pub struct NaiveOptions {
    /// Compare trade reduction against the realized (coin-dependent)
    /// virtual-weight matching instead of the coin average.
    pub compare_realized: bool,
}

/// Picks whichever of trade reduction and the randomized virtual-weight
/// matching yields more reported gains, ties going to trade reduction.
pub fn run_naive_max(
    sc: &Scenario,
    profile: &ValuationProfile,
    coin: Coin,
    options: &NaiveOptions,
) -> Result<TradeOutcome, MechError> {
    sc.validate_profile(profile)?;
    if !sc.graph.is_complete() {
        return Err(MechError::NotComplete);
    }
    let label = MechanismKind::NaiveMax.label();
    let tr = run_tr_da(&sc.graph, profile)?;
    let tr_gft = tr.realized_gft(profile);
    let rvwm_gft = if options.compare_realized {
        let m = matching_for(sc, profile, MatchingRule::for_coin(coin))?;
        crate::model::gft(&m, profile)
    } else {
        let g1 = crate::model::gft(&run_gsom(sc, profile)?, profile);
        let g2 = crate::model::gft(&run_gbom(sc, profile)?, profile);
        (g1 + g2) / Rat::int(2)
    };
    let inner = if tr_gft >= rvwm_gft { tr } else { run_rvwm(sc, profile, coin)? };
    Ok(TradeOutcome::new(label, Some(coin), inner.trades))
}

/// Runs trade reduction when it trades at all (two or more efficient
/// trades), the randomized virtual-weight matching otherwise.
pub fn run_naive_qswitch(
    sc: &Scenario,
    profile: &ValuationProfile,
    coin: Coin,
) -> Result<TradeOutcome, MechError> {
    sc.validate_profile(profile)?;
    if !sc.graph.is_complete() {
        return Err(MechError::NotComplete);
    }
    let label = MechanismKind::NaiveQSwitch.label();
    let inner = if efficient_trade_size_q(profile) >= 2 {
        run_tr_da(&sc.graph, profile)?
    } else {
        run_rvwm(sc, profile, coin)?
    };
    Ok(TradeOutcome::new(label, Some(coin), inner.trades))
}

/// Single entry point over all mechanism families.
pub fn run_mechanism(
    kind: MechanismKind,
    sc: &Scenario,
    profile: &ValuationProfile,
    coin: Coin,
    options: &NaiveOptions,
) -> Result<TradeOutcome, MechError> {
    match kind {
        MechanismKind::TrDa => run_tr_da(&sc.graph, profile),
        MechanismKind::HybridDa => run_hybrid_da(sc, profile, coin),
        MechanismKind::TrMatching => run_tr_matching(&sc.graph, profile),
        MechanismKind::Offering => run_offering_matching(sc, profile, coin),
        MechanismKind::HybridMatching => run_hybrid_matching(sc, profile, coin),
        MechanismKind::Rvwm => run_rvwm(sc, profile, coin),
        MechanismKind::Gsom | MechanismKind::Gbom => {
            let rule =
                if kind == MechanismKind::Gsom { MatchingRule::Gsom } else { MatchingRule::Gbom };
            let matching = matching_for(sc, profile, rule)?;
            let payments: BTreeMap<AgentId, Rat> =
                critical_payments(sc, profile, rule)?.into_iter().collect();
            let trades = matching
                .pairs()
                .map(|(i, j)| Trade {
                    buyer: i,
                    seller: j,
                    buyer_payment: payments[&AgentId::buyer(i)].clone(),
                    seller_receipt: payments[&AgentId::seller(j)].clone(),
                })
                .collect();
            Ok(TradeOutcome::new(kind.label(), None, trades))
        }
        MechanismKind::NaiveMax => run_naive_max(sc, profile, coin, options),
        MechanismKind::NaiveQSwitch => run_naive_qswitch(sc, profile, coin),
    }
}
