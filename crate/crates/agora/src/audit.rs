//! Exhaustive audits over finite type spaces: per-outcome participation
//! and budget checks, exact interim and pointwise incentive comparisons,
//! per-profile gains floors, and the structure of the union of the
//! efficient matching with either one-sided virtual-weight matching.
//!
//! Everything here enumerates the full profile space with exact rational
//! arithmetic, so supports must stay small; `ENUMERATION_GUARD` caps the
//! blowup before any work starts.

use std::fmt;

use crate::matching::{
    class_stats, efficient_trade_size_q, first_best, matching_without, optimal_gft_without,
};
use crate::mechanisms::{
    run_gbom, run_gsom, run_mechanism, MechError, MechanismKind, NaiveOptions, Scenario,
};
use crate::model::{gft, AgentId, Coin, Matching, Side, TradeOutcome, ValuationProfile};
use crate::paths::{alternating_decomposition, EdgeOrigin};
use crate::rat::Rat;

/// Largest profile space an audit will enumerate.
pub const ENUMERATION_GUARD: u128 = 1_000_000;

/// A concrete violation: who could complain, at which profile, and how.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Witness {
    pub agent: Option<AgentId>,
    pub profile: ValuationProfile,
    pub deviation: Option<Rat>,
    pub coin: Option<Coin>,
    pub detail: String,
}

/// Verdict of one audit on one market environment.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct AuditReport {
    pub property: String,
    pub instance: String,
    pub pass: bool,
    /// Smallest slack seen across the whole sweep; negative iff failing.
    pub margin: Option<Rat>,
    pub witness: Option<Witness>,
}

impl AuditReport {
    fn passed(property: &str, instance: &str, margin: Option<Rat>) -> Self {
        AuditReport {
            property: property.to_owned(),
            instance: instance.to_owned(),
            pass: true,
            margin,
            witness: None,
        }
    }

    fn failed(property: &str, instance: &str, margin: Option<Rat>, witness: Witness) -> Self {
        AuditReport {
            property: property.to_owned(),
            instance: instance.to_owned(),
            pass: false,
            margin,
            witness: Some(witness),
        }
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "pass" } else { "FAIL" };
        write!(f, "{verdict} {} on {}", self.property, self.instance)?;
        if let Some(m) = &self.margin {
            write!(f, " (worst slack {m})")?;
        }
        if let Some(w) = &self.witness {
            write!(f, ": {}", w.detail)?;
        }
        Ok(())
    }
}

fn profile_brief(p: &ValuationProfile) -> String {
    let list = |xs: &[Rat]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
    format!("values [{}], costs [{}]", list(&p.b), list(&p.s))
}

fn guarded_profiles(sc: &Scenario) -> Result<Vec<(ValuationProfile, Rat)>, MechError> {
    let size = sc.profile_space_size().ok_or(MechError::InfiniteTypeSpace)?;
    if size > ENUMERATION_GUARD {
        return Err(MechError::TypeSpaceTooLarge(size));
    }
    sc.enumerate_profiles()
}

/// One entry per outcome the mechanism can produce at a profile: both coin
/// faces for randomized families, a single slot otherwise.
fn coin_slots(kind: MechanismKind) -> Vec<Option<Coin>> {
    if kind.uses_coin() {
        Coin::BOTH.iter().map(|&c| Some(c)).collect()
    } else {
        vec![None]
    }
}

fn run_slot(
    kind: MechanismKind,
    sc: &Scenario,
    profile: &ValuationProfile,
    slot: Option<Coin>,
    options: &NaiveOptions,
) -> Result<TradeOutcome, MechError> {
    run_mechanism(kind, sc, profile, slot.unwrap_or(Coin::SellerOffers), options)
}

fn track_min(margin: &mut Option<Rat>, v: &Rat) {
    if margin.as_ref().is_none_or(|m| v < m) {
        *margin = Some(v.clone());
    }
}

/// Whether the mechanism never pays out more than it collects on any
/// single outcome. The virtual-weight families subsidize some trades and
/// only break even across the coin, so they are out of scope here.
pub fn bb_is_guaranteed(kind: MechanismKind) -> bool {
    matches!(
        kind,
        MechanismKind::TrDa
            | MechanismKind::HybridDa
            | MechanismKind::TrMatching
            | MechanismKind::Offering
            | MechanismKind::HybridMatching
    )
}

/// Checks every realized trade for weak participation gains on both sides
/// and, where the mechanism promises it, a nonnegative per-trade budget.
pub fn audit_ex_post(
    kind: MechanismKind,
    sc: &Scenario,
    instance: &str,
    options: &NaiveOptions,
) -> Result<AuditReport, MechError> {
    let property = format!("ex-post-ir-bb({kind})");
    let check_bb = bb_is_guaranteed(kind);
    let mut margin: Option<Rat> = None;
    for (profile, _) in guarded_profiles(sc)? {
        for slot in coin_slots(kind) {
            let outcome = run_slot(kind, sc, &profile, slot, options)?;
            for t in &outcome.trades {
                let mut checks = vec![
                    (
                        &profile.b[t.buyer] - &t.buyer_payment,
                        Some(AgentId::buyer(t.buyer)),
                        format!(
                            "buyer {} pays {} against value {}",
                            t.buyer, t.buyer_payment, profile.b[t.buyer]
                        ),
                    ),
                    (
                        &t.seller_receipt - &profile.s[t.seller],
                        Some(AgentId::seller(t.seller)),
                        format!(
                            "seller {} receives {} against cost {}",
                            t.seller, t.seller_receipt, profile.s[t.seller]
                        ),
                    ),
                ];
                if check_bb {
                    checks.push((
                        &t.buyer_payment - &t.seller_receipt,
                        None,
                        format!(
                            "pair ({}, {}) collects {} but pays out {}",
                            t.buyer, t.seller, t.buyer_payment, t.seller_receipt
                        ),
                    ));
                }
                for (slack, agent, what) in checks {
                    track_min(&mut margin, &slack);
                    if slack < Rat::zero() {
                        let witness = Witness {
                            agent,
                            profile: profile.clone(),
                            deviation: None,
                            coin: slot,
                            detail: format!("{what} at {}", profile_brief(&profile)),
                        };
                        return Ok(AuditReport::failed(&property, instance, margin, witness));
                    }
                }
            }
        }
    }
    Ok(AuditReport::passed(&property, instance, margin))
}

type Runner<'a> = dyn Fn(&ValuationProfile, Option<Coin>) -> Result<TradeOutcome, MechError> + 'a;

/// Every pure profile's outcome under every coin slot, laid out so that a
/// unilateral deviation is one stride jump away.
struct DeviationTable {
    sizes: Vec<usize>,
    stride: Vec<usize>,
    agents: Vec<AgentId>,
    profiles: Vec<(ValuationProfile, Rat)>,
    outcomes: Vec<Vec<TradeOutcome>>,
    coins: Vec<Option<Coin>>,
}

impl DeviationTable {
    fn build(sc: &Scenario, coins: Vec<Option<Coin>>, runner: &Runner) -> Result<Self, MechError> {
        let sizes = sc.support_sizes().ok_or(MechError::InfiniteTypeSpace)?;
        let profiles = guarded_profiles(sc)?;
        let mut stride = vec![1usize; sizes.len()];
        for a in (0..sizes.len().saturating_sub(1)).rev() {
            stride[a] = stride[a + 1] * sizes[a + 1];
        }
        let mut outcomes = Vec::with_capacity(profiles.len());
        for (profile, _) in &profiles {
            let per: Result<Vec<TradeOutcome>, MechError> =
                coins.iter().map(|&slot| runner(profile, slot)).collect();
            outcomes.push(per?);
        }
        Ok(DeviationTable {
            sizes,
            stride,
            agents: sc.agents().collect(),
            profiles,
            outcomes,
            coins,
        })
    }

    fn own_index(&self, flat: usize, slot: usize) -> usize {
        flat / self.stride[slot] % self.sizes[slot]
    }

    /// Index of the profile identical to `flat` except that the agent in
    /// `slot` reports its `r_idx`-th atom.
    fn deviated(&self, flat: usize, slot: usize, r_idx: usize) -> usize {
        flat - self.own_index(flat, slot) * self.stride[slot] + r_idx * self.stride[slot]
    }

    fn coin_avg_utility(&self, flat: usize, agent: AgentId, truth: &ValuationProfile) -> Rat {
        let total: Rat = self.outcomes[flat].iter().map(|o| o.utility_of(agent, truth)).sum();
        total / Rat::int(self.coins.len() as i64)
    }
}

/// Interim comparison: for each agent and own type, the expected utility
/// over opponents and coin of reporting truthfully minus that of each
/// alternative report. Returns the smallest such difference and a witness
/// for the first negative one.
fn interim_deviation_audit(
    sc: &Scenario,
    coins: Vec<Option<Coin>>,
    runner: &Runner,
) -> Result<(Option<Rat>, Option<Witness>), MechError> {
    let table = DeviationTable::build(sc, coins, runner)?;
    let mut margin: Option<Rat> = None;
    for (slot, &agent) in table.agents.iter().enumerate() {
        let atoms = sc.dist_of(agent).atoms().expect("supports checked finite above").to_vec();
        for t_idx in 0..table.sizes[slot] {
            let own_prob = &atoms[t_idx].1;
            for r_idx in 0..table.sizes[slot] {
                if r_idx == t_idx {
                    continue;
                }
                let mut diff = Rat::zero();
                let mut example: Option<usize> = None;
                for flat in 0..table.profiles.len() {
                    if table.own_index(flat, slot) != t_idx {
                        continue;
                    }
                    example.get_or_insert(flat);
                    let (truth, prob) = &table.profiles[flat];
                    let others = prob / own_prob;
                    let u_true = table.coin_avg_utility(flat, agent, truth);
                    let u_dev =
                        table.coin_avg_utility(table.deviated(flat, slot, r_idx), agent, truth);
                    diff += others * (u_true - u_dev);
                }
                track_min(&mut margin, &diff);
                if diff < Rat::zero() {
                    let flat = example.expect("every own type indexes at least one profile");
                    let witness = Witness {
                        agent: Some(agent),
                        profile: table.profiles[flat].0.clone(),
                        deviation: Some(atoms[r_idx].0.clone()),
                        coin: None,
                        detail: format!(
                            "{agent} of type {} gains {} in expectation by reporting {}",
                            atoms[t_idx].0,
                            -&diff,
                            atoms[r_idx].0
                        ),
                    };
                    return Ok((margin, Some(witness)));
                }
            }
        }
    }
    Ok((margin, None))
}

/// Pointwise comparison: truth against each alternative report at every
/// full profile and coin face separately.
fn pointwise_deviation_audit(
    sc: &Scenario,
    coins: Vec<Option<Coin>>,
    runner: &Runner,
) -> Result<(Option<Rat>, Option<Witness>), MechError> {
    let table = DeviationTable::build(sc, coins, runner)?;
    let mut margin: Option<Rat> = None;
    for (slot, &agent) in table.agents.iter().enumerate() {
        let atoms = sc.dist_of(agent).atoms().expect("supports checked finite above").to_vec();
        for flat in 0..table.profiles.len() {
            let truth = &table.profiles[flat].0;
            let t_idx = table.own_index(flat, slot);
            for r_idx in 0..table.sizes[slot] {
                if r_idx == t_idx {
                    continue;
                }
                let dev = table.deviated(flat, slot, r_idx);
                for (c, &coin) in table.coins.iter().enumerate() {
                    let diff = table.outcomes[flat][c].utility_of(agent, truth)
                        - table.outcomes[dev][c].utility_of(agent, truth);
                    track_min(&mut margin, &diff);
                    if diff < Rat::zero() {
                        let coin_note = match coin {
                            Some(cn) => format!(" when the coin picks {cn} offers"),
                            None => String::new(),
                        };
                        let witness = Witness {
                            agent: Some(agent),
                            profile: truth.clone(),
                            deviation: Some(atoms[r_idx].0.clone()),
                            coin,
                            detail: format!(
                                "{agent} gains {} by reporting {}{coin_note} at {}",
                                -&diff,
                                atoms[r_idx].0,
                                profile_brief(truth)
                            ),
                        };
                        return Ok((margin, Some(witness)));
                    }
                }
            }
        }
    }
    Ok((margin, None))
}

/// Truth-telling maximizes each agent's exact interim expected utility,
/// checked against every alternative report in its own support.
pub fn audit_bic_exact(
    kind: MechanismKind,
    sc: &Scenario,
    instance: &str,
    options: &NaiveOptions,
) -> Result<AuditReport, MechError> {
    let property = format!("bayes-ic({kind})");
    let runner = |profile: &ValuationProfile, slot: Option<Coin>| {
        run_slot(kind, sc, profile, slot, options)
    };
    let (margin, witness) = interim_deviation_audit(sc, coin_slots(kind), &runner)?;
    Ok(match witness {
        None => AuditReport::passed(&property, instance, margin),
        Some(w) => AuditReport::failed(&property, instance, margin, w),
    })
}

/// Truth-telling is optimal at every realized profile and coin face, not
/// just on average over opponents.
pub fn audit_expost_ic(
    kind: MechanismKind,
    sc: &Scenario,
    instance: &str,
    options: &NaiveOptions,
) -> Result<AuditReport, MechError> {
    let property = format!("ex-post-ic({kind})");
    let runner = |profile: &ValuationProfile, slot: Option<Coin>| {
        run_slot(kind, sc, profile, slot, options)
    };
    let (margin, witness) = pointwise_deviation_audit(sc, coin_slots(kind), &runner)?;
    Ok(match witness {
        None => AuditReport::passed(&property, instance, margin),
        Some(w) => AuditReport::failed(&property, instance, margin, w),
    })
}

/// Per-profile floor on realized gains as a share of the efficient gains.
/// Reduction over a full market keeps a 1 - 1/q share once q reaches two;
/// the class-based reduction keeps its own alpha share everywhere, and the
/// hybrid keeps it whenever alpha is at least one half.
pub fn check_expost_ratio(
    kind: MechanismKind,
    sc: &Scenario,
    instance: &str,
    options: &NaiveOptions,
) -> Result<AuditReport, MechError> {
    let property = format!("gains-floor({kind})");
    let half = Rat::new(1, 2);
    let mut margin: Option<Rat> = None;
    for (profile, _) in guarded_profiles(sc)? {
        let opt = gft(&first_best(&sc.graph, &profile), &profile);
        let bound = match kind {
            MechanismKind::TrDa | MechanismKind::HybridDa => {
                let q = efficient_trade_size_q(&profile);
                if q < 2 {
                    None
                } else {
                    Some((Rat::one() - Rat::new(1, q as i64)) * &opt)
                }
            }
            MechanismKind::TrMatching => Some(class_stats(&sc.graph, &profile).alpha * &opt),
            MechanismKind::HybridMatching => {
                let alpha = class_stats(&sc.graph, &profile).alpha;
                if alpha >= half {
                    Some(alpha * &opt)
                } else {
                    None
                }
            }
            other => return Err(MechError::NoPointwiseGuarantee(other.label().to_string())),
        };
        let Some(bound) = bound else { continue };
        for slot in coin_slots(kind) {
            let outcome = run_slot(kind, sc, &profile, slot, options)?;
            let slack = outcome.realized_gft(&profile) - &bound;
            track_min(&mut margin, &slack);
            if slack < Rat::zero() {
                let witness = Witness {
                    agent: None,
                    profile: profile.clone(),
                    deviation: None,
                    coin: slot,
                    detail: format!(
                        "gains {} fall short of the floor {} (efficient gains {}) at {}",
                        outcome.realized_gft(&profile),
                        bound,
                        opt,
                        profile_brief(&profile)
                    ),
                };
                return Ok(AuditReport::failed(&property, instance, margin, witness));
            }
        }
    }
    Ok(AuditReport::passed(&property, instance, margin))
}

/// The coin-averaged gains of the mechanism cover at least half of the
/// coin-averaged gains of the randomized virtual-weight matching, profile
/// by profile.
pub fn check_pointwise_half_rvwm(
    kind: MechanismKind,
    sc: &Scenario,
    instance: &str,
    options: &NaiveOptions,
) -> Result<AuditReport, MechError> {
    if !matches!(
        kind,
        MechanismKind::HybridDa | MechanismKind::Offering | MechanismKind::HybridMatching
    ) {
        return Err(MechError::NoPointwiseGuarantee(kind.label().to_string()));
    }
    let property = format!("half-rvwm({kind})");
    let mut margin: Option<Rat> = None;
    for (profile, _) in guarded_profiles(sc)? {
        let g1 = gft(&run_gsom(sc, &profile)?, &profile);
        let g2 = gft(&run_gbom(sc, &profile)?, &profile);
        let floor = (g1 + g2) / Rat::int(4);
        let slots = coin_slots(kind);
        let total: Rat = slots
            .iter()
            .map(|&slot| {
                run_slot(kind, sc, &profile, slot, options).map(|o| o.realized_gft(&profile))
            })
            .sum::<Result<Rat, MechError>>()?;
        let avg = total / Rat::int(slots.len() as i64);
        let slack = &avg - &floor;
        track_min(&mut margin, &slack);
        if slack < Rat::zero() {
            let witness = Witness {
                agent: None,
                profile: profile.clone(),
                deviation: None,
                coin: None,
                detail: format!(
                    "coin-averaged gains {avg} fall short of half the virtual benchmark {floor} at {}",
                    profile_brief(&profile)
                ),
            };
            return Ok(AuditReport::failed(&property, instance, margin, witness));
        }
    }
    Ok(AuditReport::passed(&property, instance, margin))
}

/// Structural facts about the union of the efficient matching with each
/// one-sided virtual-weight matching, checked at every pure profile:
/// cycles only arise as the two copies of a shared edge; every open path
/// can be walked from an offering-side vertex whose first edge is
/// efficient; interior vertices on the quoted side stay matched once the
/// walk's starting vertex leaves the market; and when a path ends on the
/// quoted side, either its far offering-side vertex outranks the start and
/// survives the endpoint's departure, or the market without that final
/// pair still beats the virtual matching outright.
pub fn check_path_lemmas(sc: &Scenario, instance: &str) -> Result<AuditReport, MechError> {
    let property = "union-structure".to_string();
    for (profile, _) in guarded_profiles(sc)? {
        let efficient = first_best(&sc.graph, &profile);
        let sides = [
            (run_gsom(sc, &profile)?, Side::Buyer, "seller-offering"),
            (run_gbom(sc, &profile)?, Side::Seller, "buyer-offering"),
        ];
        for (virtual_side, start_side, side_name) in sides {
            if let Some(detail) =
                union_violation(sc, &profile, &efficient, &virtual_side, start_side)?
            {
                let witness = Witness {
                    agent: None,
                    profile: profile.clone(),
                    deviation: None,
                    coin: None,
                    detail: format!(
                        "{side_name} union: {detail} at {}",
                        profile_brief(&profile)
                    ),
                };
                return Ok(AuditReport::failed(&property, instance, None, witness));
            }
        }
    }
    Ok(AuditReport::passed(&property, instance, None))
}

fn union_violation(
    sc: &Scenario,
    profile: &ValuationProfile,
    efficient: &Matching,
    virtual_side: &Matching,
    start_side: Side,
) -> Result<Option<String>, MechError> {
    let weight_of = |v: AgentId| match v.side {
        Side::Buyer => profile.b[v.index].clone(),
        Side::Seller => profile.s[v.index].clone(),
    };
    for comp in alternating_decomposition(efficient, virtual_side) {
        debug_assert!(comp.alternates());
        if comp.is_cycle {
            if !comp.is_shared_edge_cycle() {
                return Ok(Some(format!(
                    "proper alternating cycle through {} vertices",
                    comp.vertices.len()
                )));
            }
            continue;
        }
        let oriented = [comp.clone(), comp.reversed()].into_iter().find(|p| {
            p.vertices[0].side == start_side
                && p.edges.first().is_some_and(|e| e.2 == EdgeOrigin::First)
        });
        let Some(path) = oriented else {
            return Ok(Some(format!(
                "open path through {:?} cannot start on the {:?} side with an efficient edge",
                comp.vertices, start_side
            )));
        };
        let start = path.vertices[0];
        let reduced = matching_without(&sc.graph, profile, start)?;
        for &v in &path.vertices[1..path.vertices.len() - 1] {
            if v.side != start_side && !reduced.matches_agent(v) {
                return Ok(Some(format!(
                    "{v} drops out of the efficient matching once {start} leaves"
                )));
            }
        }
        let last = *path.vertices.last().unwrap();
        if last.side == start_side {
            continue;
        }
        // path ends on the quoted side; far is its offering-side neighbor
        let far = path.vertices[path.vertices.len() - 2];
        let outranks = match start_side {
            Side::Buyer => weight_of(far) > weight_of(start),
            Side::Seller => weight_of(far) < weight_of(start),
        };
        if outranks {
            let without_last = matching_without(&sc.graph, profile, last)?;
            if !without_last.matches_agent(far) {
                return Ok(Some(format!(
                    "{far} outranks {start} yet drops out once {last} leaves"
                )));
            }
        } else {
            let reduced_opt = optimal_gft_without(&sc.graph, profile, &[far, last])?;
            let virtual_gains = gft(virtual_side, profile);
            if reduced_opt < virtual_gains {
                return Ok(Some(format!(
                    "without {far} and {last} the best gains {reduced_opt} fall below the virtual matching's {virtual_gains}"
                )));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::Distribution;
    use crate::model::{MarketGraph, Trade};

    fn atoms(pairs: &[(i64, i64, i64)]) -> Distribution {
        Distribution::discrete(
            pairs.iter().map(|&(v, n, d)| (Rat::int(v), Rat::new(n, d))).collect(),
        )
        .unwrap()
    }

    fn da_scenario() -> Scenario {
        Scenario::new(
            MarketGraph::complete(2, 2),
            vec![atoms(&[(1, 1, 2), (3, 1, 2)]), Distribution::point(Rat::int(2))],
            vec![atoms(&[(0, 1, 2), (2, 1, 2)]), Distribution::point(Rat::int(1))],
        )
        .unwrap()
    }

    fn grid_scenario() -> Scenario {
        Scenario::new(
            MarketGraph::complete(2, 2),
            vec![atoms(&[(1, 1, 2), (4, 1, 2)]), atoms(&[(2, 1, 4), (3, 3, 4)])],
            vec![atoms(&[(0, 1, 2), (2, 1, 2)]), atoms(&[(1, 1, 3), (5, 2, 3)])],
        )
        .unwrap()
    }

    fn sparse_scenario() -> Scenario {
        Scenario::new(
            MarketGraph::new(2, 2, vec![(0, 0), (1, 0), (1, 1)]).unwrap(),
            vec![atoms(&[(1, 1, 2), (4, 1, 2)]), atoms(&[(2, 1, 2), (3, 1, 2)])],
            vec![atoms(&[(0, 1, 2), (2, 1, 2)]), atoms(&[(1, 1, 2), (5, 1, 2)])],
        )
        .unwrap()
    }

    #[test]
    fn report_lines_read_cleanly() {
        let ok = AuditReport::passed("bayes-ic(tr-da)", "da", Some(Rat::new(1, 2)));
        assert_eq!(ok.to_string(), "pass bayes-ic(tr-da) on da (worst slack 1/2)");
        let witness = Witness {
            agent: None,
            profile: ValuationProfile::new(vec![], vec![]),
            deviation: None,
            coin: None,
            detail: "boom".to_string(),
        };
        let bad = AuditReport::failed("x", "y", Some(Rat::int(-1)), witness);
        assert_eq!(bad.to_string(), "FAIL x on y (worst slack -1): boom");
    }

    #[test]
    fn outcome_audit_clears_every_family_on_a_small_market() {
        let sc = da_scenario();
        let opts = NaiveOptions::default();
        for kind in [
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
        ] {
            let report = audit_ex_post(kind, &sc, "da", &opts).unwrap();
            assert!(report.pass, "{report}");
        }
    }

    #[test]
    fn interim_audit_accepts_the_truthful_families() {
        let sc = da_scenario();
        let opts = NaiveOptions::default();
        for kind in [
            MechanismKind::TrDa,
            MechanismKind::HybridDa,
            MechanismKind::TrMatching,
            MechanismKind::Offering,
            MechanismKind::HybridMatching,
            MechanismKind::Rvwm,
            MechanismKind::Gsom,
            MechanismKind::Gbom,
        ] {
            let report = audit_bic_exact(kind, &sc, "da", &opts).unwrap();
            assert!(report.pass, "{report}");
            assert!(report.margin.unwrap() >= Rat::zero());
        }
    }

    #[test]
    fn pointwise_audit_accepts_the_dominant_strategy_families() {
        let sc = da_scenario();
        let opts = NaiveOptions::default();
        for kind in [
            MechanismKind::TrDa,
            MechanismKind::TrMatching,
            MechanismKind::Rvwm,
            MechanismKind::Gsom,
            MechanismKind::Gbom,
        ] {
            let report = audit_expost_ic(kind, &sc, "da", &opts).unwrap();
            assert!(report.pass, "{report}");
        }
    }

    #[test]
    fn planted_greedy_pricing_fails_both_deviation_audits() {
        let sc = Scenario::new(
            MarketGraph::complete(1, 1),
            vec![atoms(&[(2, 1, 2), (5, 1, 2)])],
            vec![Distribution::point(Rat::int(1))],
        )
        .unwrap();
        let runner = |profile: &ValuationProfile,
                      _slot: Option<Coin>|
         -> Result<TradeOutcome, MechError> {
            let trades = if profile.b[0] >= profile.s[0] {
                vec![Trade {
                    buyer: 0,
                    seller: 0,
                    buyer_payment: profile.b[0].clone(),
                    seller_receipt: profile.s[0].clone(),
                }]
            } else {
                vec![]
            };
            Ok(TradeOutcome::new("pay-your-bid", None, trades))
        };
        let (margin, witness) = interim_deviation_audit(&sc, vec![None], &runner).unwrap();
        let w = witness.expect("shading the bid must be caught");
        assert_eq!(w.agent, Some(AgentId::buyer(0)));
        assert_eq!(w.deviation, Some(Rat::int(2)));
        assert!(margin.unwrap() < Rat::zero());

        let (_, pointwise) = pointwise_deviation_audit(&sc, vec![None], &runner).unwrap();
        assert!(pointwise.is_some());
    }

    #[test]
    fn gains_floor_holds_for_the_reduction_and_hybrid_families() {
        let sc = da_scenario();
        let opts = NaiveOptions::default();
        for kind in [
            MechanismKind::TrDa,
            MechanismKind::HybridDa,
            MechanismKind::TrMatching,
            MechanismKind::HybridMatching,
        ] {
            let report = check_expost_ratio(kind, &sc, "da", &opts).unwrap();
            assert!(report.pass, "{report}");
        }
    }

    #[test]
    fn gains_floor_is_undefined_for_virtual_weight_families() {
        let sc = da_scenario();
        match check_expost_ratio(MechanismKind::Rvwm, &sc, "da", &NaiveOptions::default()) {
            Err(MechError::NoPointwiseGuarantee(label)) => assert_eq!(label, "rvwm"),
            other => panic!("expected a scope error, got {other:?}"),
        }
    }

    #[test]
    fn coin_average_covers_half_the_virtual_benchmark() {
        let opts = NaiveOptions::default();
        for sc in [da_scenario(), grid_scenario()] {
            for kind in [
                MechanismKind::HybridDa,
                MechanismKind::Offering,
                MechanismKind::HybridMatching,
            ] {
                let report = check_pointwise_half_rvwm(kind, &sc, "grid", &opts).unwrap();
                assert!(report.pass, "{report}");
            }
        }
    }

    #[test]
    fn union_structure_holds_across_small_grids() {
        for sc in [da_scenario(), grid_scenario(), sparse_scenario()] {
            let report = check_path_lemmas(&sc, "grid").unwrap();
            assert!(report.pass, "{report}");
        }
    }

    #[test]
    fn audits_refuse_unbounded_or_huge_type_spaces() {
        let opts = NaiveOptions::default();
        let continuous = Scenario::new(
            MarketGraph::complete(1, 1),
            vec![Distribution::uniform(Rat::zero(), Rat::int(1)).unwrap()],
            vec![Distribution::point(Rat::zero())],
        )
        .unwrap();
        match audit_ex_post(MechanismKind::TrDa, &continuous, "u", &opts) {
            Err(MechError::InfiniteTypeSpace) => {}
            other => panic!("expected an enumerability error, got {other:?}"),
        }

        let two = atoms(&[(0, 1, 2), (1, 1, 2)]);
        let wide = Scenario::new(
            MarketGraph::complete(11, 10),
            vec![two.clone(); 11],
            vec![two; 10],
        )
        .unwrap();
        match audit_ex_post(MechanismKind::TrDa, &wide, "wide", &opts) {
            Err(MechError::TypeSpaceTooLarge(n)) => assert_eq!(n, 1 << 21),
            other => panic!("expected the guard to trip, got {other:?}"),
        }
    }
}
