//! Seeded simulation harness over the `agora` mechanism library.
//!
//! Replication r always draws from the ChaCha8 stream (seed, r), so a
//! report is a pure function of its configuration no matter how work is
//! split across threads. Aggregation folds replications in index order.

use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use agora::audit::{self, AuditReport, ENUMERATION_GUARD};
use agora::dist::Distribution;
use agora::matching::{class_stats, efficient_trade_size_q, max_weight_matching, NodeWeights};
use agora::mechanisms::{
    run_gbom, run_gsom, run_hybrid_da, run_mechanism, run_tr_da, MechError, MechanismKind,
    NaiveOptions, Scenario,
};
use agora::model::{gft, AgentId, Coin, MarketGraph, Side, TradeOutcome, ValuationProfile};
use agora::Rat;

/// Everything one simulation run depends on.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub label: String,
    pub mechanism: MechanismKind,
    pub replications: u64,
    pub seed: u64,
    pub enumerate: bool,
    pub naive: NaiveOptions,
}

/// Mean with a 95% confidence half-width; `per_buyer` rescales by the
/// number of buyers so markets of different sizes compare directly.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub half_width: f64,
    pub per_buyer: f64,
    pub exact_mean: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MechanismSummary {
    pub mechanism: String,
    pub gft: SummaryStats,
    pub ratio_of_means: f64,
    pub min_ratio: Option<f64>,
    pub mean_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TradeProbabilityRow {
    pub agent: String,
    pub value: String,
    pub probability: f64,
    pub half_width: f64,
}

/// One run's aggregate view. Field order is the canonical JSON key order.
#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub scenario: String,
    pub mode: String,
    pub replications: u64,
    pub seed: Option<u64>,
    pub opt: SummaryStats,
    pub mean_q: f64,
    pub min_q: f64,
    pub mean_alpha: f64,
    pub min_alpha: f64,
    pub mean_beta: f64,
    pub min_beta: f64,
    pub mechanisms: Vec<MechanismSummary>,
    pub trade_probabilities: Vec<TradeProbabilityRow>,
    pub hybrid_floor_ok: Option<bool>,
    pub ir_violations: u64,
    pub bb_violations: u64,
}

/// One mechanism evaluation on one profile, as it lands in the CSV.
#[derive(Debug, Clone)]
pub struct RecordRow {
    pub replication: u64,
    pub profile_hash: String,
    pub mechanism: String,
    pub coin: Option<Coin>,
    pub gft: Rat,
    pub opt: Rat,
    pub q: usize,
    pub alpha: Rat,
    pub beta: Rat,
    pub ir_ok: bool,
    pub bb_ok: bool,
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading scenario file {}", path.display()))?;
    let sc: Scenario = serde_json::from_str(&text)
        .with_context(|| format!("parsing scenario file {}", path.display()))?;
    Ok(sc)
}

/// FNV-1a over the canonical rendering of the profile, 16 hex digits.
pub fn profile_hash(profile: &ValuationProfile) -> String {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    fn eat(h: &mut u64, text: &str) {
        for b in text.bytes() {
            *h ^= u64::from(b);
            *h = h.wrapping_mul(PRIME);
        }
    }
    let mut h = OFFSET;
    for v in &profile.b {
        eat(&mut h, &v.to_string());
        eat(&mut h, ";");
    }
    eat(&mut h, "|");
    for s in &profile.s {
        eat(&mut h, &s.to_string());
        eat(&mut h, ";");
    }
    format!("{h:016x}")
}

pub fn write_csv(path: &Path, rows: &[RecordRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record([
        "replication",
        "profile_hash",
        "mechanism",
        "coin",
        "gft",
        "opt",
        "q",
        "alpha",
        "beta",
        "ir_ok",
        "bb_ok",
    ])?;
    for r in rows {
        w.write_record([
            r.replication.to_string(),
            r.profile_hash.clone(),
            r.mechanism.clone(),
            r.coin.map_or_else(|| "-".to_string(), |c| c.to_string()),
            r.gft.to_string(),
            r.opt.to_string(),
            r.q.to_string(),
            r.alpha.to_string(),
            r.beta.to_string(),
            r.ir_ok.to_string(),
            r.bb_ok.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn substream(seed: u64, r: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r);
    rng
}

fn sample_profile(sc: &Scenario, rng: &mut ChaCha8Rng) -> ValuationProfile {
    let b = sc.buyer_dists.iter().map(|d| d.sample(rng)).collect();
    let s = sc.seller_dists.iter().map(|d| d.sample(rng)).collect();
    ValuationProfile::new(b, s)
}

fn coin_slots(kind: MechanismKind) -> Vec<Option<Coin>> {
    if kind.uses_coin() {
        Coin::BOTH.iter().copied().map(Some).collect()
    } else {
        vec![None]
    }
}

fn half_width(sum: f64, sumsq: f64, n: f64) -> f64 {
    if n < 2.0 {
        return 0.0;
    }
    let mean = sum / n;
    let var = ((sumsq - n * mean * mean) / (n - 1.0)).max(0.0);
    1.96 * (var / n).sqrt()
}

struct RepOutcome {
    rows: Vec<RecordRow>,
    weight: Rat,
    gft: Rat,
    opt: Rat,
    q: usize,
    alpha: Rat,
    beta: Rat,
    ratio: Option<Rat>,
    ir_bad: u64,
    bb_bad: u64,
}

fn evaluate_profile(
    sc: &Scenario,
    mechanism: MechanismKind,
    naive: &NaiveOptions,
    replication: u64,
    profile: &ValuationProfile,
    weight: Rat,
) -> Result<RepOutcome, MechError> {
    let stats = class_stats(&sc.graph, profile);
    let opt = gft(&stats.matching, profile);
    let q = stats.matching.len();
    let hash = profile_hash(profile);
    let slots = coin_slots(mechanism);
    let mut rows = Vec::with_capacity(slots.len());
    let mut total = Rat::zero();
    let mut ir_bad = 0;
    let mut bb_bad = 0;
    for slot in &slots {
        let outcome = run_mechanism(
            mechanism,
            sc,
            profile,
            slot.unwrap_or(Coin::SellerOffers),
            naive,
        )?;
        let g = outcome.realized_gft(profile);
        let ir_ok = outcome.trades.iter().all(|t| {
            t.buyer_payment <= profile.b[t.buyer] && t.seller_receipt >= profile.s[t.seller]
        });
        let bb_ok = outcome.trades.iter().all(|t| t.buyer_payment >= t.seller_receipt);
        if !ir_ok {
            ir_bad += 1;
        }
        if audit::bb_is_guaranteed(mechanism) && !bb_ok {
            bb_bad += 1;
        }
        rows.push(RecordRow {
            replication,
            profile_hash: hash.clone(),
            mechanism: outcome.mechanism.clone(),
            coin: outcome.coin,
            gft: g.clone(),
            opt: opt.clone(),
            q,
            alpha: stats.alpha.clone(),
            beta: stats.beta.clone(),
            ir_ok,
            bb_ok,
        });
        total += g;
    }
    let avg = total / Rat::int(slots.len() as i64);
    let ratio = opt.is_positive().then(|| &avg / &opt);
    Ok(RepOutcome {
        rows,
        weight,
        gft: avg,
        opt,
        q,
        alpha: stats.alpha,
        beta: stats.beta,
        ratio,
        ir_bad,
        bb_bad,
    })
}

/// Runs the configured mechanism and folds per-replication results into a
/// report plus the flat record rows backing the optional CSV.
pub fn run_replications(cfg: &RunConfig) -> Result<(SimReport, Vec<RecordRow>)> {
    if cfg.enumerate {
        return enumerate_run(cfg);
    }
    ensure!(cfg.replications >= 1, "at least one replication is required");
    let outcomes: Vec<RepOutcome> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(cfg.seed, r);
            let profile = sample_profile(&cfg.scenario, &mut rng);
            evaluate_profile(&cfg.scenario, cfg.mechanism, &cfg.naive, r, &profile, Rat::one())
        })
        .collect::<Result<_, _>>()?;
    Ok(fold_run(cfg, "monte-carlo", Some(cfg.seed), outcomes, false))
}

fn enumerate_run(cfg: &RunConfig) -> Result<(SimReport, Vec<RecordRow>)> {
    let size = cfg
        .scenario
        .profile_space_size()
        .context("enumeration requires finitely supported value laws")?;
    if size > ENUMERATION_GUARD {
        bail!("type space holds {size} profiles, beyond the {ENUMERATION_GUARD} enumeration budget");
    }
    let profiles = cfg.scenario.enumerate_profiles()?;
    let outcomes: Vec<RepOutcome> = profiles
        .into_par_iter()
        .enumerate()
        .map(|(i, (profile, p))| {
            evaluate_profile(&cfg.scenario, cfg.mechanism, &cfg.naive, i as u64, &profile, p)
        })
        .collect::<Result<_, _>>()?;
    Ok(fold_run(cfg, "enumerate", None, outcomes, true))
}

fn fold_run(
    cfg: &RunConfig,
    mode: &str,
    seed: Option<u64>,
    outcomes: Vec<RepOutcome>,
    exact: bool,
) -> (SimReport, Vec<RecordRow>) {
    let n = outcomes.len() as f64;
    let buyers = cfg.scenario.graph.buyer_count() as f64;
    let mut rows = Vec::new();
    let mut gft_mass = Rat::zero();
    let mut opt_mass = Rat::zero();
    let (mut gs, mut gss, mut os, mut oss) = (0.0, 0.0, 0.0, 0.0);
    let mut wsum = 0.0;
    let (mut q_sum, mut a_sum, mut b_sum) = (0.0, 0.0, 0.0);
    let mut q_min = f64::INFINITY;
    let mut a_min = f64::INFINITY;
    let mut b_min = f64::INFINITY;
    let (mut ratio_sum, mut ratio_mass) = (0.0, 0.0);
    let mut ratio_min: Option<f64> = None;
    let (mut ir_bad, mut bb_bad) = (0u64, 0u64);
    for mut o in outcomes {
        rows.append(&mut o.rows);
        let w = o.weight.to_f64();
        let g = o.gft.to_f64();
        let p = o.opt.to_f64();
        if exact {
            gft_mass += &o.weight * &o.gft;
            opt_mass += &o.weight * &o.opt;
        }
        wsum += w;
        gs += w * g;
        gss += w * g * g;
        os += w * p;
        oss += w * p * p;
        q_sum += w * o.q as f64;
        a_sum += w * o.alpha.to_f64();
        b_sum += w * o.beta.to_f64();
        q_min = q_min.min(o.q as f64);
        a_min = a_min.min(o.alpha.to_f64());
        b_min = b_min.min(o.beta.to_f64());
        if let Some(r) = &o.ratio {
            let r = r.to_f64();
            ratio_sum += w * r;
            ratio_mass += w;
            ratio_min = Some(ratio_min.map_or(r, |m: f64| m.min(r)));
        }
        ir_bad += o.ir_bad;
        bb_bad += o.bb_bad;
    }
    let mean_gft = if exact { gft_mass.to_f64() } else { gs / wsum };
    let mean_opt = if exact { opt_mass.to_f64() } else { os / wsum };
    let report = SimReport {
        scenario: cfg.label.clone(),
        mode: mode.to_string(),
        replications: n as u64,
        seed,
        opt: SummaryStats {
            mean: mean_opt,
            half_width: if exact { 0.0 } else { half_width(os, oss, n) },
            per_buyer: mean_opt / buyers,
            exact_mean: exact.then(|| opt_mass.to_string()),
        },
        mean_q: q_sum / wsum,
        min_q: q_min,
        mean_alpha: a_sum / wsum,
        min_alpha: a_min,
        mean_beta: b_sum / wsum,
        min_beta: b_min,
        mechanisms: vec![MechanismSummary {
            mechanism: cfg.mechanism.label().to_string(),
            gft: SummaryStats {
                mean: mean_gft,
                half_width: if exact { 0.0 } else { half_width(gs, gss, n) },
                per_buyer: mean_gft / buyers,
                exact_mean: exact.then(|| gft_mass.to_string()),
            },
            ratio_of_means: if mean_opt > 0.0 { mean_gft / mean_opt } else { 0.0 },
            min_ratio: ratio_min,
            mean_ratio: (ratio_mass > 0.0).then(|| ratio_sum / ratio_mass),
        }],
        trade_probabilities: vec![],
        hybrid_floor_ok: None,
        ir_violations: ir_bad,
        bb_violations: bb_bad,
    };
    (report, rows)
}

/// Large symmetric market with unit-interval laws on both sides. Tracks
/// the efficient benchmark, plain trade reduction, the coin-averaged
/// virtual-weight matching, and the hybrid auction, all per replication.
/// Allocation probes only: no payments are computed, and the hybrid floor
/// (1 - 1/q) of the efficient gains is verified exactly on every draw.
pub fn reproduce_example_one(n: usize, reps: u64, seed: u64) -> Result<SimReport> {
    ensure!(n >= 2, "market needs at least two traders per side");
    ensure!(reps >= 1, "at least one replication is required");
    let unit = Distribution::uniform(Rat::zero(), Rat::one()).expect("unit interval");
    let sc = Scenario::new(
        MarketGraph::complete(n, n),
        vec![unit.clone(); n],
        vec![unit; n],
    )?;

    struct Rep {
        opt: f64,
        q: usize,
        alpha: f64,
        beta: f64,
        tr: f64,
        rvwm: f64,
        hybrid: f64,
        tr_ratio: Option<f64>,
        rvwm_ratio: Option<f64>,
        hybrid_ratio: Option<f64>,
        floor_ok: bool,
    }

    let data: Vec<Rep> = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<Rep> {
            let mut rng = substream(seed, r);
            let profile = sample_profile(&sc, &mut rng);
            let stats = class_stats(&sc.graph, &profile);
            let opt = gft(&stats.matching, &profile);
            let q = stats.matching.len();
            let tr = run_tr_da(&sc.graph, &profile)?.realized_gft(&profile);
            let g1 = gft(&run_gsom(&sc, &profile)?, &profile);
            let g2 = gft(&run_gbom(&sc, &profile)?, &profile);
            let rvwm = (g1 + g2) / Rat::int(2);
            let mut floor_ok = true;
            let mut hybrid_total = Rat::zero();
            for coin in Coin::BOTH {
                let h = run_hybrid_da(&sc, &profile, coin)?.realized_gft(&profile);
                if q >= 2 {
                    let floor = &opt - &(&opt / &Rat::int(q as i64));
                    if h < floor {
                        floor_ok = false;
                    }
                }
                hybrid_total += h;
            }
            let hybrid = hybrid_total / Rat::int(2);
            let ratio = |x: &Rat| opt.is_positive().then(|| (x / &opt).to_f64());
            Ok(Rep {
                opt: opt.to_f64(),
                q,
                alpha: stats.alpha.to_f64(),
                beta: stats.beta.to_f64(),
                tr: tr.to_f64(),
                rvwm: rvwm.to_f64(),
                hybrid: hybrid.to_f64(),
                tr_ratio: ratio(&tr),
                rvwm_ratio: ratio(&rvwm),
                hybrid_ratio: ratio(&hybrid),
                floor_ok,
            })
        })
        .collect::<Result<_>>()?;

    let nf = data.len() as f64;
    let buyers = n as f64;
    let fold = |xs: Vec<f64>| -> SummaryStats {
        let sum: f64 = xs.iter().sum();
        let sumsq: f64 = xs.iter().map(|x| x * x).sum();
        SummaryStats {
            mean: sum / nf,
            half_width: half_width(sum, sumsq, nf),
            per_buyer: sum / nf / buyers,
            exact_mean: None,
        }
    };
    let ratio_stats = |xs: Vec<Option<f64>>| -> (Option<f64>, Option<f64>) {
        let present: Vec<f64> = xs.into_iter().flatten().collect();
        if present.is_empty() {
            (None, None)
        } else {
            let min = present.iter().cloned().fold(f64::INFINITY, f64::min);
            let mean = present.iter().sum::<f64>() / present.len() as f64;
            (Some(min), Some(mean))
        }
    };
    let opt_stats = fold(data.iter().map(|d| d.opt).collect());
    let mean_opt = opt_stats.mean;
    let summarize = |label: &str, values: Vec<f64>, ratios: Vec<Option<f64>>| {
        let gft = fold(values);
        let (min_ratio, mean_ratio) = ratio_stats(ratios);
        MechanismSummary {
            mechanism: label.to_string(),
            ratio_of_means: if mean_opt > 0.0 { gft.mean / mean_opt } else { 0.0 },
            gft,
            min_ratio,
            mean_ratio,
        }
    };
    let report = SimReport {
        scenario: format!("uniform 0..1 double auction, {n}+{n} traders"),
        mode: "example-1".to_string(),
        replications: reps,
        seed: Some(seed),
        opt: opt_stats,
        mean_q: data.iter().map(|d| d.q as f64).sum::<f64>() / nf,
        min_q: data.iter().map(|d| d.q as f64).fold(f64::INFINITY, f64::min),
        mean_alpha: data.iter().map(|d| d.alpha).sum::<f64>() / nf,
        min_alpha: data.iter().map(|d| d.alpha).fold(f64::INFINITY, f64::min),
        mean_beta: data.iter().map(|d| d.beta).sum::<f64>() / nf,
        min_beta: data.iter().map(|d| d.beta).fold(f64::INFINITY, f64::min),
        mechanisms: vec![
            summarize(
                "tr-da",
                data.iter().map(|d| d.tr).collect(),
                data.iter().map(|d| d.tr_ratio).collect(),
            ),
            summarize(
                "rvwm",
                data.iter().map(|d| d.rvwm).collect(),
                data.iter().map(|d| d.rvwm_ratio).collect(),
            ),
            summarize(
                "hybrid-da",
                data.iter().map(|d| d.hybrid).collect(),
                data.iter().map(|d| d.hybrid_ratio).collect(),
            ),
        ],
        trade_probabilities: vec![],
        hybrid_floor_ok: Some(data.iter().all(|d| d.floor_ok)),
        ir_violations: 0,
        bb_violations: 0,
    };
    Ok(report)
}

/// The market behind the two pinned-buyer reproductions: buyer 0 on
/// U[0,90], buyer 1 on U[0,30], seller 0 free, seller 1 at cost 0 or 25.
pub fn pinned_buyer_scenario() -> Scenario {
    let b0 = Distribution::uniform(Rat::zero(), Rat::int(90)).expect("bounds ordered");
    let b1 = Distribution::uniform(Rat::zero(), Rat::int(30)).expect("bounds ordered");
    let s1 = Distribution::discrete(vec![
        (Rat::zero(), Rat::new(1, 5)),
        (Rat::int(25), Rat::new(4, 5)),
    ])
    .expect("weights sum to one");
    Scenario::new(
        MarketGraph::complete(2, 2),
        vec![b0, b1],
        vec![Distribution::point(Rat::zero()), s1],
    )
    .expect("lengths match the graph")
}

/// Four-trader market where buyer 1's realized value is pinned while its
/// value law stays in force for the virtual-weight transforms. Reports
/// how often the pinned buyer trades at each pinned value, Monte Carlo
/// over the continuous buyer-0 value and exact over the two-point cost
/// and the coin. Allocation probes only, matching the comparison rule of
/// the chosen mechanism on realized gains.
pub fn reproduce_example_prob(which: u8, reps: u64, seed: u64) -> Result<SimReport> {
    ensure!(reps >= 1, "at least one replication is required");
    let kind = match which {
        2 => MechanismKind::NaiveMax,
        3 => MechanismKind::NaiveQSwitch,
        _ => bail!("only markets 2 and 3 pin a buyer value"),
    };
    let sc = pinned_buyer_scenario();
    let b0 = sc.buyer_dists[0].clone();
    let s1_atoms = sc.seller_dists[1].atoms().expect("discrete").to_vec();
    let pinned = AgentId::buyer(1);

    struct Rep {
        p: f64,
        g: f64,
        opt: f64,
        q: f64,
        alpha: f64,
        beta: f64,
        min_q: f64,
        min_alpha: f64,
        min_beta: f64,
    }

    let mut probability_rows = Vec::new();
    let mut mechanism_rows = Vec::new();
    let mut opt_means = Vec::new();
    let mut opt_widths = Vec::new();
    let mut q_means = Vec::new();
    let mut a_means = Vec::new();
    let mut b_means = Vec::new();
    let mut q_mins = Vec::new();
    let mut a_mins = Vec::new();
    let mut b_mins = Vec::new();
    for value in [Rat::int(24), Rat::int(26)] {
        // the virtual transforms depend only on the laws, not the draw
        let phi_pinned = sc.buyer_dists[1].ironed_virtual_value(&value)?;
        let tau1: Vec<(Rat, Rat)> = s1_atoms
            .iter()
            .map(|(s, _)| Ok((s.clone(), sc.seller_dists[1].ironed_virtual_cost(s)?)))
            .collect::<Result<_>>()?;
        let data: Vec<Rep> = (0..reps)
            .into_par_iter()
            .map(|r| -> Result<Rep> {
                let mut rng = substream(seed, r);
                let b0v = b0.sample(&mut rng);
                let phi0 = b0.ironed_virtual_value(&b0v)?;
                let mut p = Rat::zero();
                let mut g = Rat::zero();
                let mut opt = Rat::zero();
                let mut q_acc = 0.0;
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut min_q = f64::INFINITY;
                let mut min_alpha = f64::INFINITY;
                let mut min_beta = f64::INFINITY;
                let half = Rat::new(1, 2);
                for (s1v, w) in &s1_atoms {
                    let tau1 = &tau1
                        .iter()
                        .find(|(s, _)| s == s1v)
                        .expect("atom came from the same support")
                        .1;
                    let profile = ValuationProfile::new(
                        vec![b0v.clone(), value.clone()],
                        vec![Rat::zero(), s1v.clone()],
                    );
                    // the coin branches are maximum-weight matchings of
                    // the half-virtualized weights
                    let gsom = max_weight_matching(
                        &sc.graph,
                        &NodeWeights::new(
                            vec![phi0.clone(), phi_pinned.clone()],
                            vec![Rat::zero(), -s1v],
                        ),
                    );
                    let gbom = max_weight_matching(
                        &sc.graph,
                        &NodeWeights::new(
                            vec![b0v.clone(), value.clone()],
                            vec![Rat::zero(), -tau1],
                        ),
                    );
                    let g_som = gft(&gsom, &profile);
                    let g_bom = gft(&gbom, &profile);
                    let tr = run_tr_da(&sc.graph, &profile)?;
                    let tr_gft = tr.realized_gft(&profile);
                    let q = efficient_trade_size_q(&profile);
                    let stats = class_stats(&sc.graph, &profile);
                    opt += w * &gft(&stats.matching, &profile);
                    q_acc += w.to_f64() * q as f64;
                    alpha += w.to_f64() * stats.alpha.to_f64();
                    beta += w.to_f64() * stats.beta.to_f64();
                    min_q = min_q.min(q as f64);
                    min_alpha = min_alpha.min(stats.alpha.to_f64());
                    min_beta = min_beta.min(stats.beta.to_f64());
                    let rvwm_expected = (&g_som + &g_bom) / Rat::int(2);
                    for coin in Coin::BOTH {
                        let branch = match coin {
                            Coin::SellerOffers => &gsom,
                            Coin::BuyerOffers => &gbom,
                        };
                        // ties go to trade reduction in both variants
                        let use_tr = match kind {
                            MechanismKind::NaiveMax => tr_gft >= rvwm_expected,
                            _ => q >= 2,
                        };
                        let (traded, realized) = if use_tr {
                            (tr.trade_of(pinned).is_some(), tr_gft.clone())
                        } else {
                            (branch.buyer_partner(pinned.index).is_some(), gft(branch, &profile))
                        };
                        if traded {
                            p += w * &half;
                        }
                        g += &(w * &half) * &realized;
                    }
                }
                Ok(Rep {
                    p: p.to_f64(),
                    g: g.to_f64(),
                    opt: opt.to_f64(),
                    q: q_acc,
                    alpha,
                    beta,
                    min_q,
                    min_alpha,
                    min_beta,
                })
            })
            .collect::<Result<_>>()?;
        let nf = data.len() as f64;
        let fold = |xs: Vec<f64>| -> (f64, f64) {
            let sum: f64 = xs.iter().sum();
            let sumsq: f64 = xs.iter().map(|x| x * x).sum();
            (sum / nf, half_width(sum, sumsq, nf))
        };
        let (p_mean, p_hw) = fold(data.iter().map(|d| d.p).collect());
        let (g_mean, g_hw) = fold(data.iter().map(|d| d.g).collect());
        let (o_mean, o_hw) = fold(data.iter().map(|d| d.opt).collect());
        probability_rows.push(TradeProbabilityRow {
            agent: pinned.to_string(),
            value: value.to_string(),
            probability: p_mean,
            half_width: p_hw,
        });
        mechanism_rows.push(MechanismSummary {
            mechanism: format!("{}@{}={}", kind.label(), pinned, value),
            gft: SummaryStats {
                mean: g_mean,
                half_width: g_hw,
                per_buyer: g_mean / 2.0,
                exact_mean: None,
            },
            ratio_of_means: if o_mean > 0.0 { g_mean / o_mean } else { 0.0 },
            min_ratio: None,
            mean_ratio: None,
        });
        opt_means.push(o_mean);
        opt_widths.push(o_hw);
        q_means.push(data.iter().map(|d| d.q).sum::<f64>() / nf);
        a_means.push(data.iter().map(|d| d.alpha).sum::<f64>() / nf);
        b_means.push(data.iter().map(|d| d.beta).sum::<f64>() / nf);
        q_mins.push(data.iter().map(|d| d.min_q).fold(f64::INFINITY, f64::min));
        a_mins.push(data.iter().map(|d| d.min_alpha).fold(f64::INFINITY, f64::min));
        b_mins.push(data.iter().map(|d| d.min_beta).fold(f64::INFINITY, f64::min));
    }
    let avg = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let lo = |xs: &[f64]| xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean_opt = avg(&opt_means);
    Ok(SimReport {
        scenario: format!(
            "pinned-buyer market {which}: b0 on U[0,90], s1 at 0 or 25, pinned {pinned}"
        ),
        mode: format!("example-{which}"),
        replications: reps,
        seed: Some(seed),
        opt: SummaryStats {
            mean: mean_opt,
            half_width: opt_widths.iter().cloned().fold(0.0, f64::max),
            per_buyer: mean_opt / 2.0,
            exact_mean: None,
        },
        mean_q: avg(&q_means),
        min_q: lo(&q_mins),
        mean_alpha: avg(&a_means),
        min_alpha: lo(&a_mins),
        mean_beta: avg(&b_means),
        min_beta: lo(&b_mins),
        mechanisms: mechanism_rows,
        trade_probabilities: probability_rows,
        hybrid_floor_ok: None,
        ir_violations: 0,
        bb_violations: 0,
    })
}

/// Exact audit battery for one mechanism on one finite market. The cheap
/// sweeps always run; `exhaustive` adds the quadratic deviation tables.
pub fn audit_battery(
    sc: &Scenario,
    label: &str,
    kind: MechanismKind,
    exhaustive: bool,
    naive: &NaiveOptions,
) -> Result<Vec<AuditReport>> {
    let mut reports = vec![audit::audit_ex_post(kind, sc, label, naive)?];
    match audit::check_expost_ratio(kind, sc, label, naive) {
        Ok(r) => reports.push(r),
        Err(MechError::NoPointwiseGuarantee(_)) => {}
        Err(e) => return Err(e.into()),
    }
    match audit::check_pointwise_half_rvwm(kind, sc, label, naive) {
        Ok(r) => reports.push(r),
        Err(MechError::NoPointwiseGuarantee(_)) => {}
        Err(e) => return Err(e.into()),
    }
    reports.push(audit::check_path_lemmas(sc, label)?);
    if exhaustive {
        reports.push(audit::audit_bic_exact(kind, sc, label, naive)?);
        if matches!(
            kind,
            MechanismKind::TrDa | MechanismKind::TrMatching | MechanismKind::Rvwm
        ) {
            reports.push(audit::audit_expost_ic(kind, sc, label, naive)?);
        }
    }
    Ok(reports)
}

/// Monte Carlo interim-regret probe for markets with continuous laws,
/// where the exact audits cannot enumerate. Advisory only: a small regret
/// estimate within its half-width is noise, not a proof.
#[derive(Debug, Clone, Serialize)]
pub struct AdvisoryRegret {
    pub property: String,
    pub instance: String,
    pub advisory: bool,
    pub agents: Vec<AgentRegret>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AgentRegret {
    pub agent: String,
    pub max_regret: f64,
    pub half_width: f64,
}

fn true_utility(outcome: &TradeOutcome, agent: AgentId, true_value: &Rat) -> Rat {
    match outcome.trade_of(agent) {
        None => Rat::zero(),
        Some(t) => match agent.side {
            Side::Buyer => true_value - &t.buyer_payment,
            Side::Seller => &t.seller_receipt - true_value,
        },
    }
}

pub fn advisory_bic_regret(
    sc: &Scenario,
    label: &str,
    kind: MechanismKind,
    naive: &NaiveOptions,
    probes: u64,
    draws: u64,
    seed: u64,
) -> Result<AdvisoryRegret> {
    ensure!(probes >= 1 && draws >= 2, "need probes and at least two draws each");
    let agents: Vec<AgentId> = sc.agents().collect();
    let mut rows = Vec::with_capacity(agents.len());
    for (a_idx, &agent) in agents.iter().enumerate() {
        let dist = sc.dist_of(agent).clone();
        let per_probe: Vec<(f64, f64)> = (0..probes)
            .into_par_iter()
            .map(|probe| -> Result<(f64, f64)> {
                let mut rng = substream(seed, (a_idx as u64) * probes + probe);
                let truth = dist.sample(&mut rng);
                let lie = dist.sample(&mut rng);
                let mut sum = 0.0;
                let mut sumsq = 0.0;
                for _ in 0..draws {
                    let profile = sample_profile(sc, &mut rng);
                    let mut honest = profile.clone();
                    let mut deviant = profile.clone();
                    match agent.side {
                        Side::Buyer => {
                            honest.b[agent.index] = truth.clone();
                            deviant.b[agent.index] = lie.clone();
                        }
                        Side::Seller => {
                            honest.s[agent.index] = truth.clone();
                            deviant.s[agent.index] = lie.clone();
                        }
                    }
                    let mut regret = Rat::zero();
                    let slots = coin_slots(kind);
                    for slot in &slots {
                        let coin = slot.unwrap_or(Coin::SellerOffers);
                        let u_honest =
                            true_utility(&run_mechanism(kind, sc, &honest, coin, naive)?, agent, &truth);
                        let u_deviant =
                            true_utility(&run_mechanism(kind, sc, &deviant, coin, naive)?, agent, &truth);
                        regret += u_deviant - u_honest;
                    }
                    let x = regret.to_f64() / slots.len() as f64;
                    sum += x;
                    sumsq += x * x;
                }
                Ok((sum / draws as f64, half_width(sum, sumsq, draws as f64)))
            })
            .collect::<Result<_>>()?;
        let (max_regret, hw) = per_probe
            .into_iter()
            .fold((f64::NEG_INFINITY, 0.0), |acc, (m, w)| {
                if m > acc.0 {
                    (m, w)
                } else {
                    acc
                }
            });
        rows.push(AgentRegret {
            agent: agent.to_string(),
            max_regret,
            half_width: hw,
        });
    }
    Ok(AdvisoryRegret {
        property: format!("bayes-ic-monte-carlo({kind})"),
        instance: label.to_string(),
        advisory: true,
        agents: rows,
    })
}

pub fn report_json<T: Serialize>(report: &T) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("reports always serialize");
    text.push('\n');
    text
}
