//! Single-pair offer mechanisms: a seller-offer, a buyer-offer, and the
//! fair-coin randomization over the two. Offers are optimal against a
//! target law and clamped into a [floor, cap] corridor; trades always
//! execute at the posted price, so both sides are ex-post individually
//! rational and the trade is exactly budget balanced.

use crate::dist::{optimal_buyer_offer, optimal_seller_offer, DistError, Distribution};
use crate::model::{Coin, Side};
use crate::rat::Rat;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BilateralError {
    #[error("price floor {0} is negative")]
    NegativeFloor(Rat),
    #[error("price cap {0} lies below the floor {1}")]
    CapBelowFloor(Rat, Rat),
    #[error("floor {0} exceeds the seller-offer target's lowest value {1}")]
    FloorAboveTarget(Rat, Rat),
    #[error("cap {0} lies below the buyer-offer target's highest cost {1}")]
    CapBelowTarget(Rat, Rat),
    #[error(transparent)]
    Offer(#[from] DistError),
}

/// Parameters of one randomized-offer instance.
///
/// The corridor satisfies cap >= floor >= 0; the seller-offer target (a
/// buyer-value law) is supported weakly above the floor and the
/// buyer-offer target (a seller-cost law) weakly below the cap. A missing
/// cap means unconstrained from above.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoParams {
    pub so_cap: Option<Rat>,
    pub so_target: Distribution,
    pub bo_floor: Rat,
    pub bo_target: Distribution,
}

impl RoParams {
    pub fn new(
        so_cap: Option<Rat>,
        so_target: Distribution,
        bo_floor: Rat,
        bo_target: Distribution,
    ) -> Result<Self, BilateralError> {
        if bo_floor.is_negative() {
            return Err(BilateralError::NegativeFloor(bo_floor));
        }
        if let Some(cap) = &so_cap {
            if *cap < bo_floor {
                return Err(BilateralError::CapBelowFloor(cap.clone(), bo_floor));
            }
            let top_cost = bo_target.support_max();
            if *cap < top_cost {
                return Err(BilateralError::CapBelowTarget(cap.clone(), top_cost));
            }
        }
        let bottom_value = so_target.support_min();
        if bo_floor > bottom_value {
            return Err(BilateralError::FloorAboveTarget(bo_floor, bottom_value));
        }
        Ok(RoParams { so_cap, so_target, bo_floor, bo_target })
    }
}

/// What one offer round produced. `price` is the posted price whether or
/// not it was accepted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BilateralOutcome {
    pub traded: bool,
    pub price: Rat,
    pub offerer: Side,
}

/// Seller posts her optimal capped price against the target value law;
/// the buyer accepts any price weakly below his value. The posted price
/// always lands in [floor, cap]: candidates never exceed the cap, and
/// anything below the floor is dominated by the corridor's bottom (the
/// target has no mass down there).
pub fn run_so(
    cost: &Rat,
    value: &Rat,
    params: &RoParams,
) -> Result<BilateralOutcome, BilateralError> {
    let offer = optimal_seller_offer(cost, &params.so_target, params.so_cap.as_ref())?;
    let price = offer.price;
    assert!(
        price >= params.bo_floor,
        "seller offer {price} escaped the corridor floor {}",
        params.bo_floor
    );
    Ok(BilateralOutcome { traded: value >= &price, price, offerer: Side::Seller })
}

/// Buyer posts his optimal floored price against the target cost law; the
/// seller accepts any price weakly above her cost. The posted price stays
/// in [floor, cap] for the mirror reason.
pub fn run_bo(
    cost: &Rat,
    value: &Rat,
    params: &RoParams,
) -> Result<BilateralOutcome, BilateralError> {
    let offer = optimal_buyer_offer(value, &params.bo_target, &params.bo_floor)?;
    let price = offer.price;
    if let Some(cap) = &params.so_cap {
        assert!(price <= *cap, "buyer offer {price} escaped the corridor cap {cap}");
    }
    Ok(BilateralOutcome { traded: cost <= &price, price, offerer: Side::Buyer })
}

/// Fair-coin randomization between the two offer directions.
pub fn run_ro(
    cost: &Rat,
    value: &Rat,
    params: &RoParams,
    coin: Coin,
) -> Result<BilateralOutcome, BilateralError> {
    match coin {
        Coin::SellerOffers => run_so(cost, value, params),
        Coin::BuyerOffers => run_bo(cost, value, params),
    }
}

/// Coin-expected gains from trade of the randomized offer at a true
/// (cost, value) pair: half the pair gain for each branch that trades.
pub fn expected_gft_ro(
    cost: &Rat,
    value: &Rat,
    params: &RoParams,
) -> Result<Rat, BilateralError> {
    let gain = value - cost;
    let half = Rat::new(1, 2);
    let mut total = Rat::zero();
    if run_so(cost, value, params)?.traded {
        total += &half * &gain;
    }
    if run_bo(cost, value, params)?.traded {
        total += &half * &gain;
    }
    Ok(total)
}
