//! Value and cost distributions: finite discrete laws and closed uniform
//! intervals, with the Myerson machinery built on them (ironed virtual
//! values and costs, conditioning, optimal take-it-or-leave-it offers).
//!
//! Atom comparisons are weak on both sides: a buyer accepts a price equal
//! to her value and a seller accepts a price equal to his cost, so
//! `prob_at_least` and `prob_at_most` both include the boundary atom.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::rat::Rat;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DistError {
    #[error("discrete law needs at least one atom")]
    EmptySupport,
    #[error("atom probabilities must be positive and sum to one")]
    BadProbabilities,
    #[error("negative support point {0}")]
    NegativeAtom(Rat),
    #[error("uniform bounds must satisfy 0 <= lo < hi, got [{0}, {1}]")]
    BadUniform(Rat, Rat),
    #[error("conditioning on {0} leaves zero mass")]
    ZeroMassCondition(Rat),
    #[error("{0} is outside the support")]
    OutsideSupport(Rat),
    #[error("no support point reaches virtual value {0}")]
    Unattainable(Rat),
    #[error("offer bounds violated: lower {0} exceeds upper {1}")]
    OfferBounds(Rat, Rat),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Repr {
    /// Atoms sorted ascending by value, probabilities positive, summing to 1.
    Discrete(Vec<(Rat, Rat)>),
    Uniform { lo: Rat, hi: Rat },
}

/// A value or cost law. Either finitely supported or uniform on an
/// interval; all the interim quantities mechanisms need are exact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DistSchema", into = "DistSchema")]
pub struct Distribution(Repr);

/// Wire form: `{"type":"discrete","atoms":[["0","1/5"],["25","4/5"]]}` or
/// `{"type":"uniform","lo":"0","hi":"90"}`.
#[derive(Serialize, Deserialize, Clone)]
#[serde(tag = "type", rename_all = "lowercase")]
enum DistSchema {
    Discrete { atoms: Vec<(Rat, Rat)> },
    Uniform { lo: Rat, hi: Rat },
}

impl TryFrom<DistSchema> for Distribution {
    type Error = DistError;
    fn try_from(s: DistSchema) -> Result<Self, DistError> {
        match s {
            DistSchema::Discrete { atoms } => Distribution::discrete(atoms),
            DistSchema::Uniform { lo, hi } => Distribution::uniform(lo, hi),
        }
    }
}

impl From<Distribution> for DistSchema {
    fn from(d: Distribution) -> DistSchema {
        match d.0 {
            Repr::Discrete(atoms) => DistSchema::Discrete { atoms },
            Repr::Uniform { lo, hi } => DistSchema::Uniform { lo, hi },
        }
    }
}

impl Distribution {
    /// Finite law from (value, probability) pairs. Atoms are sorted and
    /// duplicates merged; probabilities must be positive and sum to one.
    pub fn discrete(atoms: Vec<(Rat, Rat)>) -> Result<Self, DistError> {
        if atoms.is_empty() {
            return Err(DistError::EmptySupport);
        }
        let mut sorted = atoms;
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(Rat, Rat)> = Vec::with_capacity(sorted.len());
        for (v, p) in sorted {
            if v.is_negative() {
                return Err(DistError::NegativeAtom(v));
            }
            if !p.is_positive() {
                return Err(DistError::BadProbabilities);
            }
            match merged.last_mut() {
                Some((lv, lp)) if *lv == v => *lp += p,
                _ => merged.push((v, p)),
            }
        }
        let total: Rat = merged.iter().map(|(_, p)| p).sum();
        if total != Rat::one() {
            return Err(DistError::BadProbabilities);
        }
        Ok(Distribution(Repr::Discrete(merged)))
    }

    pub fn point(value: Rat) -> Self {
        Distribution(Repr::Discrete(vec![(value, Rat::one())]))
    }

    pub fn uniform(lo: Rat, hi: Rat) -> Result<Self, DistError> {
        if lo.is_negative() || lo >= hi {
            return Err(DistError::BadUniform(lo, hi));
        }
        Ok(Distribution(Repr::Uniform { lo, hi }))
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.0, Repr::Discrete(_))
    }

    pub fn atoms(&self) -> Option<&[(Rat, Rat)]> {
        match &self.0 {
            Repr::Discrete(atoms) => Some(atoms),
            Repr::Uniform { .. } => None,
        }
    }

    pub fn uniform_bounds(&self) -> Option<(&Rat, &Rat)> {
        match &self.0 {
            Repr::Discrete(_) => None,
            Repr::Uniform { lo, hi } => Some((lo, hi)),
        }
    }

    pub fn support_min(&self) -> Rat {
        match &self.0 {
            Repr::Discrete(atoms) => atoms[0].0.clone(),
            Repr::Uniform { lo, .. } => lo.clone(),
        }
    }

    pub fn support_max(&self) -> Rat {
        match &self.0 {
            Repr::Discrete(atoms) => atoms.last().unwrap().0.clone(),
            Repr::Uniform { hi, .. } => hi.clone(),
        }
    }

    pub fn support_contains(&self, x: &Rat) -> bool {
        match &self.0 {
            Repr::Discrete(atoms) => atoms.iter().any(|(v, _)| v == x),
            Repr::Uniform { lo, hi } => lo <= x && x <= hi,
        }
    }

    pub fn expectation(&self) -> Rat {
        match &self.0 {
            Repr::Discrete(atoms) => atoms.iter().map(|(v, p)| v * p).sum(),
            Repr::Uniform { lo, hi } => (lo + hi) / Rat::int(2),
        }
    }

    /// P(X <= x), boundary atom included.
    pub fn prob_at_most(&self, x: &Rat) -> Rat {
        match &self.0 {
            Repr::Discrete(atoms) => atoms.iter().filter(|(v, _)| v <= x).map(|(_, p)| p).sum(),
            Repr::Uniform { lo, hi } => {
                if x <= lo {
                    Rat::zero()
                } else if x >= hi {
                    Rat::one()
                } else {
                    (x - lo) / (hi - lo)
                }
            }
        }
    }

    pub fn cdf(&self, x: &Rat) -> Rat {
        self.prob_at_most(x)
    }

    /// P(X >= x), boundary atom included.
    pub fn prob_at_least(&self, x: &Rat) -> Rat {
        match &self.0 {
            Repr::Discrete(atoms) => atoms.iter().filter(|(v, _)| v >= x).map(|(_, p)| p).sum(),
            Repr::Uniform { lo, hi } => {
                if x <= lo {
                    Rat::one()
                } else if x >= hi {
                    Rat::zero()
                } else {
                    (hi - x) / (hi - lo)
                }
            }
        }
    }

    /// Law of X given X >= c. Conditioning a uniform at its upper endpoint
    /// degenerates to the point mass there.
    pub fn condition_at_least(&self, c: &Rat) -> Result<Distribution, DistError> {
        match &self.0 {
            Repr::Discrete(atoms) => {
                let mass: Rat = atoms.iter().filter(|(v, _)| v >= c).map(|(_, p)| p).sum();
                if mass.is_zero() {
                    return Err(DistError::ZeroMassCondition(c.clone()));
                }
                let scaled = atoms
                    .iter()
                    .filter(|(v, _)| v >= c)
                    .map(|(v, p)| (v.clone(), p / &mass))
                    .collect();
                Ok(Distribution(Repr::Discrete(scaled)))
            }
            Repr::Uniform { lo, hi } => {
                if c > hi {
                    Err(DistError::ZeroMassCondition(c.clone()))
                } else if c == hi {
                    Ok(Distribution::point(hi.clone()))
                } else if c <= lo {
                    Ok(self.clone())
                } else {
                    Ok(Distribution(Repr::Uniform { lo: c.clone(), hi: hi.clone() }))
                }
            }
        }
    }

    /// Law of X given X <= c.
    pub fn condition_at_most(&self, c: &Rat) -> Result<Distribution, DistError> {
        match &self.0 {
            Repr::Discrete(atoms) => {
                let mass: Rat = atoms.iter().filter(|(v, _)| v <= c).map(|(_, p)| p).sum();
                if mass.is_zero() {
                    return Err(DistError::ZeroMassCondition(c.clone()));
                }
                let scaled = atoms
                    .iter()
                    .filter(|(v, _)| v <= c)
                    .map(|(v, p)| (v.clone(), p / &mass))
                    .collect();
                Ok(Distribution(Repr::Discrete(scaled)))
            }
            Repr::Uniform { lo, hi } => {
                if c < lo {
                    Err(DistError::ZeroMassCondition(c.clone()))
                } else if c == lo {
                    Ok(Distribution::point(lo.clone()))
                } else if c >= hi {
                    Ok(self.clone())
                } else {
                    Ok(Distribution(Repr::Uniform { lo: lo.clone(), hi: c.clone() }))
                }
            }
        }
    }

    /// Law of X given X > c, boundary atom excluded.
    pub fn condition_above(&self, c: &Rat) -> Result<Distribution, DistError> {
        match &self.0 {
            Repr::Discrete(atoms) => {
                let mass: Rat = atoms.iter().filter(|(v, _)| v > c).map(|(_, p)| p).sum();
                if mass.is_zero() {
                    return Err(DistError::ZeroMassCondition(c.clone()));
                }
                let scaled = atoms
                    .iter()
                    .filter(|(v, _)| v > c)
                    .map(|(v, p)| (v.clone(), p / &mass))
                    .collect();
                Ok(Distribution(Repr::Discrete(scaled)))
            }
            Repr::Uniform { lo, hi } => {
                if c >= hi {
                    Err(DistError::ZeroMassCondition(c.clone()))
                } else if c < lo {
                    Ok(self.clone())
                } else {
                    Ok(Distribution(Repr::Uniform { lo: c.clone(), hi: hi.clone() }))
                }
            }
        }
    }

    /// Law of X given X < c, boundary atom excluded.
    pub fn condition_below(&self, c: &Rat) -> Result<Distribution, DistError> {
        match &self.0 {
            Repr::Discrete(atoms) => {
                let mass: Rat = atoms.iter().filter(|(v, _)| v < c).map(|(_, p)| p).sum();
                if mass.is_zero() {
                    return Err(DistError::ZeroMassCondition(c.clone()));
                }
                let scaled = atoms
                    .iter()
                    .filter(|(v, _)| v < c)
                    .map(|(v, p)| (v.clone(), p / &mass))
                    .collect();
                Ok(Distribution(Repr::Discrete(scaled)))
            }
            Repr::Uniform { lo, hi } => {
                if c <= lo {
                    Err(DistError::ZeroMassCondition(c.clone()))
                } else if c > hi {
                    Ok(self.clone())
                } else {
                    Ok(Distribution(Repr::Uniform { lo: lo.clone(), hi: c.clone() }))
                }
            }
        }
    }

    /// Ironed virtual value at a support point. Nondecreasing over the
    /// support and never above the value itself.
    pub fn ironed_virtual_value(&self, v: &Rat) -> Result<Rat, DistError> {
        match &self.0 {
            Repr::Uniform { lo, hi } => {
                if v < lo || v > hi {
                    return Err(DistError::OutsideSupport(v.clone()));
                }
                Ok(Rat::int(2) * v - hi.clone())
            }
            Repr::Discrete(atoms) => {
                let idx = atoms
                    .iter()
                    .position(|(a, _)| a == v)
                    .ok_or_else(|| DistError::OutsideSupport(v.clone()))?;
                Ok(ironed_values_ascending(atoms)[idx].clone())
            }
        }
    }

    /// Ironed virtual cost at a support point. Nondecreasing and never
    /// below the cost itself.
    pub fn ironed_virtual_cost(&self, s: &Rat) -> Result<Rat, DistError> {
        match &self.0 {
            Repr::Uniform { lo, hi } => {
                if s < lo || s > hi {
                    return Err(DistError::OutsideSupport(s.clone()));
                }
                Ok(Rat::int(2) * s - lo.clone())
            }
            Repr::Discrete(atoms) => {
                let idx = atoms
                    .iter()
                    .position(|(a, _)| a == s)
                    .ok_or_else(|| DistError::OutsideSupport(s.clone()))?;
                Ok(ironed_costs_ascending(atoms)[idx].clone())
            }
        }
    }

    /// Smallest support point whose ironed virtual value weakly exceeds
    /// the threshold.
    pub fn inverse_ironed_virtual_value(&self, theta: &Rat) -> Result<Rat, DistError> {
        match &self.0 {
            Repr::Uniform { lo, hi } => {
                // phi(v) = 2v - hi is continuous and increasing
                if &(Rat::int(2) * lo - hi.clone()) >= theta {
                    Ok(lo.clone())
                } else if hi < theta {
                    Err(DistError::Unattainable(theta.clone()))
                } else {
                    Ok((theta + hi) / Rat::int(2))
                }
            }
            Repr::Discrete(atoms) => {
                let ironed = ironed_values_ascending(atoms);
                for (k, (v, _)) in atoms.iter().enumerate() {
                    if &ironed[k] >= theta {
                        return Ok(v.clone());
                    }
                }
                Err(DistError::Unattainable(theta.clone()))
            }
        }
    }

    /// One draw. Uniform laws sample on the dyadic 2^-32 grid of the
    /// interval; discrete laws invert the exact CDF at a dyadic uniform,
    /// so atom frequencies are exact up to 2^-32.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> Rat {
        let k = rng.next_u32();
        let u = Rat::int(k as i64) / Rat::int(1i64 << 32);
        match &self.0 {
            Repr::Discrete(atoms) => {
                let mut cum = Rat::zero();
                for (v, p) in atoms {
                    cum += p;
                    if u < cum {
                        return v.clone();
                    }
                }
                atoms.last().unwrap().0.clone()
            }
            Repr::Uniform { lo, hi } => lo + (hi - lo) * u,
        }
    }
}

/// Ironed virtual value per atom (ascending order). Build the revenue
/// points over descending values, take the upper concave envelope, and
/// read each atom's value off the slope of the segment covering its
/// quantile interval.
fn ironed_values_ascending(atoms: &[(Rat, Rat)]) -> Vec<Rat> {
    let n = atoms.len();
    // descending values with cumulative sale probability
    let mut points = Vec::with_capacity(n + 1);
    points.push((Rat::zero(), Rat::zero()));
    let mut cum = Rat::zero();
    for (v, p) in atoms.iter().rev() {
        cum += p;
        points.push((cum.clone(), v * &cum));
    }
    let hull = upper_concave_hull(&points);
    let slopes = interval_slopes(&points, &hull);
    // slopes are in descending-value order; flip back
    slopes.into_iter().rev().collect()
}

/// Ironed virtual cost per atom (ascending order), via the lower convex
/// envelope of the procurement cost curve.
fn ironed_costs_ascending(atoms: &[(Rat, Rat)]) -> Vec<Rat> {
    let n = atoms.len();
    let mut points = Vec::with_capacity(n + 1);
    points.push((Rat::zero(), Rat::zero()));
    let mut cum = Rat::zero();
    for (s, p) in atoms {
        cum += p;
        points.push((cum.clone(), s * &cum));
    }
    let hull = lower_convex_hull(&points);
    interval_slopes(&points, &hull)
}

fn slope(a: &(Rat, Rat), b: &(Rat, Rat)) -> Rat {
    (&b.1 - &a.1) / (&b.0 - &a.0)
}

/// Points come sorted by strictly increasing x; returns hull vertices.
fn upper_concave_hull(points: &[(Rat, Rat)]) -> Vec<(Rat, Rat)> {
    let mut hull: Vec<(Rat, Rat)> = Vec::with_capacity(points.len());
    for pt in points {
        while hull.len() >= 2
            && slope(&hull[hull.len() - 2], &hull[hull.len() - 1])
                <= slope(&hull[hull.len() - 1], pt)
        {
            hull.pop();
        }
        hull.push(pt.clone());
    }
    hull
}

fn lower_convex_hull(points: &[(Rat, Rat)]) -> Vec<(Rat, Rat)> {
    let mut hull: Vec<(Rat, Rat)> = Vec::with_capacity(points.len());
    for pt in points {
        while hull.len() >= 2
            && slope(&hull[hull.len() - 2], &hull[hull.len() - 1])
                >= slope(&hull[hull.len() - 1], pt)
        {
            hull.pop();
        }
        hull.push(pt.clone());
    }
    hull
}

/// Slope of the hull segment covering each consecutive point interval.
/// Hull vertices are a subset of the input points, so every interval
/// (x_{k-1}, x_k] lies inside a single segment.
fn interval_slopes(points: &[(Rat, Rat)], hull: &[(Rat, Rat)]) -> Vec<Rat> {
    let mut out = Vec::with_capacity(points.len() - 1);
    let mut seg = 1;
    for k in 1..points.len() {
        while hull[seg].0 < points[k].0 {
            seg += 1;
        }
        out.push(slope(&hull[seg - 1], &hull[seg]));
    }
    out
}

/// An offer together with the offerer's interim expected utility.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OfferResult {
    pub price: Rat,
    pub expected_utility: Rat,
}

/// Price a seller with the given cost posts against a buyer-value law,
/// optionally capped. Maximizes (p - cost) * P(value >= p) over the
/// candidate prices that matter (support points, the bounds, the closed
/// form for uniform laws), breaking ties toward the lowest price. The
/// returned price always satisfies cost <= price <= cap; when nothing
/// yields positive utility the seller posts her own cost.
pub fn optimal_seller_offer(
    cost: &Rat,
    target: &Distribution,
    cap: Option<&Rat>,
) -> Result<OfferResult, DistError> {
    if let Some(cap) = cap {
        if cost > cap {
            return Err(DistError::OfferBounds(cost.clone(), cap.clone()));
        }
    }
    let mut candidates: Vec<Rat> = vec![cost.clone()];
    if let Some(cap) = cap {
        candidates.push(cap.clone());
    }
    match &target.0 {
        Repr::Discrete(atoms) => {
            candidates.extend(atoms.iter().map(|(v, _)| v.clone()));
        }
        Repr::Uniform { lo, hi } => {
            let mut mid = (cost + hi) / Rat::int(2);
            if &mid < lo {
                mid = lo.clone();
            }
            if let Some(cap) = cap {
                if &mid > cap {
                    mid = cap.clone();
                }
            }
            candidates.push(mid);
            candidates.push(lo.clone());
        }
    }
    candidates.retain(|p| p >= cost && cap.is_none_or(|c| p <= c));
    candidates.sort();
    candidates.dedup();
    let mut best = OfferResult { price: cost.clone(), expected_utility: Rat::zero() };
    for p in candidates {
        let u = (&p - cost) * target.prob_at_least(&p);
        if u > best.expected_utility {
            best = OfferResult { price: p, expected_utility: u };
        }
    }
    Ok(best)
}

/// Price a buyer with the given value posts against a seller-cost law,
/// floored from below. Maximizes (value - p) * P(cost <= p), breaking
/// ties toward the highest price; floor <= price <= value always holds,
/// with the buyer posting her own value when nothing is profitable.
pub fn optimal_buyer_offer(
    value: &Rat,
    target: &Distribution,
    floor: &Rat,
) -> Result<OfferResult, DistError> {
    if value < floor {
        return Err(DistError::OfferBounds(floor.clone(), value.clone()));
    }
    let mut candidates: Vec<Rat> = vec![value.clone(), floor.clone()];
    match &target.0 {
        Repr::Discrete(atoms) => {
            candidates.extend(atoms.iter().map(|(v, _)| v.clone()));
        }
        Repr::Uniform { lo, hi } => {
            let mut mid = (value + lo) / Rat::int(2);
            if &mid < floor {
                mid = floor.clone();
            }
            if &mid > hi {
                mid = hi.clone();
            }
            candidates.push(mid);
        }
    }
    candidates.retain(|p| p >= floor && p <= value);
    candidates.sort();
    candidates.dedup();
    let mut best = OfferResult { price: value.clone(), expected_utility: Rat::zero() };
    for p in candidates {
        let u = (value - &p) * target.prob_at_most(&p);
        // weak improvement keeps the highest maximizer
        if u >= best.expected_utility {
            best = OfferResult { price: p, expected_utility: u };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc(atoms: &[(i64, (i64, i64))]) -> Distribution {
        Distribution::discrete(
            atoms.iter().map(|&(v, (n, d))| (Rat::int(v), Rat::new(n, d))).collect(),
        )
        .unwrap()
    }

    fn unif(lo: i64, hi: i64) -> Distribution {
        Distribution::uniform(Rat::int(lo), Rat::int(hi)).unwrap()
    }

    #[test]
    fn construction_validates() {
        assert!(Distribution::discrete(vec![]).is_err());
        assert!(Distribution::discrete(vec![(Rat::int(1), Rat::new(1, 2))]).is_err());
        assert!(Distribution::discrete(vec![(Rat::int(-1), Rat::one())]).is_err());
        assert!(Distribution::uniform(Rat::int(3), Rat::int(3)).is_err());
        assert!(Distribution::uniform(Rat::int(-1), Rat::int(3)).is_err());
        // duplicate atoms merge
        let d = Distribution::discrete(vec![
            (Rat::int(2), Rat::new(1, 4)),
            (Rat::int(2), Rat::new(1, 4)),
            (Rat::int(5), Rat::new(1, 2)),
        ])
        .unwrap();
        assert_eq!(d.atoms().unwrap().len(), 2);
        assert_eq!(d.prob_at_most(&Rat::int(2)), Rat::new(1, 2));
    }

    #[test]
    fn tail_probabilities_include_boundary_atoms() {
        let d = disc(&[(4, (1, 2)), (10, (1, 2))]);
        assert_eq!(d.prob_at_least(&Rat::int(4)), Rat::one());
        assert_eq!(d.prob_at_most(&Rat::int(4)), Rat::new(1, 2));
        assert_eq!(d.prob_at_least(&Rat::int(5)), Rat::new(1, 2));
        assert_eq!(d.prob_at_least(&Rat::int(11)), Rat::zero());
        assert_eq!(d.prob_at_most(&Rat::int(10)), Rat::one());
        let u = unif(0, 90);
        assert_eq!(u.prob_at_least(&Rat::int(24)), Rat::new(66, 90));
        assert_eq!(u.cdf(&Rat::int(24)), Rat::new(24, 90));
        assert_eq!(u.cdf(&Rat::int(-5)), Rat::zero());
        assert_eq!(u.cdf(&Rat::int(95)), Rat::one());
    }

    #[test]
    fn conditioning() {
        let d = disc(&[(0, (1, 5)), (25, (4, 5))]);
        let up = d.condition_at_least(&Rat::int(1)).unwrap();
        assert_eq!(up, Distribution::point(Rat::int(25)));
        let down = d.condition_at_most(&Rat::int(24)).unwrap();
        assert_eq!(down, Distribution::point(Rat::zero()));
        assert_eq!(d.condition_at_least(&Rat::zero()).unwrap(), d);
        assert!(d.condition_at_least(&Rat::int(26)).is_err());

        let u = unif(0, 90);
        let cut = u.condition_at_least(&Rat::int(24)).unwrap();
        assert_eq!(cut.uniform_bounds().unwrap(), (&Rat::int(24), &Rat::int(90)));
        assert_eq!(
            u.condition_at_least(&Rat::int(90)).unwrap(),
            Distribution::point(Rat::int(90))
        );
        assert_eq!(
            u.condition_at_most(&Rat::int(30)).unwrap().uniform_bounds().unwrap(),
            (&Rat::int(0), &Rat::int(30))
        );
    }

    #[test]
    fn strict_conditioning_drops_the_boundary_atom() {
        let d = disc(&[(2, (3, 8)), (3, (1, 8)), (4, (1, 2))]);
        let up = d.condition_above(&Rat::int(2)).unwrap();
        assert_eq!(
            up.atoms().unwrap(),
            &[(Rat::int(3), Rat::new(1, 5)), (Rat::int(4), Rat::new(4, 5))]
        );
        assert_eq!(d.condition_above(&Rat::int(1)).unwrap(), d);
        assert!(d.condition_above(&Rat::int(4)).is_err());
        let down = d.condition_below(&Rat::int(4)).unwrap();
        assert_eq!(
            down.atoms().unwrap(),
            &[(Rat::int(2), Rat::new(3, 4)), (Rat::int(3), Rat::new(1, 4))]
        );
        assert!(d.condition_below(&Rat::int(2)).is_err());

        let u = unif(0, 90);
        let up = u.condition_above(&Rat::int(24)).unwrap();
        assert_eq!(up.uniform_bounds().unwrap(), (&Rat::int(24), &Rat::int(90)));
        assert!(u.condition_above(&Rat::int(90)).is_err());
        assert!(u.condition_below(&Rat::zero()).is_err());
    }

    #[test]
    fn uniform_virtuals_are_closed_form() {
        let u = unif(0, 30);
        assert_eq!(u.ironed_virtual_value(&Rat::int(24)).unwrap(), Rat::int(18));
        assert_eq!(u.ironed_virtual_value(&Rat::int(0)).unwrap(), Rat::int(-30));
        assert_eq!(u.ironed_virtual_cost(&Rat::int(10)).unwrap(), Rat::int(20));
        assert!(u.ironed_virtual_value(&Rat::int(31)).is_err());
        let v = unif(0, 90);
        assert_eq!(v.ironed_virtual_value(&Rat::int(54)).unwrap(), Rat::int(18));
    }

    #[test]
    fn discrete_virtual_cost_matches_hand_formula() {
        // two-point law: tau(25) = 25 + 25 * (1/5) / (4/5)
        let d = disc(&[(0, (1, 5)), (25, (4, 5))]);
        assert_eq!(d.ironed_virtual_cost(&Rat::zero()).unwrap(), Rat::zero());
        assert_eq!(d.ironed_virtual_cost(&Rat::int(25)).unwrap(), Rat::new(125, 4));
    }

    #[test]
    fn discrete_virtual_value_two_point() {
        let d = disc(&[(0, (1, 5)), (25, (4, 5))]);
        assert_eq!(d.ironed_virtual_value(&Rat::int(25)).unwrap(), Rat::int(25));
        assert_eq!(d.ironed_virtual_value(&Rat::zero()).unwrap(), Rat::int(-100));
    }

    #[test]
    fn ironing_flattens_nonconcave_revenue_curve() {
        // revenue points (0,0), (1/2,2), (5/8,15/8), (1,2) need ironing:
        // the middle atom sits below the chord, both low atoms pool at 0
        let d = Distribution::discrete(vec![
            (Rat::int(2), Rat::new(3, 8)),
            (Rat::int(3), Rat::new(1, 8)),
            (Rat::int(4), Rat::new(1, 2)),
        ])
        .unwrap();
        assert_eq!(d.ironed_virtual_value(&Rat::int(4)).unwrap(), Rat::int(4));
        assert_eq!(d.ironed_virtual_value(&Rat::int(3)).unwrap(), Rat::zero());
        assert_eq!(d.ironed_virtual_value(&Rat::int(2)).unwrap(), Rat::zero());
    }

    #[test]
    fn ironing_flattens_nonconvex_cost_curve() {
        let d = Distribution::discrete(vec![
            (Rat::int(1), Rat::new(1, 2)),
            (Rat::int(2), Rat::new(1, 8)),
            (Rat::int(3), Rat::new(3, 8)),
        ])
        .unwrap();
        assert_eq!(d.ironed_virtual_cost(&Rat::int(1)).unwrap(), Rat::int(1));
        assert_eq!(d.ironed_virtual_cost(&Rat::int(2)).unwrap(), Rat::int(5));
        assert_eq!(d.ironed_virtual_cost(&Rat::int(3)).unwrap(), Rat::int(5));
    }

    #[test]
    fn virtuals_bracket_types() {
        for d in [
            disc(&[(1, (1, 2)), (3, (1, 4)), (7, (1, 4))]),
            disc(&[(2, (3, 8)), (3, (1, 8)), (4, (1, 2))]),
        ] {
            let atoms: Vec<Rat> = d.atoms().unwrap().iter().map(|(v, _)| v.clone()).collect();
            let mut prev_v: Option<Rat> = None;
            let mut prev_c: Option<Rat> = None;
            for a in &atoms {
                let vv = d.ironed_virtual_value(a).unwrap();
                let vc = d.ironed_virtual_cost(a).unwrap();
                assert!(vv <= *a);
                assert!(vc >= *a);
                if let Some(p) = prev_v {
                    assert!(vv >= p);
                }
                if let Some(p) = prev_c {
                    assert!(vc >= p);
                }
                prev_v = Some(vv);
                prev_c = Some(vc);
            }
            // the top virtual value is the top value, the bottom virtual cost the bottom cost
            assert_eq!(d.ironed_virtual_value(atoms.last().unwrap()).unwrap(), *atoms.last().unwrap());
            assert_eq!(d.ironed_virtual_cost(&atoms[0]).unwrap(), atoms[0].clone());
        }
    }

    #[test]
    fn inverse_virtual_value() {
        let u = unif(0, 90);
        assert_eq!(u.inverse_ironed_virtual_value(&Rat::int(18)).unwrap(), Rat::int(54));
        assert_eq!(u.inverse_ironed_virtual_value(&Rat::int(-90)).unwrap(), Rat::zero());
        assert_eq!(u.inverse_ironed_virtual_value(&Rat::int(90)).unwrap(), Rat::int(90));
        assert!(u.inverse_ironed_virtual_value(&Rat::int(91)).is_err());

        let d = disc(&[(0, (1, 5)), (25, (4, 5))]);
        assert_eq!(d.inverse_ironed_virtual_value(&Rat::int(10)).unwrap(), Rat::int(25));
        assert_eq!(d.inverse_ironed_virtual_value(&Rat::int(-100)).unwrap(), Rat::zero());
        assert!(d.inverse_ironed_virtual_value(&Rat::int(26)).is_err());
    }

    #[test]
    fn seller_offer_prefers_lowest_tie() {
        // cap excludes the high atom; prices 4 and 8 tie at utility 4
        let target = disc(&[(4, (1, 2)), (10, (1, 2))]);
        let offer =
            optimal_seller_offer(&Rat::zero(), &target, Some(&Rat::int(8))).unwrap();
        assert_eq!(offer.price, Rat::int(4));
        assert_eq!(offer.expected_utility, Rat::int(4));
        // uncapped, the high atom wins: 10 * 1/2 = 5
        let free = optimal_seller_offer(&Rat::zero(), &target, None).unwrap();
        assert_eq!(free.price, Rat::int(10));
        assert_eq!(free.expected_utility, Rat::int(5));
    }

    #[test]
    fn seller_offer_against_uniform() {
        // monopoly price (cost + hi) / 2
        let offer = optimal_seller_offer(&Rat::zero(), &unif(0, 90), None).unwrap();
        assert_eq!(offer.price, Rat::int(45));
        assert_eq!(offer.expected_utility, Rat::new(45, 2));
        // cap binds
        let capped =
            optimal_seller_offer(&Rat::zero(), &unif(0, 90), Some(&Rat::int(30))).unwrap();
        assert_eq!(capped.price, Rat::int(30));
        // unprofitable market: post own cost
        let hopeless = optimal_seller_offer(&Rat::int(200), &unif(0, 90), None).unwrap();
        assert_eq!(hopeless.price, Rat::int(200));
        assert_eq!(hopeless.expected_utility, Rat::zero());
        // cost above cap is a caller error
        assert!(optimal_seller_offer(&Rat::int(9), &unif(0, 90), Some(&Rat::int(8))).is_err());
    }

    #[test]
    fn buyer_offer_prefers_highest_tie() {
        let target = disc(&[(2, (1, 2)), (6, (1, 2))]);
        let offer = optimal_buyer_offer(&Rat::int(10), &target, &Rat::zero()).unwrap();
        assert_eq!(offer.price, Rat::int(6));
        assert_eq!(offer.expected_utility, Rat::int(4));
        // floor above every profitable price forces the floor or better
        let floored = optimal_buyer_offer(&Rat::int(10), &target, &Rat::int(7)).unwrap();
        assert_eq!(floored.price, Rat::int(7));
        assert_eq!(floored.expected_utility, Rat::int(3));
        assert!(optimal_buyer_offer(&Rat::int(5), &target, &Rat::int(6)).is_err());
    }

    #[test]
    fn buyer_offer_against_uniform() {
        let offer = optimal_buyer_offer(&Rat::int(60), &unif(0, 90), &Rat::zero()).unwrap();
        assert_eq!(offer.price, Rat::int(30));
        assert_eq!(offer.expected_utility, Rat::int(10));
        // value below the support: posts own value, trades never
        let dud = optimal_buyer_offer(&Rat::int(3), &unif(10, 20), &Rat::zero()).unwrap();
        assert_eq!(dud.price, Rat::int(3));
        assert_eq!(dud.expected_utility, Rat::zero());
    }

    #[test]
    fn sampling_is_reproducible_and_in_support() {
        use rand::SeedableRng;
        let d = disc(&[(0, (1, 5)), (25, (4, 5))]);
        let u = unif(0, 90);
        let mut r1 = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut r2 = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let a = d.sample(&mut r1);
            assert!(d.support_contains(&a));
            assert_eq!(a, d.sample(&mut r2));
            let x = u.sample(&mut r1);
            assert!(Rat::zero() <= x && x <= Rat::int(90));
            assert_eq!(x, u.sample(&mut r2));
        }
        assert_eq!(Distribution::point(Rat::int(5)).sample(&mut r1), Rat::int(5));
    }

    #[test]
    fn serde_schema_round_trip() {
        let d = disc(&[(0, (1, 5)), (25, (4, 5))]);
        let js = serde_json::to_string(&d).unwrap();
        assert_eq!(js, r#"{"type":"discrete","atoms":[["0","1/5"],["25","4/5"]]}"#);
        assert_eq!(serde_json::from_str::<Distribution>(&js).unwrap(), d);
        let u = unif(0, 90);
        let js = serde_json::to_string(&u).unwrap();
        assert_eq!(js, r#"{"type":"uniform","lo":"0","hi":"90"}"#);
        assert_eq!(serde_json::from_str::<Distribution>(&js).unwrap(), u);
        // invalid payloads are rejected at parse time
        assert!(serde_json::from_str::<Distribution>(
            r#"{"type":"discrete","atoms":[["1","1/2"]]}"#
        )
        .is_err());
        assert!(serde_json::from_str::<Distribution>(
            r#"{"type":"uniform","lo":"5","hi":"5"}"#
        )
        .is_err());
    }
}
