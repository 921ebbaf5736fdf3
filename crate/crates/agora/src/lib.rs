//! Two-sided market mechanisms over exact rational arithmetic.
//!
//! The crate models a bipartite market of unit-demand buyers and unit-supply
//! sellers, computes gains-from-trade-maximizing matchings with deterministic
//! ID-based tie-breaking, and implements a family of trading mechanisms on
//! top of that engine: trade reduction, randomized virtual-welfare matching,
//! per-pair offer mechanisms, and the hybrids that dispatch between them.
//! Everything that touches money or incentives runs on `Rat` (arbitrary
//! precision rationals); floats appear only in reporting layers.

pub mod audit;
pub mod bilateral;
pub mod dist;
pub mod library;
pub mod lp;
pub mod matching;
pub mod mechanisms;
pub mod model;
pub mod paths;
pub mod rat;

pub use rat::Rat;
