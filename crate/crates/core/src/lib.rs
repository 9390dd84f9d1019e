//! Split conformal prediction with exact coverage laws.
//!
//! Given a calibration sample of size `n` and a miscoverage level `alpha`,
//! the realized coverage of split conformal prediction sets over the next
//! `m` observations is a random variable with a known exact distribution:
//! beta-binomial at any finite horizon ([`dist::FiniteHorizonPmf`]) and
//! Beta(b, g) in the limit ([`dist::LimitDistribution`]), where
//! `b = ceil((1-alpha)(n+1))` and `g = floor(alpha(n+1))`.
//!
//! The crate provides those laws with stable numerics, a calibration-size
//! planner built on them, the conformal machinery itself (three scorers,
//! calibration, interval construction), small deterministic regression
//! models, and a reproducible Monte Carlo harness that checks the empirical
//! coverage distribution against the exact one.

pub mod conformal;
pub mod dist;
pub mod models;
pub mod sim;

mod error;
mod numeric;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
