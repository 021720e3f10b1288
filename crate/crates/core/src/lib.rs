//! Numerical core for two-player risk-sensitive stochastic differential games.
//!
//! The crate discretizes a game on a truncated box with a monotone upwind
//! scheme, solves the discounted criterion by marching in the risk parameter,
//! the ergodic criterion as a principal eigenvalue problem, and searches for
//! Nash equilibria by damped fictitious play. Monte-Carlo estimators and
//! brute-force chain oracles provide independent cross-checks.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod banded;
pub mod discretize;
pub mod ergodic;
pub mod error;
pub mod hjb;
pub mod model;
pub mod nash;
pub mod oracle;
pub mod simulate;
pub mod strategy;

pub use error::{Error, Result};
pub use model::{GameSpec, Player};
pub use strategy::StrategyField;
