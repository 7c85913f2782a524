//! Lost-sales periodic inventory control with positive lead time and
//! censored demand.
//!
//! The crate is organised bottom-up:
//!
//! - [`demand`]: bounded grid demand families, sampling, depletion time `D`.
//! - [`rng`]: named, seeded RNG streams so coupled runs replay identical demand.
//! - [`inventory`]: system dynamics, base-stock ordering, true and pseudo cost,
//!   and the base-stock Markov reward process on states summing to `x`.
//! - [`analysis`]: loss oracles (exact stationary chain, Monte Carlo), the
//!   optimal base-stock search, and coupling diagnostics.
//! - [`learner`]: the trisection learner that only sees sales and on-hand stock.
//! - [`harness`] and [`config`]: experiment wiring, regret accounting, CSV output.

pub mod analysis;
pub mod config;
pub mod demand;
pub mod error;
pub mod harness;
pub mod inventory;
pub mod learner;
pub mod rng;

pub use error::{Error, Result};
