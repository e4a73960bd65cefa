//! Learning optimal bids in dynamic auctions.
//!
//! The crate is organised bottom-up:
//!
//! - [`auction`]: sequential-sales and split-award environments.
//! - [`oracle`]: equilibrium strategies, best responses and value oracles.
//! - [`nn`]: a small dense network with exact gradients, Adam, and the
//!   squashed-Gaussian policy head.
//! - [`sac`]: soft actor-critic with type-relabeling replay.
//! - [`eval`]: Monte Carlo utility estimates and distances to the oracles.
//! - [`experiment`]: named experiment presets, configuration and the run driver.

pub mod auction;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod nn;
pub mod oracle;
pub mod quadrature;
pub mod rng;
pub mod sac;
pub mod scenario;
pub mod strategy;

pub use error::{Error, Result};
pub use scenario::ExperimentId;
