//! Closed-form opponent strategies, best responses and value oracles.

mod sequential;
mod split;
mod value;

use serde::{Deserialize, Serialize};

pub use sequential::{seq_best_response_truthful, seq_equilibrium_bid};
pub use split::{
    first_round_split_bid, invert_first_round_bid, second_round_loser_bid,
    split_best_response_truthful, split_equilibrium_bid, split_equilibrium_closed_form_n3,
    split_truthful_bid, SplitRole,
};
pub use value::{
    oracle_expected_utility, oracle_value_function, split_equilibrium_value_by_quadrature,
    OracleValue,
};

use crate::auction::{AuctionKind, AuctionSettings, BidAction, Observation};
use crate::error::{Error, Result};
use crate::scenario::ExperimentId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    Truthful,
    Equilibrium,
    BestResponseToTruthful,
    /// A trained policy; needs parameters attached, see [`crate::strategy::Strategy`].
    Learned,
}

/// Truthful bid for any round and role.
pub fn truthful_bid(settings: &AuctionSettings, obs: &Observation) -> BidAction {
    match settings.kind {
        AuctionKind::SequentialSales => BidAction::Single(obs.own_type),
        AuctionKind::SplitAward => split_truthful_bid(obs.own_type, SplitRole::of(obs), settings),
    }
}

/// Bid of an analytically specified strategy.
pub fn oracle_bid(kind: StrategyKind, settings: &AuctionSettings, obs: &Observation) -> Result<BidAction> {
    match (kind, settings.kind) {
        (StrategyKind::Truthful, _) => Ok(truthful_bid(settings, obs)),
        (StrategyKind::Equilibrium, AuctionKind::SequentialSales) => seq_equilibrium_bid(
            obs.own_type,
            obs.round + 1,
            settings.n_bidders,
            settings.n_rounds,
            settings.price_rule,
        )
        .map(BidAction::Single),
        (StrategyKind::Equilibrium, AuctionKind::SplitAward) => Ok(split_equilibrium_bid(
            obs.own_type,
            SplitRole::of(obs),
            settings,
        )),
        (StrategyKind::BestResponseToTruthful, AuctionKind::SequentialSales) => {
            Ok(BidAction::Single(seq_best_response_truthful(obs, settings)))
        }
        (StrategyKind::BestResponseToTruthful, AuctionKind::SplitAward) => {
            split_best_response_truthful(obs, settings)
        }
        (StrategyKind::Learned, _) => Err(Error::Unsupported(
            "learned strategies need policy parameters".into(),
        )),
    }
}

/// What an optimal bid looks like along one action dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BidTarget {
    /// A unique optimal bid.
    Exact(f64),
    /// Any bid at or above the threshold is optimal (a safely losing bid).
    AtLeast(f64),
}

impl BidTarget {
    /// Distance of `bid` from the optimal set.
    pub fn error(&self, bid: f64) -> f64 {
        match *self {
            BidTarget::Exact(t) => bid - t,
            BidTarget::AtLeast(t) => (t - bid).max(0.0),
        }
    }

    pub fn representative(&self) -> f64 {
        match *self {
            BidTarget::Exact(t) | BidTarget::AtLeast(t) => t,
        }
    }
}

/// Optimal-bid targets for the learner's seat, one entry per action dimension
/// (`None` where the dimension is unused this round).
pub fn learner_targets(
    id: ExperimentId,
    settings: &AuctionSettings,
    obs: &Observation,
) -> Result<Vec<Option<BidTarget>>> {
    let kind = id.optimal_learner();
    match settings.kind {
        AuctionKind::SequentialSales => {
            let b = oracle_bid(kind, settings, obs)?.primary();
            Ok(vec![Some(BidTarget::Exact(b))])
        }
        AuctionKind::SplitAward if obs.round == 0 => {
            // Highest first-round split an opponent can submit; a sole bid of
            // twice that can never take the sole award.
            let max_opp_split = match id.opponents() {
                StrategyKind::Truthful => settings.scale_c * settings.type_hi,
                _ => first_round_split_bid(settings.type_hi, settings),
            };
            let sole = BidTarget::AtLeast(2.0 * max_opp_split);
            let split = match kind {
                StrategyKind::BestResponseToTruthful => BidTarget::AtLeast(max_opp_split),
                _ => BidTarget::Exact(oracle_bid(kind, settings, obs)?.primary()),
            };
            Ok(vec![Some(sole), Some(split)])
        }
        AuctionKind::SplitAward => {
            let b = oracle_bid(kind, settings, obs)?.primary();
            Ok(vec![None, Some(BidTarget::Exact(b))])
        }
    }
}
