use rand::Rng as _;
use rand::SeedableRng;

use super::observation::{Observation, Round1Award};
use super::settings::{AuctionKind, AuctionSettings, PriceRule, TypeProfile};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Bids closer than this (relative to the best bid) count as tied.
///
/// Oracle responses that reconstruct an opponent type from a revealed price
/// reproduce the opponent's bid only up to rounding.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BidAction {
    Single(f64),
    SoleSplit { sole: f64, split: f64 },
}

impl BidAction {
    fn is_nonnegative(&self) -> Option<f64> {
        match *self {
            BidAction::Single(b) if !(b >= 0.0) => Some(b),
            BidAction::SoleSplit { sole, .. } if !(sole >= 0.0) => Some(sole),
            BidAction::SoleSplit { split, .. } if !(split >= 0.0) => Some(split),
            _ => None,
        }
    }

    /// The single bid, or the split bid of a sole/split pair.
    pub fn primary(&self) -> f64 {
        match *self {
            BidAction::Single(b) => b,
            BidAction::SoleSplit { split, .. } => split,
        }
    }
}

/// Result of one auction round.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundOutcome {
    /// Zero-based round index.
    pub round: usize,
    /// Submitted bids per bidder; `None` for bidders who had already left.
    pub bids: Vec<Option<BidAction>>,
    pub allocations: Vec<u32>,
    /// Sequential sales: paid by the buyer. Split award: received by the seller.
    pub payments: Vec<f64>,
    pub revealed_price: f64,
    pub sole_awarded: bool,
    /// Units each bidder held before this round.
    pub prior_units: Vec<u32>,
}

impl RoundOutcome {
    pub fn units_sold(&self) -> u32 {
        self.allocations.iter().sum()
    }
}

/// Quasi-linear reward of `bidder` for one completed round.
pub fn reward(settings: &AuctionSettings, own_type: f64, outcome: &RoundOutcome, bidder: usize) -> f64 {
    own_reward(
        settings,
        own_type,
        outcome.allocations[bidder],
        outcome.payments[bidder],
        outcome.prior_units[bidder],
    )
}

/// Reward from one bidder's slice of a round outcome.
pub fn own_reward(settings: &AuctionSettings, own_type: f64, won: u32, pay: f64, prior: u32) -> f64 {
    match settings.kind {
        AuctionKind::SequentialSales => own_type * won as f64 - pay,
        AuctionKind::SplitAward => {
            pay - settings.marginal_cost(own_type, prior, won)
        }
    }
}

/// A single running episode. Not meant for concurrent stepping; create one per worker.
#[derive(Clone, Debug)]
pub struct Auction {
    settings: AuctionSettings,
    types: TypeProfile,
    active: Vec<bool>,
    units: Vec<u32>,
    history: Vec<RoundOutcome>,
    terminal: bool,
    tie_rng: Rng,
}

impl Auction {
    pub fn new(settings: AuctionSettings, types: TypeProfile, tie_seed: u64) -> Result<Self> {
        settings.validate()?;
        let types = TypeProfile::new(&settings, types.0)?;
        let n = settings.n_bidders;
        Ok(Self {
            settings,
            types,
            active: vec![true; n],
            units: vec![0; n],
            history: Vec::new(),
            terminal: false,
            tie_rng: Rng::seed_from_u64(tie_seed),
        })
    }

    pub fn settings(&self) -> &AuctionSettings {
        &self.settings
    }

    pub fn types(&self) -> &TypeProfile {
        &self.types
    }

    pub fn round(&self) -> usize {
        self.history.len()
    }

    pub fn history(&self) -> &[RoundOutcome] {
        &self.history
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    pub fn is_active(&self, bidder: usize) -> bool {
        self.active[bidder]
    }

    pub fn units(&self, bidder: usize) -> u32 {
        self.units[bidder]
    }

    /// Bidders expected to submit a bid this round, in ascending order.
    pub fn participants(&self) -> Vec<usize> {
        (0..self.settings.n_bidders)
            .filter(|&i| self.active[i])
            .collect()
    }

    /// Whether `bidder` still has a decision to make.
    pub fn is_deciding(&self, bidder: usize) -> bool {
        !self.terminal && self.active[bidder]
    }

    pub fn observe(&self, bidder: usize) -> Observation {
        let revealed_prices = self.history.iter().map(|o| o.revealed_price).collect();
        let round1_award = match self.history.first() {
            Some(o) if o.allocations[bidder] == 1 => Round1Award::Split,
            _ => Round1Award::None,
        };
        Observation {
            own_type: self.types.0[bidder],
            round: self.round(),
            horizon: self.settings.n_rounds,
            revealed_prices,
            own_won: self.units[bidder] > 0,
            own_round1_award: round1_award,
            terminal: self.terminal || !self.active[bidder],
        }
    }

    /// Steps either mechanism with one bid per participant (see [`Auction::participants`]).
    pub fn step(&mut self, bids: &[BidAction]) -> Result<&RoundOutcome> {
        match self.settings.kind {
            AuctionKind::SequentialSales => {
                let mut singles = Vec::with_capacity(bids.len());
                for (slot, b) in bids.iter().enumerate() {
                    match *b {
                        BidAction::Single(x) => singles.push(x),
                        _ => {
                            let bidder = self.participants().get(slot).copied().unwrap_or(slot);
                            return Err(Error::BidShapeMismatch { bidder });
                        }
                    }
                }
                self.step_sequential(&singles)
            }
            AuctionKind::SplitAward => self.step_split(bids),
        }
    }

    /// One sequential-sales round. `bids` holds one bid per active bidder in index order.
    pub fn step_sequential(&mut self, bids: &[f64]) -> Result<&RoundOutcome> {
        if self.settings.kind != AuctionKind::SequentialSales {
            return Err(Error::InvalidSettings("not a sequential sales auction".into()));
        }
        if self.terminal {
            return Err(Error::Terminal);
        }
        let bidders = self.participants();
        if bids.len() != bidders.len() {
            return Err(Error::BidCountMismatch {
                expected: bidders.len(),
                got: bids.len(),
            });
        }
        for (&i, &b) in bidders.iter().zip(bids) {
            if !(b >= 0.0) || !b.is_finite() {
                return Err(Error::NegativeBid { bidder: i, bid: b });
            }
        }

        let best = bids.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tol = TIE_TOLERANCE * best.abs().max(1.0);
        let tied: Vec<usize> = (0..bids.len()).filter(|&j| bids[j] >= best - tol).collect();
        let slot = tied[self.tie_rng.random_range(0..tied.len())];
        let winner = bidders[slot];
        let price = match self.settings.price_rule {
            PriceRule::FirstPrice => bids[slot],
            PriceRule::SecondPrice => bids
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != slot)
                .map(|(_, &b)| b)
                .fold(0.0, f64::max),
        };

        let n = self.settings.n_bidders;
        let mut all_bids = vec![None; n];
        for (&i, &b) in bidders.iter().zip(bids) {
            all_bids[i] = Some(BidAction::Single(b));
        }
        let mut allocations = vec![0; n];
        let mut payments = vec![0.0; n];
        allocations[winner] = 1;
        payments[winner] = price;

        let outcome = RoundOutcome {
            round: self.round(),
            bids: all_bids,
            allocations,
            payments,
            revealed_price: price,
            sole_awarded: false,
            prior_units: self.units.clone(),
        };
        self.units[winner] += 1;
        self.active[winner] = false;
        self.history.push(outcome);
        if self.history.len() == self.settings.n_rounds {
            self.terminal = true;
        }
        Ok(self.history.last().expect("just pushed"))
    }

    /// One split-award round; `bids` holds one bid per bidder.
    ///
    /// Round 1 expects sole/split pairs and round 2 single split bids.
    pub fn step_split(&mut self, bids: &[BidAction]) -> Result<&RoundOutcome> {
        if self.settings.kind != AuctionKind::SplitAward {
            return Err(Error::InvalidSettings("not a split-award auction".into()));
        }
        if self.terminal {
            return Err(Error::Terminal);
        }
        let n = self.settings.n_bidders;
        if bids.len() != n {
            return Err(Error::BidCountMismatch {
                expected: n,
                got: bids.len(),
            });
        }
        let first_round = self.round() == 0;
        for (i, b) in bids.iter().enumerate() {
            let shape_ok = matches!(
                (first_round, b),
                (true, BidAction::SoleSplit { .. }) | (false, BidAction::Single(_))
            );
            if !shape_ok {
                return Err(Error::BidShapeMismatch { bidder: i });
            }
            if let Some(neg) = b.is_nonnegative() {
                return Err(Error::NegativeBid { bidder: i, bid: neg });
            }
        }

        let mut allocations = vec![0; n];
        let mut payments = vec![0.0; n];
        let (revealed_price, sole_awarded) = if first_round {
            let sole: Vec<f64> = bids
                .iter()
                .map(|b| match *b {
                    BidAction::SoleSplit { sole, .. } => sole,
                    BidAction::Single(_) => unreachable!(),
                })
                .collect();
            let split: Vec<f64> = bids.iter().map(BidAction::primary).collect();
            let best_sole = sole.iter().copied().fold(f64::INFINITY, f64::min);
            let best_split = split.iter().copied().fold(f64::INFINITY, f64::min);
            // Unit-price comparison; equality goes to the split.
            if best_split > best_sole / 2.0 {
                let w = self.lowest(&sole, |_| false);
                allocations[w] = 2;
                payments[w] = sole[w];
                (sole[w], true)
            } else {
                let w = self.lowest(&split, |_| false);
                allocations[w] = 1;
                payments[w] = split[w];
                (split[w], false)
            }
        } else {
            let ask: Vec<f64> = bids.iter().map(BidAction::primary).collect();
            // Splitting between two sellers wins bidder-level ties.
            let units = self.units.clone();
            let w = self.lowest(&ask, |j| units[j] == 0);
            allocations[w] = 1;
            payments[w] = ask[w];
            (ask[w], false)
        };

        let outcome = RoundOutcome {
            round: self.round(),
            bids: bids.iter().copied().map(Some).collect(),
            allocations,
            payments,
            revealed_price,
            sole_awarded,
            prior_units: self.units.clone(),
        };
        for i in 0..n {
            self.units[i] += outcome.allocations[i];
        }
        self.history.push(outcome);
        if sole_awarded || self.history.len() == self.settings.n_rounds {
            self.terminal = true;
        }
        Ok(self.history.last().expect("just pushed"))
    }

    /// Index of the lowest ask; among ties prefer `favored`, then uniform.
    fn lowest(&mut self, asks: &[f64], favored: impl Fn(usize) -> bool) -> usize {
        let best = asks.iter().copied().fold(f64::INFINITY, f64::min);
        let tol = TIE_TOLERANCE * best.abs().max(1.0);
        let tied: Vec<usize> = (0..asks.len()).filter(|&j| asks[j] <= best + tol).collect();
        let preferred: Vec<usize> = tied.iter().copied().filter(|&j| favored(j)).collect();
        let pool = if preferred.is_empty() { tied } else { preferred };
        pool[self.tie_rng.random_range(0..pool.len())]
    }
}
