//! Bidding strategies and the single-learner episode loop.
//!
//! The learner always occupies seat 0; every other seat plays a fixed
//! analytic strategy.

use rand::{Rng as _, RngCore};

use crate::auction::{
    decode_bid, encode_bid, reward, sample_types, Auction, AuctionKind, AuctionSettings, BidAction,
    Observation, RoundOutcome, TypeProfile,
};
use crate::error::{Error, Result};
use crate::nn::{PolicyParams, Squash};
use crate::oracle::{oracle_bid, StrategyKind};

pub const LEARNER: usize = 0;

/// Bid range of the squashed policy head for one experiment.
pub fn default_squash(settings: &AuctionSettings) -> Squash {
    Squash::AffineTanh {
        lo: 0.0,
        hi: settings.bid_cap(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolicyMode {
    /// Draw from the stochastic policy.
    Sample,
    /// Play the squashed mean.
    Mean,
}

/// Anything that can occupy the learner seat.
#[derive(Clone, Debug)]
pub enum Strategy {
    Oracle(StrategyKind),
    Policy { params: PolicyParams, mode: PolicyMode },
}

impl Strategy {
    /// Raw action vector before clipping (see [`decode_bid`]).
    pub fn raw_action<R: RngCore + ?Sized>(
        &self,
        settings: &AuctionSettings,
        obs: &Observation,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        match self {
            Strategy::Oracle(kind) => Ok(encode_bid(settings, &oracle_bid(*kind, settings, obs)?)),
            Strategy::Policy { params, mode } => {
                let f = obs.features();
                match mode {
                    PolicyMode::Sample => Ok(params.sample(&f, rng)?.action),
                    PolicyMode::Mean => params.mean_action(&f),
                }
            }
        }
    }

    /// Deterministic legal bid, used for bid-function comparisons.
    pub fn deterministic_bid(&self, settings: &AuctionSettings, obs: &Observation) -> Result<BidAction> {
        match self {
            Strategy::Oracle(kind) => oracle_bid(*kind, settings, obs),
            Strategy::Policy { params, .. } => {
                let raw = params.mean_action(&obs.features())?;
                Ok(decode_bid(settings, obs.round, &raw).bid)
            }
        }
    }
}

/// One learner decision and what came of it.
#[derive(Clone, Debug, PartialEq)]
pub struct LearnerStep {
    pub obs: Observation,
    pub raw_action: Vec<f64>,
    pub bid: BidAction,
    pub negativity: f64,
    pub outcome: RoundOutcome,
    /// Environment reward, without any negativity penalty.
    pub reward: f64,
    pub next_obs: Observation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub types: TypeProfile,
    pub steps: Vec<LearnerStep>,
    pub history: Vec<RoundOutcome>,
}

impl Episode {
    /// The learner's realized utility.
    pub fn utility(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

/// Plays one episode with the learner's raw action supplied by `learner`.
///
/// The episode stops once the learner has nothing left to decide (sequential
/// sales: after it wins), since later rounds cannot change its utility.
pub fn play_episode(
    settings: &AuctionSettings,
    opponents: StrategyKind,
    types: TypeProfile,
    tie_seed: u64,
    learner: &mut dyn FnMut(&Observation) -> Result<Vec<f64>>,
) -> Result<Episode> {
    if opponents == StrategyKind::Learned {
        return Err(Error::Unsupported("opponents must play a fixed analytic strategy".into()));
    }
    let mut auction = Auction::new(settings.clone(), types, tie_seed)?;
    let mut steps = Vec::with_capacity(settings.n_rounds);
    while auction.is_deciding(LEARNER) {
        let obs = auction.observe(LEARNER);
        let raw_action = learner(&obs)?;
        if raw_action.len() != settings.action_dim() {
            return Err(Error::Shape(format!(
                "learner action of length {}, expected {}",
                raw_action.len(),
                settings.action_dim()
            )));
        }
        let decoded = decode_bid(settings, obs.round, &raw_action);
        let seats: Vec<usize> = match settings.kind {
            AuctionKind::SequentialSales => auction.participants(),
            AuctionKind::SplitAward => (0..settings.n_bidders).collect(),
        };
        let mut bids = Vec::with_capacity(seats.len());
        for &i in &seats {
            bids.push(if i == LEARNER {
                decoded.bid
            } else {
                oracle_bid(opponents, settings, &auction.observe(i))?
            });
        }
        let outcome = auction.step(&bids)?.clone();
        let r = reward(settings, obs.own_type, &outcome, LEARNER);
        steps.push(LearnerStep {
            next_obs: auction.observe(LEARNER),
            obs,
            raw_action,
            bid: decoded.bid,
            negativity: decoded.negativity,
            outcome,
            reward: r,
        });
    }
    Ok(Episode {
        types: auction.types().clone(),
        history: auction.history().to_vec(),
        steps,
    })
}

/// Samples a type profile and a tie seed from `rng`, then plays `strategy` in the learner seat.
pub fn play_strategy<R: RngCore>(
    settings: &AuctionSettings,
    opponents: StrategyKind,
    strategy: &Strategy,
    rng: &mut R,
) -> Result<Episode> {
    let types = sample_types(settings, rng);
    let tie_seed = rng.random();
    let mut learner = |obs: &Observation| strategy.raw_action(settings, obs, &mut *rng);
    play_episode(settings, opponents, types, tie_seed, &mut learner)
}
