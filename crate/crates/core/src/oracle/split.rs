//! Split-award equilibrium and truthful-opponent responses under DSE.

use crate::auction::{AuctionSettings, BidAction, Observation, Round1Award};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_with, Tolerance};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitRole {
    FirstRound,
    SecondRoundWinner,
    SecondRoundLoser,
}

impl SplitRole {
    pub fn of(obs: &Observation) -> Self {
        match (obs.round, obs.own_round1_award) {
            (0, _) => SplitRole::FirstRound,
            (_, Round1Award::Split) => SplitRole::SecondRoundWinner,
            (_, Round1Award::None) => SplitRole::SecondRoundLoser,
        }
    }
}

/// Uniform type distribution on the settings' interval.
struct Uniform {
    lo: f64,
    hi: f64,
}

impl Uniform {
    fn new(s: &AuctionSettings) -> Self {
        Self {
            lo: s.type_lo,
            hi: s.type_hi,
        }
    }

    /// Survival function `1 − F(t)`.
    fn survival(&self, t: f64) -> f64 {
        ((self.hi - t) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }

    fn density(&self) -> f64 {
        1.0 / (self.hi - self.lo)
    }
}

fn ratio_tolerance(denominator: f64) -> Tolerance {
    Tolerance {
        abs: 1e-13 * denominator,
        rel: 1e-13,
        max_depth: 40,
    }
}

/// Second-round split bid of a first-round loser, by quadrature.
///
/// `Cθ + C ∫_θ^hi (1−F(t))^{n−2} dt / (1−F(θ))^{n−2}`; at the top of the
/// type range the integral term vanishes.
pub fn second_round_loser_bid(theta: f64, s: &AuctionSettings) -> f64 {
    let c = s.scale_c;
    let f = Uniform::new(s);
    if theta >= s.type_hi {
        return c * s.type_hi;
    }
    let power = s.n_bidders as i32 - 2;
    let denom = f.survival(theta).powi(power);
    let num = integrate_with(
        &|t| f.survival(t).powi(power),
        theta,
        s.type_hi,
        ratio_tolerance(denom * (s.type_hi - theta)),
    );
    c * theta + c * num / denom
}

/// First-round split bid, by quadrature over the second-round loser bid.
///
/// `∫_θ^hi p2l(t)(n−1)(1−F(t))^{n−2} f(t) dt / (1−F(θ))^{n−1}`. The 0/0 form at
/// the top of the range is replaced by its limit `p2l(hi)`.
pub fn first_round_split_bid(theta: f64, s: &AuctionSettings) -> f64 {
    if theta >= s.type_hi {
        return second_round_loser_bid(s.type_hi, s);
    }
    let f = Uniform::new(s);
    let n1 = (s.n_bidders - 1) as f64;
    let power = s.n_bidders as i32 - 2;
    let denom = f.survival(theta).powi(power + 1);
    let num = integrate_with(
        &|t| second_round_loser_bid(t, s) * n1 * f.survival(t).powi(power) * f.density(),
        theta,
        s.type_hi,
        ratio_tolerance(denom),
    );
    num / denom
}

/// Equilibrium bid for the given role. The sole bid is a safely losing `2·hi`.
pub fn split_equilibrium_bid(theta: f64, role: SplitRole, s: &AuctionSettings) -> BidAction {
    match role {
        SplitRole::FirstRound => BidAction::SoleSplit {
            sole: 2.0 * s.type_hi,
            split: first_round_split_bid(theta, s),
        },
        SplitRole::SecondRoundWinner => BidAction::Single((1.0 - s.scale_c) * theta),
        SplitRole::SecondRoundLoser => BidAction::Single(second_round_loser_bid(theta, s)),
    }
}

/// Closed forms for three bidders with types uniform on `[1, 2]`:
/// `((C/3)(θ+4), C(θ + (2−θ)/2))`.
pub fn split_equilibrium_closed_form_n3(theta: f64, c: f64) -> Result<(f64, f64)> {
    if !(1.0..=2.0).contains(&theta) {
        return Err(Error::TypeOutOfBounds {
            value: theta,
            lo: 1.0,
            hi: 2.0,
        });
    }
    Ok((c / 3.0 * (theta + 4.0), c * (theta + (2.0 - theta) / 2.0)))
}

/// Best response to a single truthful opponent: lose round one, then match the
/// opponent's second-unit cost, recovered from the revealed first-round price.
pub fn split_best_response_truthful(obs: &Observation, s: &AuctionSettings) -> Result<BidAction> {
    if obs.round == 0 {
        return Ok(BidAction::SoleSplit {
            sole: 2.0 * s.type_hi,
            split: 2.0 * s.scale_c * s.type_hi,
        });
    }
    let price = *obs
        .revealed_prices
        .first()
        .ok_or(Error::MissingRevealedPrice)?;
    if obs.own_round1_award == Round1Award::Split {
        // Off path: the opponent's remaining cost C·θ_o never covers (1−C)·θ under DSE.
        return Ok(BidAction::Single((1.0 - s.scale_c) * obs.own_type));
    }
    let opponent = price / s.scale_c;
    Ok(BidAction::Single((1.0 - s.scale_c) * opponent))
}

/// Truthful split-award bids: cost of the units at stake.
pub fn split_truthful_bid(theta: f64, role: SplitRole, s: &AuctionSettings) -> BidAction {
    match role {
        SplitRole::FirstRound => BidAction::SoleSplit {
            sole: theta,
            split: s.scale_c * theta,
        },
        SplitRole::SecondRoundWinner => BidAction::Single((1.0 - s.scale_c) * theta),
        SplitRole::SecondRoundLoser => BidAction::Single(s.scale_c * theta),
    }
}

/// Inverts the increasing first-round bid function by bisection.
pub fn invert_first_round_bid(price: f64, s: &AuctionSettings) -> f64 {
    let (mut lo, mut hi) = (s.type_lo, s.type_hi);
    if price <= first_round_split_bid(lo, s) {
        return lo;
    }
    if price >= first_round_split_bid(hi, s) {
        return hi;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if first_round_split_bid(mid, s) < price {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
