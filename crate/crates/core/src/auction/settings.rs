use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuctionKind {
    /// One unit per round to unit-demand buyers; winners leave.
    SequentialSales,
    /// Two-unit procurement auction with a sole and a split award.
    SplitAward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PriceRule {
    FirstPrice,
    SecondPrice,
}

/// Static description of one auction game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuctionSettings {
    pub kind: AuctionKind,
    pub n_bidders: usize,
    pub n_rounds: usize,
    /// Only meaningful for sequential sales.
    pub price_rule: PriceRule,
    pub type_lo: f64,
    pub type_hi: f64,
    /// Cost share of the first split unit. Unused for sequential sales.
    pub scale_c: f64,
}

impl AuctionSettings {
    pub fn sequential(n_bidders: usize, n_items: usize, price_rule: PriceRule) -> Self {
        Self {
            kind: AuctionKind::SequentialSales,
            n_bidders,
            n_rounds: n_items,
            price_rule,
            type_lo: 0.0,
            type_hi: 1.0,
            scale_c: 0.0,
        }
    }

    pub fn split_award(n_bidders: usize, scale_c: f64) -> Self {
        Self {
            kind: AuctionKind::SplitAward,
            n_bidders,
            n_rounds: 2,
            price_rule: PriceRule::FirstPrice,
            type_lo: 1.0,
            type_hi: 2.0,
            scale_c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSettings(m.to_owned()));
        if self.n_bidders == 0 || self.n_rounds == 0 {
            return bad("bidder and round counts must be positive");
        }
        if !(self.type_lo < self.type_hi) || !self.type_lo.is_finite() || !self.type_hi.is_finite()
        {
            return bad("type bounds must satisfy lo < hi");
        }
        match self.kind {
            AuctionKind::SequentialSales => {
                if self.n_rounds >= self.n_bidders {
                    return bad("sequential sales needs fewer rounds than bidders");
                }
                if self.type_lo < 0.0 {
                    return bad("sequential sales values must be nonnegative");
                }
            }
            AuctionKind::SplitAward => {
                if self.n_rounds != 2 {
                    return bad("split-award auctions have exactly two rounds");
                }
                if self.n_bidders < 2 {
                    return bad("split-award auctions need at least two bidders");
                }
                if !(self.scale_c > 0.0 && self.scale_c < 1.0) {
                    return bad("scale parameter C must lie in (0, 1)");
                }
                if self.type_lo <= 0.0 {
                    return bad("split-award costs must be positive");
                }
            }
        }
        Ok(())
    }

    /// Dual-source efficiency: two split awards are always cheaper than one sole award.
    pub fn is_dual_source_efficient(&self) -> bool {
        self.kind == AuctionKind::SplitAward && self.scale_c <= self.type_lo / (2.0 * self.type_hi)
    }

    /// Upper end of the bid range a learner can express per action dimension.
    pub fn bid_cap(&self) -> f64 {
        match self.kind {
            AuctionKind::SequentialSales => self.type_hi,
            AuctionKind::SplitAward => 2.0 * self.type_hi,
        }
    }

    pub fn action_dim(&self) -> usize {
        match self.kind {
            AuctionKind::SequentialSales => 1,
            AuctionKind::SplitAward => 2,
        }
    }

    /// 1 for action dimensions the environment reads in `round`, 0 otherwise.
    pub fn action_mask(&self, round: usize) -> Vec<f64> {
        match self.kind {
            AuctionKind::SplitAward if round > 0 => vec![0.0, 1.0],
            _ => vec![1.0; self.action_dim()],
        }
    }

    pub fn contains_type(&self, theta: f64) -> bool {
        theta >= self.type_lo && theta <= self.type_hi
    }

    pub fn check_type(&self, theta: f64) -> Result<()> {
        if self.contains_type(theta) {
            Ok(())
        } else {
            Err(Error::TypeOutOfBounds {
                value: theta,
                lo: self.type_lo,
                hi: self.type_hi,
            })
        }
    }

    pub fn sample_type<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rng.random_range(self.type_lo..self.type_hi)
    }

    /// Total cost (split-award) of holding `units` units. Sequential sales have no cost.
    pub fn cost_of_units(&self, theta: f64, units: u32) -> f64 {
        match (self.kind, units) {
            (AuctionKind::SequentialSales, _) | (_, 0) => 0.0,
            (AuctionKind::SplitAward, 1) => self.scale_c * theta,
            (AuctionKind::SplitAward, _) => theta,
        }
    }

    /// Cost of going from `prior` to `prior + won` units.
    pub fn marginal_cost(&self, theta: f64, prior: u32, won: u32) -> f64 {
        match (self.kind, prior, won) {
            (AuctionKind::SequentialSales, _, _) | (_, _, 0) => 0.0,
            (AuctionKind::SplitAward, 0, 2) => theta,
            (AuctionKind::SplitAward, 0, 1) => self.scale_c * theta,
            (AuctionKind::SplitAward, 1, 1) => (1.0 - self.scale_c) * theta,
            (AuctionKind::SplitAward, p, w) => {
                self.cost_of_units(theta, p + w) - self.cost_of_units(theta, p)
            }
        }
    }
}

/// One private type per bidder.
#[derive(Clone, Debug, PartialEq)]
pub struct TypeProfile(pub Vec<f64>);

impl TypeProfile {
    pub fn new(settings: &AuctionSettings, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != settings.n_bidders {
            return Err(Error::Shape(format!(
                "type profile has {} entries for {} bidders",
                theta.len(),
                settings.n_bidders
            )));
        }
        for &t in &theta {
            settings.check_type(t)?;
        }
        Ok(Self(theta))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Draws every bidder's type i.i.d. uniform on the settings' type interval.
pub fn sample_types<R: Rng + ?Sized>(settings: &AuctionSettings, rng: &mut R) -> TypeProfile {
    TypeProfile(
        (0..settings.n_bidders)
            .map(|_| settings.sample_type(rng))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn types_within_bounds() {
        let s = AuctionSettings::sequential(3, 2, PriceRule::FirstPrice);
        let mut rng = stream(1, Stream::Environment, &[]);
        for _ in 0..1000 {
            let t = sample_types(&s, &mut rng);
            assert!(t.0.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn uniform_mean_on_one_two() {
        let s = AuctionSettings::split_award(1 + 1, 0.2);
        let mut rng = stream(2, Stream::Environment, &[]);
        let n = 100_000;
        let sum: f64 = (0..n).map(|_| s.sample_type(&mut rng)).sum();
        assert!((sum / n as f64 - 1.5).abs() < 0.01);
    }

    #[test]
    fn same_seed_same_profile() {
        let s = AuctionSettings::sequential(4, 2, PriceRule::SecondPrice);
        let a = sample_types(&s, &mut stream(9, Stream::Environment, &[3]));
        let b = sample_types(&s, &mut stream(9, Stream::Environment, &[3]));
        assert_eq!(a, b);
    }

    #[test]
    fn settings_validation() {
        assert!(AuctionSettings::sequential(2, 2, PriceRule::FirstPrice)
            .validate()
            .is_err());
        assert!(AuctionSettings::split_award(3, 1.2).validate().is_err());
        assert!(AuctionSettings::split_award(3, 0.2).validate().is_ok());
    }

    #[test]
    fn dse_condition_and_sole_cost_dominance() {
        let s = AuctionSettings::split_award(3, 0.2);
        assert!(s.is_dual_source_efficient());
        assert!(!AuctionSettings::split_award(3, 0.3).is_dual_source_efficient());
        // Under DSE a truthful sole bid never undercuts two truthful split bids.
        let grid: Vec<f64> = (0..=50).map(|i| 1.0 + i as f64 / 50.0).collect();
        for &a in &grid {
            for &b in &grid {
                let sole = s.cost_of_units(a, 2);
                let two_splits = s.cost_of_units(a, 1) + s.cost_of_units(b, 1);
                assert!(sole >= two_splits - 1e-12);
            }
        }
    }

    #[test]
    fn marginal_costs_sum_to_sole_cost() {
        let s = AuctionSettings::split_award(2, 0.2);
        let t = 1.7;
        let two_steps = s.marginal_cost(t, 0, 1) + s.marginal_cost(t, 1, 1);
        assert!((two_steps - s.marginal_cost(t, 0, 2)).abs() < 1e-15);
    }
}
