//! The six named auction settings and who the learner faces in each.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::auction::{AuctionSettings, PriceRule};
use crate::error::Error;
use crate::oracle::StrategyKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExperimentId {
    /// Two-bidder split award against a truthful seller.
    SplitTruthful2,
    /// Three-bidder split award against equilibrium sellers.
    SplitEquilibrium3,
    /// One item, two bidders, first price, equilibrium opponent.
    Seq1FP2,
    /// One item, two bidders, second price, equilibrium opponent.
    Seq1SP2,
    /// Two items, three bidders, first price, truthful opponents.
    Seq2FPTruthful3,
    /// Two items, three bidders, first price, equilibrium opponents.
    Seq2FPEquilibrium3,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 6] = [
        ExperimentId::SplitTruthful2,
        ExperimentId::SplitEquilibrium3,
        ExperimentId::Seq1FP2,
        ExperimentId::Seq1SP2,
        ExperimentId::Seq2FPTruthful3,
        ExperimentId::Seq2FPEquilibrium3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::SplitTruthful2 => "SplitTruthful2",
            ExperimentId::SplitEquilibrium3 => "SplitEquilibrium3",
            ExperimentId::Seq1FP2 => "Seq1FP2",
            ExperimentId::Seq1SP2 => "Seq1SP2",
            ExperimentId::Seq2FPTruthful3 => "Seq2FPTruthful3",
            ExperimentId::Seq2FPEquilibrium3 => "Seq2FPEquilibrium3",
        }
    }

    pub fn default_settings(self) -> AuctionSettings {
        match self {
            ExperimentId::SplitTruthful2 => AuctionSettings::split_award(2, 0.2),
            ExperimentId::SplitEquilibrium3 => AuctionSettings::split_award(3, 0.2),
            ExperimentId::Seq1FP2 => AuctionSettings::sequential(2, 1, PriceRule::FirstPrice),
            ExperimentId::Seq1SP2 => AuctionSettings::sequential(2, 1, PriceRule::SecondPrice),
            ExperimentId::Seq2FPTruthful3 | ExperimentId::Seq2FPEquilibrium3 => {
                AuctionSettings::sequential(3, 2, PriceRule::FirstPrice)
            }
        }
    }

    /// Strategy played by every opponent.
    pub fn opponents(self) -> StrategyKind {
        match self {
            ExperimentId::SplitTruthful2 | ExperimentId::Seq2FPTruthful3 => StrategyKind::Truthful,
            _ => StrategyKind::Equilibrium,
        }
    }

    /// The analytically optimal strategy for the learner's seat.
    pub fn optimal_learner(self) -> StrategyKind {
        match self.opponents() {
            StrategyKind::Truthful => StrategyKind::BestResponseToTruthful,
            _ => StrategyKind::Equilibrium,
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownExperiment(s.to_owned()))
    }
}
