use super::env::BidAction;
use super::settings::{AuctionKind, AuctionSettings};

/// A raw learner action turned into a legal bid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecodedBid {
    pub bid: BidAction,
    /// Total amount by which raw components were below zero.
    pub negativity: f64,
}

/// Maps a raw action vector to a bid for the given round.
///
/// Split-award actions are `[sole, split]`; the second round only reads the
/// split component. Negative components are clipped to zero and their
/// magnitude reported so callers can penalize them.
pub fn decode_bid(settings: &AuctionSettings, round: usize, raw: &[f64]) -> DecodedBid {
    let clip = |x: f64| (x.max(0.0), (-x).max(0.0));
    match settings.kind {
        AuctionKind::SequentialSales => {
            let (b, neg) = clip(raw[0]);
            DecodedBid {
                bid: BidAction::Single(b),
                negativity: neg,
            }
        }
        AuctionKind::SplitAward if round == 0 => {
            let (sole, n0) = clip(raw[0]);
            let (split, n1) = clip(raw[1]);
            DecodedBid {
                bid: BidAction::SoleSplit {
                    sole: sole.min(settings.bid_cap()),
                    split,
                },
                negativity: n0 + n1,
            }
        }
        AuctionKind::SplitAward => {
            let (b, neg) = clip(raw[1]);
            DecodedBid {
                bid: BidAction::Single(b),
                negativity: neg,
            }
        }
    }
}

/// Inverse of [`decode_bid`] for legal bids. Unused components are zero.
pub fn encode_bid(settings: &AuctionSettings, bid: &BidAction) -> Vec<f64> {
    match (settings.kind, *bid) {
        (AuctionKind::SequentialSales, b) => vec![b.primary()],
        (AuctionKind::SplitAward, BidAction::SoleSplit { sole, split }) => vec![sole, split],
        (AuctionKind::SplitAward, BidAction::Single(b)) => vec![0.0, b],
    }
}
