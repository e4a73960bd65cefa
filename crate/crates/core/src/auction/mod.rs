//! Episodic sequential-sales and split-award auctions.

mod action;
mod env;
mod observation;
mod settings;
pub mod trace;

pub use action::{decode_bid, encode_bid, DecodedBid};
pub use env::{own_reward, reward, Auction, BidAction, RoundOutcome, TIE_TOLERANCE};
pub use observation::{feature_len, Observation, Round1Award};
pub use settings::{sample_types, AuctionKind, AuctionSettings, PriceRule, TypeProfile};
