use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid auction settings: {0}")]
    InvalidSettings(String),

    #[error("expected {expected} bids, got {got}")]
    BidCountMismatch { expected: usize, got: usize },

    #[error("bid of bidder {bidder} has the wrong shape for this round")]
    BidShapeMismatch { bidder: usize },

    #[error("negative bid {bid} from bidder {bidder}")]
    NegativeBid { bidder: usize, bid: f64 },

    #[error("auction is already terminal")]
    Terminal,

    #[error("type {value} outside [{lo}, {hi}]")]
    TypeOutOfBounds { value: f64, lo: f64, hi: f64 },

    #[error("round {round} out of range 1..={max}")]
    RoundOutOfRange { round: usize, max: usize },

    #[error("no revealed price available for a second-round response")]
    MissingRevealedPrice,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("action {action} is outside the open squash interval ({lo}, {hi})")]
    ActionOutsideSquash { action: f64, lo: f64, hi: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("replay buffer is empty")]
    EmptyBuffer,

    #[error("unsupported experiment for this operation: {0}")]
    Unsupported(String),

    #[error("unknown experiment id `{0}`")]
    UnknownExperiment(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}: {what}")]
    Diverged { epoch: usize, what: String },

    #[error("checkpoint parse error at line {line}: {msg}")]
    Checkpoint { line: usize, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
