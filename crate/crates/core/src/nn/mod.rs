//! Dense networks, the Adam optimizer, and the squashed-Gaussian actor.

mod adam;
pub mod checkpoint;
mod critic;
mod mlp;
mod policy;

pub use adam::Adam;
pub use checkpoint::{Checkpoint, PolicySnapshot};
pub use critic::{critic_input, CriticParams};
pub use mlp::{Mlp, MlpCache};
pub use policy::{PolicyBatch, PolicyParams, PolicySample, Squash, LOG_STD_MAX, LOG_STD_MIN};
