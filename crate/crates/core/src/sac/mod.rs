//! Soft actor-critic against fixed opponents, with type-relabeling replay.

mod replay;
mod train;
mod update;

pub use replay::{relabel, sample_minibatch, Batch, ReplayBuffer, TransitionRecord};
pub use train::{
    collect_experience, format_log, parse_log, train, EpochRecord, SacState, SquashKind, TrainConfig, Trained,
    Trainer, LOG_HEADER,
};
pub use update::{
    actor_loss_and_grad, actor_update, critic_loss_and_grad, critic_targets, critic_targets_with_noise,
    critic_update, polyak_update, temperature_gradient, temperature_update, ActorEval, TemperatureState,
};
