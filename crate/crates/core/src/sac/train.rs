use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::replay::{sample_minibatch, Batch, ReplayBuffer, TransitionRecord};
use super::update::{actor_update, critic_targets, critic_update, polyak_update, temperature_update, TemperatureState};
use crate::auction::{feature_len, AuctionSettings};
use crate::error::{Error, Result};
use crate::nn::{Adam, Checkpoint, CriticParams, PolicyParams, PolicySnapshot, Squash};
use crate::oracle::StrategyKind;
use crate::rng::{stream, Stream};
use crate::strategy::{default_squash, play_strategy, PolicyMode, Strategy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SquashKind {
    /// Affine tanh onto the experiment's bid range.
    Tanh,
    /// Raw Gaussian actions; negative components are clipped and penalized.
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub episodes_per_epoch: usize,
    pub update_steps_per_epoch: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub alpha_lr: f64,
    /// Actor and critic learning rates decay linearly to this fraction of
    /// their initial value over `epochs`; 1 keeps them constant.
    pub final_lr_fraction: f64,
    pub initial_alpha: f64,
    pub target_entropy: f64,
    /// Adjust α toward the target entropy; otherwise α stays at its initial value.
    pub auto_temperature: bool,
    pub polyak_tau: f64,
    pub relabel_fraction: f64,
    pub buffer_capacity: usize,
    pub policy_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub squash: SquashKind,
    /// Reward penalty per unit of negative raw bid.
    pub negativity_penalty: f64,
    pub seed: u64,
    /// Collection threads; 0 uses the global pool.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            episodes_per_epoch: 128,
            update_steps_per_epoch: 32,
            batch_size: 128,
            gamma: 1.0,
            actor_lr: 1e-3,
            critic_lr: 3e-3,
            alpha_lr: 1e-3,
            final_lr_fraction: 1.0,
            initial_alpha: 0.01,
            target_entropy: -5.0,
            auto_temperature: true,
            polyak_tau: 0.005,
            relabel_fraction: 0.5,
            buffer_capacity: 1_000_000,
            policy_hidden: vec![64, 64],
            critic_hidden: vec![64, 64],
            squash: SquashKind::Tanh,
            negativity_penalty: 1.0,
            seed: 0,
            workers: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.episodes_per_epoch == 0 || self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("episodes_per_epoch, batch_size and buffer_capacity must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.relabel_fraction) {
            return bad("relabel_fraction must lie in [0, 1]");
        }
        if !(self.polyak_tau > 0.0 && self.polyak_tau <= 1.0) {
            return bad("polyak_tau must lie in (0, 1]");
        }
        for (name, v) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("alpha_lr", self.alpha_lr),
            ("initial_alpha", self.initial_alpha),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.final_lr_fraction > 0.0 && self.final_lr_fraction <= 1.0) {
            return bad("final_lr_fraction must lie in (0, 1]");
        }
        if !self.target_entropy.is_finite() || !(self.negativity_penalty >= 0.0) {
            return bad("target_entropy must be finite and negativity_penalty nonnegative");
        }
        if self.policy_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            return bad("hidden layer widths must be positive");
        }
        Ok(())
    }

    /// Learning-rate multiplier for `epoch`.
    pub fn lr_scale(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return 1.0;
        }
        let progress = (epoch as f64 / (self.epochs - 1) as f64).min(1.0);
        1.0 - (1.0 - self.final_lr_fraction) * progress
    }

    pub fn squash_for(&self, settings: &AuctionSettings) -> Squash {
        match self.squash {
            SquashKind::Tanh => default_squash(settings),
            SquashKind::Identity => Squash::Identity,
        }
    }
}

/// Plays `n_episodes` with the stochastic policy and returns one record per learner decision.
///
/// Episode `e` of `epoch` draws from its own stream, so the result does not
/// depend on how many threads run the collection.
pub fn collect_experience(
    policy: &PolicyParams,
    settings: &AuctionSettings,
    opponents: StrategyKind,
    n_episodes: usize,
    seed: u64,
    epoch: usize,
    negativity_penalty: f64,
) -> Result<Vec<TransitionRecord>> {
    let strategy = Strategy::Policy {
        params: policy.clone(),
        mode: PolicyMode::Sample,
    };
    let episodes: Vec<Vec<TransitionRecord>> = (0..n_episodes)
        .into_par_iter()
        .map(|e| {
            let mut rng = stream(seed, Stream::Collect, &[epoch as u64, e as u64]);
            let ep = play_strategy(settings, opponents, &strategy, &mut rng)?;
            let id = (epoch * n_episodes + e) as u64;
            Ok(ep
                .steps
                .iter()
                .map(|s| TransitionRecord::from_step(s, id, negativity_penalty))
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(episodes.into_iter().flatten().collect())
}

/// Per-epoch training metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean learner utility per collected episode, without penalties.
    pub mean_reward: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
    /// `−mean log π` over the actor batches of the epoch.
    pub entropy: f64,
}

pub const LOG_HEADER: &str = "epoch\tmean_reward\tcritic_loss\tactor_loss\talpha\tentropy";

impl fmt::Display for EpochRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.epoch, self.mean_reward, self.critic_loss, self.actor_loss, self.alpha, self.entropy
        )
    }
}

impl EpochRecord {
    pub fn parse(line: &str) -> Result<Self> {
        let bad = || Error::Config(format!("malformed training log row `{line}`"));
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 6 {
            return Err(bad());
        }
        let num = |i: usize| cols[i].parse::<f64>().map_err(|_| bad());
        Ok(Self {
            epoch: cols[0].parse().map_err(|_| bad())?,
            mean_reward: num(1)?,
            critic_loss: num(2)?,
            actor_loss: num(3)?,
            alpha: num(4)?,
            entropy: num(5)?,
        })
    }
}

pub fn format_log(log: &[EpochRecord]) -> String {
    let mut s = String::from(LOG_HEADER);
    s.push('\n');
    for r in log {
        s.push_str(&r.to_string());
        s.push('\n');
    }
    s
}

pub fn parse_log(text: &str) -> Result<Vec<EpochRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && *l != LOG_HEADER)
        .map(EpochRecord::parse)
        .collect()
}

/// Live parameters and optimizer state.
#[derive(Clone, Debug)]
pub struct SacState {
    pub policy: PolicyParams,
    pub critics: CriticParams,
    pub target_critics: CriticParams,
    pub temperature: TemperatureState,
    actor_opt: Adam,
    critic_opts: [Adam; 2],
}

impl SacState {
    pub fn init(config: &TrainConfig, settings: &AuctionSettings) -> Result<Self> {
        let obs_dim = feature_len(settings.n_rounds);
        let action_dim = settings.action_dim();
        let mut rng = stream(config.seed, Stream::Init, &[]);
        let policy = PolicyParams::new(
            obs_dim,
            &config.policy_hidden,
            action_dim,
            config.squash_for(settings),
            &mut rng,
        )?;
        let critics = CriticParams::new(obs_dim, action_dim, &config.critic_hidden, &mut rng)?;
        Self::from_parts(config, policy, critics.clone(), critics, config.initial_alpha)
    }

    pub fn from_parts(
        config: &TrainConfig,
        policy: PolicyParams,
        critics: CriticParams,
        target_critics: CriticParams,
        alpha: f64,
    ) -> Result<Self> {
        Ok(Self {
            actor_opt: Adam::new(policy.trunk.n_params(), config.actor_lr),
            critic_opts: [
                Adam::new(critics.q1.n_params(), config.critic_lr),
                Adam::new(critics.q2.n_params(), config.critic_lr),
            ],
            temperature: TemperatureState::new(alpha, config.alpha_lr)?,
            policy,
            critics,
            target_critics,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.policy.is_finite()
            && self.critics.is_finite()
            && self.target_critics.is_finite()
            && self.temperature.log_alpha.is_finite()
    }

    pub fn checkpoint(&self, experiment: Option<crate::ExperimentId>, epoch: usize) -> Checkpoint {
        Checkpoint {
            experiment,
            epoch,
            log_alpha: Some(self.temperature.log_alpha),
            policy: PolicySnapshot::Learned(self.policy.clone()),
            critics: Some(self.critics.clone()),
            target_critics: Some(self.target_critics.clone()),
        }
    }
}

/// Drives collection and updates epoch by epoch.
pub struct Trainer {
    config: TrainConfig,
    settings: AuctionSettings,
    opponents: StrategyKind,
    state: SacState,
    buffer: ReplayBuffer,
    epoch: usize,
    pool: Option<rayon::ThreadPool>,
}

impl Trainer {
    pub fn new(config: TrainConfig, settings: AuctionSettings, opponents: StrategyKind) -> Result<Self> {
        let state = SacState::init(&config, &settings)?;
        Self::with_state(config, settings, opponents, state, 0)
    }

    /// Continues from a checkpoint. Optimizer moments and the replay buffer
    /// start empty, so a resumed run is not bit-identical to an uninterrupted one.
    pub fn resume(
        config: TrainConfig,
        settings: AuctionSettings,
        opponents: StrategyKind,
        checkpoint: &Checkpoint,
    ) -> Result<Self> {
        let policy = match &checkpoint.policy {
            PolicySnapshot::Learned(p) => p.clone(),
            PolicySnapshot::Oracle(_) => {
                return Err(Error::Unsupported("cannot resume training from an oracle checkpoint".into()))
            }
        };
        let critics = checkpoint
            .critics
            .clone()
            .ok_or_else(|| Error::Unsupported("checkpoint has no critics".into()))?;
        let target = checkpoint.target_critics.clone().unwrap_or_else(|| critics.clone());
        let alpha = checkpoint.log_alpha.map_or(config.initial_alpha, f64::exp);
        let fresh = SacState::init(&config, &settings)?;
        if fresh.policy.trunk.sizes() != policy.trunk.sizes() || fresh.critics.q1.sizes() != critics.q1.sizes() {
            return Err(Error::Shape("checkpoint architecture does not match the configuration".into()));
        }
        let state = SacState::from_parts(&config, policy, critics, target, alpha)?;
        Self::with_state(config, settings, opponents, state, checkpoint.epoch)
    }

    fn with_state(
        config: TrainConfig,
        settings: AuctionSettings,
        opponents: StrategyKind,
        state: SacState,
        epoch: usize,
    ) -> Result<Self> {
        config.validate()?;
        settings.validate()?;
        let pool = match config.workers {
            0 => None,
            n => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
            ),
        };
        Ok(Self {
            buffer: ReplayBuffer::new(config.buffer_capacity)?,
            config,
            settings,
            opponents,
            state,
            epoch,
            pool,
        })
    }

    pub fn state(&self) -> &SacState {
        &self.state
    }

    pub fn into_state(self) -> SacState {
        self.state
    }

    /// Number of completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    fn collect(&self) -> Result<Vec<TransitionRecord>> {
        let run = || {
            collect_experience(
                &self.state.policy,
                &self.settings,
                self.opponents,
                self.config.episodes_per_epoch,
                self.config.seed,
                self.epoch,
                self.config.negativity_penalty,
            )
        };
        match &self.pool {
            Some(pool) => pool.install(run),
            None => run(),
        }
    }

    /// Collects one epoch of experience and runs the configured number of updates.
    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        let cfg = &self.config;
        let records = self.collect()?;
        let total: f64 = records.iter().map(|r| r.reward + r.penalty).sum();
        let mean_reward = total / cfg.episodes_per_epoch as f64;
        self.buffer.extend(records);

        let e = self.epoch as u64;
        let scale = cfg.lr_scale(self.epoch);
        self.state.actor_opt.lr = cfg.actor_lr * scale;
        for opt in &mut self.state.critic_opts {
            opt.lr = cfg.critic_lr * scale;
        }
        let mut mb_rng = stream(cfg.seed, Stream::Minibatch, &[e]);
        let mut up_rng = stream(cfg.seed, Stream::Update, &[e]);
        let (mut critic_loss, mut actor_loss, mut log_prob) = (0.0, 0.0, 0.0);
        let st = &mut self.state;
        for _ in 0..cfg.update_steps_per_epoch {
            let recs = sample_minibatch(&self.buffer, cfg.batch_size, cfg.relabel_fraction, &self.settings, &mut mb_rng)?;
            let batch = Batch::from_records(&recs, &self.settings)?;
            let alpha = st.temperature.alpha();
            let y = critic_targets(&batch, &st.target_critics, &st.policy, alpha, cfg.gamma, &mut up_rng)?;
            let [l1, l2] = critic_update(&mut st.critics, &mut st.critic_opts, &batch, &y)?;
            let actor = actor_update(
                &mut st.policy,
                &mut st.actor_opt,
                &st.critics,
                alpha,
                batch.obs.view(),
                Some(batch.mask.view()),
                &mut up_rng,
            )?;
            // The entropy target refers to the full action; rows with ignored
            // dimensions are rescaled to it.
            let full = st.policy.action_dim as f64;
            let scaled = ndarray::Zip::from(&actor.log_probs)
                .and(batch.mask.rows())
                .map_collect(|&lp, m| lp * full / m.sum());
            if cfg.auto_temperature {
                temperature_update(&mut st.temperature, &scaled, cfg.target_entropy);
            }
            polyak_update(&mut st.target_critics, &st.critics, cfg.polyak_tau)?;
            critic_loss += 0.5 * (l1 + l2);
            actor_loss += actor.loss;
            log_prob += scaled.mean().unwrap_or(0.0);
        }
        let steps = cfg.update_steps_per_epoch.max(1) as f64;
        let record = EpochRecord {
            epoch: self.epoch,
            mean_reward,
            critic_loss: critic_loss / steps,
            actor_loss: actor_loss / steps,
            alpha: st.temperature.alpha(),
            entropy: -log_prob / steps,
        };
        let finite = [record.mean_reward, record.critic_loss, record.actor_loss, record.alpha, record.entropy]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !st.is_finite() {
            return Err(Error::Diverged {
                epoch: self.epoch,
                what: if finite { "parameters".into() } else { format!("metrics {record}") },
            });
        }
        self.epoch += 1;
        Ok(record)
    }
}

/// Result of a completed training run.
#[derive(Clone, Debug)]
pub struct Trained {
    pub state: SacState,
    pub log: Vec<EpochRecord>,
}

/// Trains from scratch for `config.epochs` epochs.
pub fn train(config: &TrainConfig, settings: &AuctionSettings, opponents: StrategyKind) -> Result<Trained> {
    let mut trainer = Trainer::new(config.clone(), settings.clone(), opponents)?;
    let mut log = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        log.push(trainer.run_epoch()?);
    }
    Ok(Trained {
        state: trainer.into_state(),
        log,
    })
}
