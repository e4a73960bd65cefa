use std::collections::VecDeque;

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::auction::{feature_len, own_reward, AuctionSettings, Observation};
use crate::error::{Error, Result};
use crate::strategy::LearnerStep;

/// One learner decision as stored in the replay buffer.
///
/// The learner's slice of the round outcome is kept so the reward can be
/// recomputed for any other type.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionRecord {
    pub obs: Observation,
    /// Action as produced by the policy, before clipping.
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Observation,
    pub terminal: bool,
    pub episode_id: u64,
    /// Type under which the record was collected.
    pub behavior_type: f64,
    pub units_won: u32,
    pub payment: f64,
    pub prior_units: u32,
    /// Type-independent penalty already subtracted from `reward`.
    pub penalty: f64,
}

impl TransitionRecord {
    pub fn from_step(step: &LearnerStep, episode_id: u64, penalty_per_unit: f64) -> Self {
        let me = crate::strategy::LEARNER;
        let penalty = penalty_per_unit * step.negativity;
        Self {
            obs: step.obs.clone(),
            action: step.raw_action.clone(),
            reward: step.reward - penalty,
            next_obs: step.next_obs.clone(),
            terminal: step.next_obs.terminal,
            episode_id,
            behavior_type: step.obs.own_type,
            units_won: step.outcome.allocations[me],
            payment: step.outcome.payments[me],
            prior_units: step.outcome.prior_units[me],
            penalty,
        }
    }
}

/// Copy of `record` as if it had been collected by a bidder of type `new_type`.
///
/// Allocations and payments depend only on bids, so the stored outcome stays
/// valid and only the reward changes.
pub fn relabel(record: &TransitionRecord, new_type: f64, settings: &AuctionSettings) -> Result<TransitionRecord> {
    settings.check_type(new_type)?;
    let r = own_reward(settings, new_type, record.units_won, record.payment, record.prior_units);
    Ok(TransitionRecord {
        obs: record.obs.with_type(new_type),
        next_obs: record.next_obs.with_type(new_type),
        reward: r - record.penalty,
        ..record.clone()
    })
}

/// Bounded FIFO store.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    records: VecDeque<TransitionRecord>,
    capacity: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self {
            records: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
            inserted: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total number of records ever pushed.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, record: TransitionRecord) {
        if self.records.len() == self.capacity {
            self.records.pop_front();
        }
        self.records.push_back(record);
        self.inserted += 1;
    }

    pub fn extend(&mut self, records: impl IntoIterator<Item = TransitionRecord>) {
        for r in records {
            self.push(r);
        }
    }

    pub fn get(&self, i: usize) -> Option<&TransitionRecord> {
        self.records.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &TransitionRecord> {
        self.records.iter()
    }
}

/// Uniform sample with replacement; each drawn record is independently
/// relabeled to a fresh type with probability `relabel_fraction`.
pub fn sample_minibatch<R: Rng + ?Sized>(
    buffer: &ReplayBuffer,
    batch_size: usize,
    relabel_fraction: f64,
    settings: &AuctionSettings,
    rng: &mut R,
) -> Result<Vec<TransitionRecord>> {
    if buffer.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    if !(0.0..=1.0).contains(&relabel_fraction) {
        return Err(Error::Config(format!("relabel fraction {relabel_fraction} outside [0, 1]")));
    }
    let mut out = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let rec = &buffer.records[rng.random_range(0..buffer.len())];
        if rng.random_bool(relabel_fraction) {
            let t = settings.sample_type(rng);
            out.push(relabel(rec, t, settings)?);
        } else {
            out.push(rec.clone());
        }
    }
    Ok(out)
}

/// Minibatch laid out as dense matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub obs: Array2<f64>,
    /// Stored actions with dimensions the round ignores set to zero.
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_obs: Array2<f64>,
    pub terminal: Vec<bool>,
    /// Action masks of `obs` and `next_obs` (see [`AuctionSettings::action_mask`]).
    pub mask: Array2<f64>,
    pub next_mask: Array2<f64>,
}

impl Batch {
    pub fn from_records(records: &[TransitionRecord], settings: &AuctionSettings) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let f = feature_len(settings.n_rounds);
        let a = settings.action_dim();
        let b = records.len();
        let mut batch = Batch {
            obs: Array2::zeros((b, f)),
            actions: Array2::zeros((b, a)),
            rewards: Array1::zeros(b),
            next_obs: Array2::zeros((b, f)),
            terminal: Vec::with_capacity(b),
            mask: Array2::zeros((b, a)),
            next_mask: Array2::zeros((b, a)),
        };
        for (i, r) in records.iter().enumerate() {
            if r.action.len() != a || r.obs.horizon != settings.n_rounds {
                return Err(Error::Shape("record does not belong to this experiment".into()));
            }
            r.obs.write_features(batch.obs.row_mut(i).as_slice_mut().expect("row"));
            r.next_obs.write_features(batch.next_obs.row_mut(i).as_slice_mut().expect("row"));
            let m = settings.action_mask(r.obs.round);
            let nm = settings.action_mask(r.next_obs.round.min(settings.n_rounds - 1));
            for d in 0..a {
                batch.mask[[i, d]] = m[d];
                batch.next_mask[[i, d]] = nm[d];
                batch.actions[[i, d]] = m[d] * r.action[d];
            }
            batch.rewards[i] = r.reward;
            batch.terminal.push(r.terminal);
        }
        Ok(batch)
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auction::{PriceRule, Round1Award};

    fn seq_record(theta: f64, won: u32, pay: f64) -> TransitionRecord {
        let s = AuctionSettings::sequential(2, 1, PriceRule::FirstPrice);
        let obs = Observation::initial(&s, theta);
        let mut next = obs.clone();
        next.terminal = true;
        next.round = 1;
        next.revealed_prices = vec![pay];
        TransitionRecord {
            reward: own_reward(&s, theta, won, pay, 0),
            obs,
            action: vec![pay],
            next_obs: next,
            terminal: true,
            episode_id: 0,
            behavior_type: theta,
            units_won: won,
            payment: pay,
            prior_units: 0,
            penalty: 0.0,
        }
    }

    #[test]
    fn relabel_win() {
        let s = AuctionSettings::sequential(2, 1, PriceRule::FirstPrice);
        let r = seq_record(0.8, 1, 0.3);
        assert!((r.reward - 0.5).abs() < 1e-15);
        let r2 = relabel(&r, 0.4, &s).unwrap();
        assert!((r2.reward - 0.1).abs() < 1e-15);
        assert_eq!(r2.obs.own_type, 0.4);
        assert_eq!(r2.action, r.action);
        assert_eq!(r2.terminal, r.terminal);
        assert_eq!(r2.behavior_type, 0.8);
    }

    #[test]
    fn relabel_loss_and_identity() {
        let s = AuctionSettings::sequential(2, 1, PriceRule::FirstPrice);
        let r = seq_record(0.8, 0, 0.0);
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(relabel(&r, t, &s).unwrap().reward, 0.0);
        }
        let w = seq_record(0.8, 1, 0.3);
        assert_eq!(relabel(&w, 0.8, &s).unwrap(), w);
        assert!(relabel(&w, 1.5, &s).is_err());
    }

    #[test]
    fn relabel_split_costs() {
        let s = AuctionSettings::split_award(3, 0.2);
        let mut obs = Observation::initial(&s, 1.5);
        obs.round = 1;
        obs.own_round1_award = Round1Award::Split;
        let rec = TransitionRecord {
            obs: obs.clone(),
            action: vec![0.0, 1.7],
            reward: 0.0,
            next_obs: Observation { terminal: true, ..obs },
            terminal: true,
            episode_id: 4,
            behavior_type: 1.5,
            units_won: 1,
            payment: 1.7,
            prior_units: 1,
            penalty: 0.0,
        };
        // Second unit costs (1 − C)·θ.
        let r = relabel(&rec, 2.0, &s).unwrap();
        assert!((r.reward - (1.7 - 0.8 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(3).unwrap();
        for i in 0..5 {
            let mut r = seq_record(0.5, 0, 0.0);
            r.episode_id = i;
            b.push(r);
        }
        assert_eq!(b.len(), 3);
        assert_eq!(b.inserted(), 5);
        let ids: Vec<u64> = b.iter().map(|r| r.episode_id).collect();
        assert_eq!(ids, vec![2, 3, 4]);
    }

    #[test]
    fn empty_buffer_and_degenerate_fractions() {
        let s = AuctionSettings::sequential(2, 1, PriceRule::FirstPrice);
        let mut rng = crate::rng::stream(0, crate::rng::Stream::Minibatch, &[]);
        let mut b = ReplayBuffer::new(10).unwrap();
        assert!(matches!(sample_minibatch(&b, 4, 0.5, &s, &mut rng), Err(Error::EmptyBuffer)));
        b.push(seq_record(0.8, 1, 0.3));
        let plain = sample_minibatch(&b, 50, 0.0, &s, &mut rng).unwrap();
        assert!(plain.iter().all(|r| r.obs.own_type == 0.8));
        let all = sample_minibatch(&b, 50, 1.0, &s, &mut rng).unwrap();
        assert!(all.iter().all(|r| r.obs.own_type != 0.8));
    }
}
