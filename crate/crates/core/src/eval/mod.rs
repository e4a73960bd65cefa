//! Monte Carlo utilities and distances between learned and optimal play.

mod report;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use report::{EvalReport, L2Entry};

use crate::auction::{AuctionSettings, Observation};
use crate::error::{Error, Result};
use crate::nn::CriticParams;
use crate::oracle::{learner_targets, oracle_expected_utility, seq_best_response_truthful, BidTarget, OracleValue};
use crate::rng::{stream, Stream};
use crate::scenario::ExperimentId;
use crate::strategy::{play_strategy, PolicyMode, Strategy};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub n_profiles: usize,
    /// Points of the first-round type grid.
    pub grid_size: usize,
    /// Reachable observations sampled for each later round.
    pub later_round_samples: usize,
    /// Side length of the second-round (type × price) surface grid.
    pub surface_size: usize,
    pub seed: u64,
    /// Play the squashed mean instead of sampling.
    pub deterministic_policy: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_profiles: 4000,
            grid_size: 101,
            later_round_samples: 1000,
            surface_size: 41,
            seed: 0,
            deterministic_policy: true,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_profiles == 0 || self.grid_size < 2 || self.later_round_samples == 0 || self.surface_size < 2 {
            return Err(Error::Config(
                "n_profiles and later_round_samples must be positive, grid sizes at least 2".into(),
            ));
        }
        Ok(())
    }

    fn strategy(&self, strategy: &Strategy) -> Strategy {
        match strategy {
            Strategy::Policy { params, .. } => Strategy::Policy {
                params: params.clone(),
                mode: if self.deterministic_policy { PolicyMode::Mean } else { PolicyMode::Sample },
            },
            other => other.clone(),
        }
    }
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

/// Pairwise summation: order-fixed and accurate regardless of how values were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

pub fn mean_and_se(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = if xs.len() > 1 { pairwise_sum(&dev) / (n - 1.0) } else { 0.0 };
    Estimate {
        mean,
        se: (var / n).sqrt(),
    }
}

/// Learner utility averaged over `n_profiles` fresh type profiles.
pub fn mc_expected_utility(
    strategy: &Strategy,
    id: ExperimentId,
    settings: &AuctionSettings,
    config: &EvalConfig,
) -> Result<Estimate> {
    config.validate()?;
    let strategy = config.strategy(strategy);
    let utilities: Vec<f64> = (0..config.n_profiles)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(config.seed, Stream::Evaluate, &[i as u64]);
            Ok(play_strategy(settings, id.opponents(), &strategy, &mut rng)?.utility())
        })
        .collect::<Result<_>>()?;
    Ok(mean_and_se(&utilities))
}

/// Optimal expected utility minus the Monte Carlo estimate (positive means suboptimal).
pub fn utility_difference(
    strategy: &Strategy,
    id: ExperimentId,
    settings: &AuctionSettings,
    config: &EvalConfig,
) -> Result<(f64, Estimate)> {
    let optimum = oracle_expected_utility(id, settings)?;
    let achieved = mc_expected_utility(strategy, id, settings, config)?;
    Ok((optimum - achieved.mean, achieved))
}

/// Evenly spaced points on `[lo, hi]`, endpoints included.
pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// One row of a bid-function table.
#[derive(Clone, Debug, PartialEq)]
pub struct BidRow {
    pub obs: Observation,
    /// Deterministic bid of the evaluated strategy per action dimension.
    pub learned: Vec<f64>,
    pub targets: Vec<Option<BidTarget>>,
}

/// Observations at which the learner decides in `round`.
///
/// Round 0 uses a uniform type grid. Later rounds use histories reached when
/// the optimal learner plays against the fixed opponents.
pub fn evaluation_points(
    id: ExperimentId,
    settings: &AuctionSettings,
    round: usize,
    config: &EvalConfig,
) -> Result<Vec<Observation>> {
    if round >= settings.n_rounds {
        return Err(Error::RoundOutOfRange {
            round: round + 1,
            max: settings.n_rounds,
        });
    }
    if round == 0 {
        return Ok(grid(settings.type_lo, settings.type_hi, config.grid_size)
            .into_iter()
            .map(|t| Observation::initial(settings, t))
            .collect());
    }
    let optimal = Strategy::Oracle(id.optimal_learner());
    let mut points = Vec::with_capacity(config.later_round_samples);
    let max_episodes = 100 * config.later_round_samples;
    for e in 0..max_episodes {
        if points.len() == config.later_round_samples {
            break;
        }
        let mut rng = stream(config.seed, Stream::Grid, &[round as u64, e as u64]);
        let ep = play_strategy(settings, id.opponents(), &optimal, &mut rng)?;
        if let Some(step) = ep.steps.iter().find(|s| s.obs.round == round) {
            points.push(step.obs.clone());
        }
    }
    if points.is_empty() {
        return Err(Error::Unsupported(format!(
            "round {} is never reached by the optimal learner",
            round + 1
        )));
    }
    Ok(points)
}

fn deterministic_raw(strategy: &Strategy, settings: &AuctionSettings, obs: &Observation) -> Result<Vec<f64>> {
    match strategy {
        Strategy::Policy { params, .. } => params.mean_action(&obs.features()),
        Strategy::Oracle(_) => {
            let bid = strategy.deterministic_bid(settings, obs)?;
            Ok(crate::auction::encode_bid(settings, &bid))
        }
    }
}

/// Learned bids next to the optimal targets on the evaluation points of `round`.
pub fn bid_table(
    strategy: &Strategy,
    id: ExperimentId,
    settings: &AuctionSettings,
    round: usize,
    config: &EvalConfig,
) -> Result<Vec<BidRow>> {
    evaluation_points(id, settings, round, config)?
        .into_iter()
        .map(|obs| {
            // Clipping matches what the environment would receive.
            let learned = deterministic_raw(strategy, settings, &obs)?
                .into_iter()
                .map(|b| b.max(0.0))
                .collect();
            let targets = learner_targets(id, settings, &obs)?;
            Ok(BidRow { obs, learned, targets })
        })
        .collect()
}

/// Root-mean-square distance to the optimal bid per action dimension (`None` for unused dimensions).
pub fn l2_from_table(rows: &[BidRow]) -> Vec<Option<f64>> {
    let dims = rows.first().map_or(0, |r| r.targets.len());
    (0..dims)
        .map(|d| {
            let errs: Vec<f64> = rows
                .iter()
                .filter_map(|r| r.targets[d].map(|t| t.error(r.learned[d]).powi(2)))
                .collect();
            (!errs.is_empty()).then(|| (pairwise_sum(&errs) / errs.len() as f64).sqrt())
        })
        .collect()
}

pub fn l2_policy_distance(
    strategy: &Strategy,
    id: ExperimentId,
    settings: &AuctionSettings,
    round: usize,
    config: &EvalConfig,
) -> Result<Vec<Option<f64>>> {
    Ok(l2_from_table(&bid_table(strategy, id, settings, round, config)?))
}

/// RMS gap between `min(Q₁, Q₂)` at the policy's deterministic action and the
/// oracle value, over the first-round type grid. The raw soft Q is compared.
pub fn l2_value_distance(
    critics: &CriticParams,
    strategy: &Strategy,
    oracle: &OracleValue,
    config: &EvalConfig,
) -> Result<f64> {
    let settings = &oracle.settings;
    let points = evaluation_points(oracle.id, settings, 0, config)?;
    let f = crate::auction::feature_len(settings.n_rounds);
    let a = settings.action_dim();
    let mut feats = Array2::zeros((points.len(), f));
    let mut acts = Array2::zeros((points.len(), a));
    let mut truth = Vec::with_capacity(points.len());
    for (i, obs) in points.iter().enumerate() {
        obs.write_features(feats.row_mut(i).as_slice_mut().expect("row"));
        let raw = deterministic_raw(strategy, settings, obs)?;
        acts.row_mut(i).as_slice_mut().expect("row").copy_from_slice(&raw);
        truth.push(oracle.value(obs)?);
    }
    let q = critics.min_q(feats.view(), acts.view())?;
    let sq: Vec<f64> = q.iter().zip(&truth).map(|(q, v)| (q - v).powi(2)).collect();
    Ok((pairwise_sum(&sq) / sq.len() as f64).sqrt())
}

/// One point of the last-round (type × lowest revealed price) surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint {
    pub theta: f64,
    pub price: f64,
    pub learned: f64,
    pub optimal: f64,
}

/// Second-round bids of a sequential-sales learner over a uniform (θ, p) grid,
/// against the best response to truthful opponents.
///
/// The grid holds a single earlier round whose revealed price is `p`.
pub fn round2_surface(strategy: &Strategy, settings: &AuctionSettings, config: &EvalConfig) -> Result<Vec<SurfacePoint>> {
    if settings.n_rounds != 2 || settings.kind != crate::auction::AuctionKind::SequentialSales {
        return Err(Error::Unsupported("the price surface needs a two-round sequential sale".into()));
    }
    let ts = grid(settings.type_lo, settings.type_hi, config.surface_size);
    let mut out = Vec::with_capacity(ts.len() * ts.len());
    for &theta in &ts {
        for &price in &ts {
            let mut obs = Observation::initial(settings, theta);
            obs.round = 1;
            obs.revealed_prices = vec![price];
            let learned = deterministic_raw(strategy, settings, &obs)?[0].max(0.0);
            out.push(SurfacePoint {
                theta,
                price,
                learned,
                optimal: seq_best_response_truthful(&obs, settings),
            });
        }
    }
    Ok(out)
}

pub fn surface_rms(points: &[SurfacePoint]) -> f64 {
    let sq: Vec<f64> = points.iter().map(|p| (p.learned - p.optimal).powi(2)).collect();
    (pairwise_sum(&sq) / sq.len() as f64).sqrt()
}

/// Full report for one strategy; `critics` adds the value-function distance.
pub fn evaluate(
    strategy: &Strategy,
    critics: Option<(&CriticParams, f64)>,
    id: ExperimentId,
    settings: &AuctionSettings,
    config: &EvalConfig,
) -> Result<EvalReport> {
    let oracle = OracleValue::new(id, settings)?;
    let achieved = mc_expected_utility(strategy, id, settings, config)?;
    let mut l2 = Vec::new();
    for round in 0..settings.n_rounds {
        let per_dim = match l2_policy_distance(strategy, id, settings, round, config) {
            Ok(v) => v,
            // A round the optimal learner never reaches has no on-path distance.
            Err(Error::Unsupported(_)) => continue,
            Err(e) => return Err(e),
        };
        for (dim, v) in per_dim.into_iter().enumerate() {
            if let Some(value) = v {
                l2.push(L2Entry {
                    round: round + 1,
                    component: report::component_name(settings, round, dim).to_string(),
                    value,
                });
            }
        }
    }
    let (l2_value_function, alpha) = match critics {
        Some((c, alpha)) => (Some(l2_value_distance(c, strategy, &oracle, config)?), Some(alpha)),
        None => (None, None),
    };
    Ok(EvalReport {
        experiment: id,
        optimal_reward: oracle.expected_utility,
        achieved_reward: achieved.mean,
        achieved_se: achieved.se,
        utility_difference: oracle.expected_utility - achieved.mean,
        l2_per_round: l2,
        l2_value_function,
        alpha,
        n_profiles: config.n_profiles,
        seed: config.seed,
    })
}
