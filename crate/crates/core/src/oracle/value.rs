//! Expected remaining utility of the learner's optimal policy.

use super::split::{first_round_split_bid, invert_first_round_bid, second_round_loser_bid};
use super::{oracle_bid, SplitRole, StrategyKind};
use crate::auction::{reward, Auction, BidAction, AuctionKind, AuctionSettings, Observation, Round1Award, TypeProfile};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, integrate};
use crate::scenario::ExperimentId;

fn unsupported(id: ExperimentId, why: &str) -> Error {
    Error::Unsupported(format!("{id}: {why}"))
}

fn require_defaults(id: ExperimentId, settings: &AuctionSettings) -> Result<()> {
    if *settings == id.default_settings() {
        Ok(())
    } else {
        Err(unsupported(id, "value oracle only covers the default settings"))
    }
}

/// `V(O)` under the learner's optimal policy against the experiment's opponents.
pub fn oracle_value_function(id: ExperimentId, settings: &AuctionSettings, obs: &Observation) -> Result<f64> {
    if obs.terminal || obs.round >= settings.n_rounds {
        return Ok(0.0);
    }
    let theta = obs.own_type;
    match id {
        ExperimentId::Seq1SP2 | ExperimentId::Seq1FP2 => {
            require_defaults(id, settings)?;
            // Win probability θ, surplus θ/2 either way.
            Ok(theta * theta / 2.0)
        }
        ExperimentId::Seq2FPTruthful3 => {
            require_defaults(id, settings)?;
            if obs.round == 0 {
                return Ok(theta * theta / 2.0 - theta.powi(3) / 12.0);
            }
            // One opponent left, uniform below the revealed price.
            let p = obs.revealed_prices[0];
            Ok(if theta <= 2.0 * p {
                theta * theta / (4.0 * p)
            } else {
                theta - p
            })
        }
        ExperimentId::Seq2FPEquilibrium3 => {
            require_defaults(id, settings)?;
            if obs.round == 0 {
                // Highest type wins round one at θ/3, second highest round two at θ/2.
                return Ok(2.0 / 3.0 * theta.powi(3) + theta * theta * (1.0 - theta));
            }
            let winner = obs.revealed_prices[0] * 3.0;
            let win_prob = if winner > 0.0 { (theta / winner).min(1.0) } else { 1.0 };
            Ok(theta / 2.0 * win_prob)
        }
        ExperimentId::SplitTruthful2 => {
            if settings.kind != AuctionKind::SplitAward
                || settings.n_bidders != 2
                || !settings.is_dual_source_efficient()
            {
                return Err(unsupported(id, "needs a two-bidder DSE split award"));
            }
            let c = settings.scale_c;
            match (obs.round, obs.own_round1_award) {
                (0, _) => Ok((1.0 - c) * 0.5 * (settings.type_lo + settings.type_hi) - c * theta),
                (_, Round1Award::None) => {
                    let opponent = obs.revealed_prices[0] / c;
                    Ok((1.0 - c) * opponent - c * theta)
                }
                // Under DSE the opponent's remaining cost undercuts ours.
                (_, Round1Award::Split) => Ok(0.0),
            }
        }
        ExperimentId::SplitEquilibrium3 => {
            if settings.kind != AuctionKind::SplitAward || !settings.is_dual_source_efficient() {
                return Err(unsupported(id, "needs a DSE split award"));
            }
            match (obs.round, obs.own_round1_award) {
                (0, _) => split_equilibrium_value_by_quadrature(settings, theta),
                (_, Round1Award::Split) => Ok(0.0),
                (_, Round1Award::None) => {
                    let winner = invert_first_round_bid(obs.revealed_prices[0], settings);
                    let bid = second_round_loser_bid(theta, settings);
                    let span = settings.type_hi - winner;
                    let beat_one = if span > 0.0 {
                        ((settings.type_hi - theta) / span).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    let others = settings.n_bidders as i32 - 2;
                    Ok((bid - settings.scale_c * theta) * beat_one.powi(others))
                }
            }
        }
    }
}

/// First-round equilibrium value for three bidders by integrating the
/// simulated equilibrium outcome over both opponents' types.
pub fn split_equilibrium_value_by_quadrature(settings: &AuctionSettings, theta: f64) -> Result<f64> {
    if settings.n_bidders != 3 {
        return Err(Error::Unsupported(
            "split equilibrium value quadrature is implemented for three bidders".into(),
        ));
    }
    let (lo, hi) = (settings.type_lo, settings.type_hi);
    let density = 1.0 / (hi - lo);
    let own_first = first_round_split_bid(theta, settings);
    let utility = |t1: f64, t2: f64| -> f64 {
        simulate_split_equilibrium(settings, [theta, t1, t2], own_first).unwrap_or(f64::NAN)
    };
    // Utility is constant between the breakpoints θ and t1, so integrate piecewise.
    let inner = |t1: f64| -> f64 {
        let mut cuts = vec![lo, theta.min(t1), theta.max(t1), hi];
        cuts.dedup();
        cuts.windows(2)
            .map(|w| gauss_legendre(|t2| utility(t1, t2), w[0], w[1], 1))
            .sum::<f64>()
            * density
    };
    let outer = gauss_legendre(&inner, lo, theta, 1) + gauss_legendre(&inner, theta, hi, 1);
    let v = outer * density;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("split equilibrium value".into()))
    }
}

fn simulate_split_equilibrium(settings: &AuctionSettings, types: [f64; 3], own_first: f64) -> Result<f64> {
    let mut auction = Auction::new(settings.clone(), TypeProfile(types.to_vec()), 0)?;
    let mut total = 0.0;
    while !auction.is_terminal() {
        let bids = (0..3)
            .map(|i| {
                let obs = auction.observe(i);
                match (i, SplitRole::of(&obs)) {
                    (0, SplitRole::FirstRound) => Ok(BidAction::SoleSplit {
                        sole: 2.0 * settings.type_hi,
                        split: own_first,
                    }),
                    _ => oracle_bid(StrategyKind::Equilibrium, settings, &obs),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let outcome = auction.step(&bids)?;
        total += reward(settings, types[0], outcome, 0);
    }
    Ok(total)
}

/// Optimal expected utility: the value function integrated over own types.
pub fn oracle_expected_utility(id: ExperimentId, settings: &AuctionSettings) -> Result<f64> {
    let (lo, hi) = (settings.type_lo, settings.type_hi);
    let density = 1.0 / (hi - lo);
    let initial = |t: f64| oracle_value_function(id, settings, &Observation::initial(settings, t));
    initial(0.5 * (lo + hi))?;
    let v = match id {
        // Cubic in θ; a few panels are exact and avoid a quadrature-in-quadrature blowup.
        ExperimentId::SplitEquilibrium3 => {
            gauss_legendre(|t| initial(t).unwrap_or(f64::NAN), lo, hi, 2)
        }
        _ => integrate(|t| initial(t).unwrap_or(f64::NAN), lo, hi),
    };
    Ok(v * density)
}

/// Expected utility together with the per-observation value it averages.
#[derive(Clone, Debug)]
pub struct OracleValue {
    pub id: ExperimentId,
    pub settings: AuctionSettings,
    pub expected_utility: f64,
}

impl OracleValue {
    pub fn new(id: ExperimentId, settings: &AuctionSettings) -> Result<Self> {
        Ok(Self {
            id,
            settings: settings.clone(),
            expected_utility: oracle_expected_utility(id, settings)?,
        })
    }

    pub fn value(&self, obs: &Observation) -> Result<f64> {
        oracle_value_function(self.id, &self.settings, obs)
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    fn eu(id: ExperimentId) -> f64 {
        oracle_expected_utility(id, &id.default_settings()).unwrap()
    }

    #[test]
    fn expected_utilities_match_reported_optima() {
        assert!((eu(ExperimentId::Seq1FP2) - 1.0 / 6.0).abs() < 1e-12);
        assert!((eu(ExperimentId::Seq1SP2) - 1.0 / 6.0).abs() < 1e-12);
        assert!((eu(ExperimentId::SplitTruthful2) - 0.9).abs() < 1e-12);
        assert!((eu(ExperimentId::Seq2FPTruthful3) - 7.0 / 48.0).abs() < 1e-12);
        assert!((eu(ExperimentId::Seq2FPTruthful3) - 0.1458).abs() < 1e-4);
        assert!((eu(ExperimentId::Seq2FPEquilibrium3) - 0.25).abs() < 1e-12);
        assert!((eu(ExperimentId::SplitEquilibrium3) - 0.05).abs() < 1e-10);
    }

    #[test]
    fn value_examples() {
        let s = ExperimentId::SplitTruthful2.default_settings();
        let mut obs = Observation::initial(&s, 1.0);
        obs.round = 1;
        obs.revealed_prices = vec![0.3];
        let v = oracle_value_function(ExperimentId::SplitTruthful2, &s, &obs).unwrap();
        assert!((v - 1.0).abs() < 1e-12);

        let sp = ExperimentId::Seq1SP2.default_settings();
        let v = oracle_value_function(ExperimentId::Seq1SP2, &sp, &Observation::initial(&sp, 0.6)).unwrap();
        assert!((v - 0.18).abs() < 1e-15);

        let mut done = Observation::initial(&sp, 0.6);
        done.terminal = true;
        assert_eq!(oracle_value_function(ExperimentId::Seq1SP2, &sp, &done).unwrap(), 0.0);
    }

    /// Reading of the appendix expression with balanced parentheses: the
    /// first-round win term plus the second-round win term, with
    /// `2(x−1)(2−x)` the probability of holding the middle type.
    fn appendix_reading(x: f64) -> f64 {
        (0.2 / 3.0 * (x + 4.0) - 0.2 * x) * (2.0 - x).powi(2)
            + (x * 0.2 + 0.2 * (2.0 - x) / 2.0 - 0.2 * x) * (x - 1.0) * (2.0 - x) * 2.0
    }

    #[test]
    fn split_equilibrium_value_agrees_with_appendix_reading() {
        let s = ExperimentId::SplitEquilibrium3.default_settings();
        for i in 0..=20 {
            let t = 1.0 + i as f64 / 20.0;
            let q = split_equilibrium_value_by_quadrature(&s, t).unwrap();
            assert!((q - appendix_reading(t)).abs() < 1e-10, "θ={t}: {q} vs {}", appendix_reading(t));
        }
    }

    #[test]
    fn unsupported_settings_rejected() {
        let mut s = ExperimentId::Seq1SP2.default_settings();
        s.n_bidders = 3;
        assert!(oracle_expected_utility(ExperimentId::Seq1SP2, &s).is_err());
    }
}
