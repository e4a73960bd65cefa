use crate::auction::{AuctionSettings, Observation, PriceRule};
use crate::error::{Error, Result};

/// Symmetric equilibrium bid in round `round_k` (1-based) of a sequential sale
/// of `k_items` to `n` unit-demand bidders with values uniform on `[0, 1]`.
pub fn seq_equilibrium_bid(
    theta: f64,
    round_k: usize,
    n: usize,
    k_items: usize,
    price_rule: PriceRule,
) -> Result<f64> {
    if round_k == 0 || round_k > k_items || k_items >= n {
        return Err(Error::RoundOutOfRange {
            round: round_k,
            max: k_items,
        });
    }
    let (n, k_items, k) = (n as f64, k_items as f64, round_k as f64);
    Ok(match price_rule {
        PriceRule::FirstPrice => theta * (n - k_items) / (n - k + 1.0),
        PriceRule::SecondPrice => theta * (n - k_items) / (n - k),
    })
}

/// Best response against truthful opponents: lose every round but the last,
/// then snipe below the lowest revealed price.
///
/// In the last round `r = n − K` opponents remain, each uniform below the
/// lowest revealed price. Under second price the response is
/// `min(θ, p_min)`; under first price it is `min(θ·r/(r+1), p_min)`, which
/// is `min(θ/2, p_min)` whenever a single opponent remains.
pub fn seq_best_response_truthful(obs: &Observation, settings: &AuctionSettings) -> f64 {
    if !obs.is_last_round() {
        return 0.0;
    }
    let cap = obs.min_price().unwrap_or(f64::INFINITY);
    let theta = obs.own_type;
    match settings.price_rule {
        PriceRule::SecondPrice => theta.min(cap),
        PriceRule::FirstPrice => {
            let r = settings.n_bidders.saturating_sub(settings.n_rounds).max(1) as f64;
            (theta * r / (r + 1.0)).min(cap)
        }
    }
}
