use ndarray::{s, Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::replay::Batch;
use crate::error::{Error, Result};
use crate::nn::{critic_input, Adam, CriticParams, Mlp, PolicyParams};

fn normal_noise<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

/// Bootstrapped regression targets `r + γ·(min Q̄(s′, a′) − α·log π(a′|s′))`, or `r` at terminal rows.
pub fn critic_targets<R: Rng + ?Sized>(
    batch: &Batch,
    target: &CriticParams,
    policy: &PolicyParams,
    alpha: f64,
    gamma: f64,
    rng: &mut R,
) -> Result<Array1<f64>> {
    let noise = normal_noise(batch.len(), policy.action_dim, rng);
    critic_targets_with_noise(batch, target, policy, alpha, gamma, noise.view())
}

pub fn critic_targets_with_noise(
    batch: &Batch,
    target: &CriticParams,
    policy: &PolicyParams,
    alpha: f64,
    gamma: f64,
    noise: ArrayView2<'_, f64>,
) -> Result<Array1<f64>> {
    let mut y = batch.rewards.clone();
    if gamma == 0.0 || batch.terminal.iter().all(|&t| t) {
        return Ok(y);
    }
    let next = policy.evaluate_batch_masked(batch.next_obs.view(), noise, Some(batch.next_mask.view()))?;
    let q = target.min_q(batch.next_obs.view(), (&next.actions * &batch.next_mask).view())?;
    for i in 0..batch.len() {
        if !batch.terminal[i] {
            y[i] += gamma * (q[i] - alpha * next.log_probs[i]);
        }
    }
    Ok(y)
}

/// Mean squared error of one critic against `y` and its parameter gradient.
pub fn critic_loss_and_grad(net: &Mlp, input: ArrayView2<'_, f64>, y: &Array1<f64>) -> Result<(f64, Vec<f64>)> {
    let cache = net.forward_cached(input)?;
    let q = cache.output().column(0);
    let b = y.len() as f64;
    let diff = &q - y;
    let loss = diff.mapv(|d| d * d).sum() / b;
    let upstream = diff.mapv(|d| 2.0 * d / b).insert_axis(ndarray::Axis(1));
    let (grads, _) = net.backward(&cache, upstream.view())?;
    Ok((loss, grads))
}

/// One Adam step per critic on its regression loss. Returns the two losses.
pub fn critic_update(
    critics: &mut CriticParams,
    optimizers: &mut [Adam; 2],
    batch: &Batch,
    y: &Array1<f64>,
) -> Result<[f64; 2]> {
    let input = critic_input(batch.obs.view(), batch.actions.view());
    let mut losses = [0.0; 2];
    for (k, (net, opt)) in critics.nets_mut().into_iter().zip(optimizers.iter_mut()).enumerate() {
        let (loss, grads) = critic_loss_and_grad(net, input.view(), y)?;
        opt.step(net.params_mut(), &grads);
        losses[k] = loss;
    }
    Ok(losses)
}

/// Actor objective on one batch with fixed reparameterization noise.
#[derive(Clone, Debug)]
pub struct ActorEval {
    pub loss: f64,
    pub grads: Vec<f64>,
    pub log_probs: Array1<f64>,
}

/// `mean(α·log π(a|s) − min(Q₁, Q₂)(s, a))` with `a` reparameterized by `noise`, and its gradient.
///
/// Masked action dimensions are hidden from the critics and excluded from the log-density.
pub fn actor_loss_and_grad(
    policy: &PolicyParams,
    critics: &CriticParams,
    alpha: f64,
    obs: ArrayView2<'_, f64>,
    mask: Option<ArrayView2<'_, f64>>,
    noise: ArrayView2<'_, f64>,
) -> Result<ActorEval> {
    let b = obs.nrows();
    let bf = b as f64;
    let draw = policy.evaluate_batch_masked(obs, noise, mask)?;
    let input = critic_input(obs, (&draw.actions * &draw.mask).view());
    let c1 = critics.q1.forward_cached(input.view())?;
    let c2 = critics.q2.forward_cached(input.view())?;
    let (q1, q2) = (c1.output().column(0), c2.output().column(0));
    let mut up1 = Array2::zeros((b, 1));
    let mut up2 = Array2::zeros((b, 1));
    let mut loss = 0.0;
    for i in 0..b {
        let q = if q1[i] <= q2[i] {
            up1[[i, 0]] = -1.0 / bf;
            q1[i]
        } else {
            up2[[i, 0]] = -1.0 / bf;
            q2[i]
        };
        loss += alpha * draw.log_probs[i] - q;
    }
    loss /= bf;
    let (_, g1) = critics.q1.backward(&c1, up1.view())?;
    let (_, g2) = critics.q2.backward(&c2, up2.view())?;
    let f = obs.ncols();
    let d_action = (&g1.slice(s![.., f..]) + &g2.slice(s![.., f..])) * &draw.mask;
    let d_log_prob = Array1::from_elem(b, alpha / bf);
    let grads = policy.backward_batch(&draw, d_action.view(), d_log_prob.view())?;
    Ok(ActorEval {
        loss,
        grads,
        log_probs: draw.log_probs,
    })
}

/// One reparameterized Adam step on the actor. Returns the pre-step evaluation.
pub fn actor_update<R: Rng + ?Sized>(
    policy: &mut PolicyParams,
    optimizer: &mut Adam,
    critics: &CriticParams,
    alpha: f64,
    obs: ArrayView2<'_, f64>,
    mask: Option<ArrayView2<'_, f64>>,
    rng: &mut R,
) -> Result<ActorEval> {
    let noise = normal_noise(obs.nrows(), policy.action_dim, rng);
    let eval = actor_loss_and_grad(policy, critics, alpha, obs, mask, noise.view())?;
    optimizer.step(policy.trunk.params_mut(), &eval.grads);
    Ok(eval)
}

/// Entropy temperature, adjusted on `log α`.
#[derive(Clone, Debug, PartialEq)]
pub struct TemperatureState {
    pub log_alpha: f64,
    optimizer: Adam,
}

impl TemperatureState {
    pub fn new(alpha: f64, lr: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("initial temperature {alpha} must be positive")));
        }
        Ok(Self {
            log_alpha: alpha.ln(),
            optimizer: Adam::new(1, lr),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }
}

/// Gradient of `mean(−log α·(log π + target))` with respect to `log α`.
pub fn temperature_gradient(log_probs: &Array1<f64>, target_entropy: f64) -> f64 {
    -log_probs.iter().map(|lp| lp + target_entropy).sum::<f64>() / log_probs.len() as f64
}

/// One step on `log α`: α grows while the entropy estimate is below target and shrinks above it.
pub fn temperature_update(temp: &mut TemperatureState, log_probs: &Array1<f64>, target_entropy: f64) -> f64 {
    let g = temperature_gradient(log_probs, target_entropy);
    let mut p = [temp.log_alpha];
    temp.optimizer.step(&mut p, &[g]);
    temp.log_alpha = p[0];
    g
}

/// `target ← (1 − τ)·target + τ·online`, elementwise.
pub fn polyak_update(target: &mut CriticParams, online: &CriticParams, tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Config(format!("polyak τ = {tau} outside (0, 1]")));
    }
    for (t, o) in target.nets_mut().into_iter().zip(online.nets()) {
        if t.sizes() != o.sizes() {
            return Err(Error::Shape("target and online critics differ in shape".into()));
        }
        if tau == 1.0 {
            t.params_mut().copy_from_slice(o.params());
        } else {
            // Increment form keeps equal parameters exactly fixed.
            for (tp, &op) in t.params_mut().iter_mut().zip(o.params()) {
                *tp += tau * (op - *tp);
            }
        }
    }
    Ok(())
}
