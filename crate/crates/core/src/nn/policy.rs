//! Gaussian policy head with an optional affine-tanh squash.
//!
//! The trunk emits `[mean_1..mean_d, log_std_1..log_std_d]`. Sampling uses
//! `x = m + σ·ε` and `a = (hi−lo)/2 · tanh(x) + (hi+lo)/2`, so for a fixed ε
//! the action is a differentiable function of the parameters. The log
//! density subtracts `log((hi−lo)/2 · (1 − tanh²x))` once per dimension.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::mlp::{Mlp, MlpCache};
use crate::error::{Error, Result};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LOG_TWO_PI: f64 = 0.918_938_533_204_672_7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Squash {
    AffineTanh { lo: f64, hi: f64 },
    Identity,
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl Squash {
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Squash::AffineTanh { lo, hi } => 0.5 * (hi - lo) * x.tanh() + 0.5 * (hi + lo),
            Squash::Identity => x,
        }
    }

    /// `log |da/dx|`, evaluated stably for large |x|.
    pub fn log_jacobian(&self, x: f64) -> f64 {
        match *self {
            Squash::AffineTanh { lo, hi } => {
                // log(1 − tanh²x) = 2(log 2 − x − softplus(−2x))
                (0.5 * (hi - lo)).ln() + 2.0 * (std::f64::consts::LN_2 - x - softplus(-2.0 * x))
            }
            Squash::Identity => 0.0,
        }
    }

    fn d_log_jacobian(&self, x: f64) -> f64 {
        match self {
            Squash::AffineTanh { .. } => -2.0 * x.tanh(),
            Squash::Identity => 0.0,
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        match *self {
            Squash::AffineTanh { lo, hi } => {
                let t = x.tanh();
                0.5 * (hi - lo) * (1.0 - t * t)
            }
            Squash::Identity => 1.0,
        }
    }

    /// Pre-squash value for an action strictly inside the range.
    pub fn invert(&self, a: f64) -> Result<f64> {
        match *self {
            Squash::AffineTanh { lo, hi } => {
                let u = (a - 0.5 * (hi + lo)) / (0.5 * (hi - lo));
                if !(u > -1.0 && u < 1.0) {
                    return Err(Error::ActionOutsideSquash { action: a, lo, hi });
                }
                Ok(u.atanh())
            }
            Squash::Identity => Ok(a),
        }
    }
}

/// Weights of the stochastic actor.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    pub trunk: Mlp,
    pub action_dim: usize,
    pub squash: Squash,
}

/// One reparameterized draw.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicySample {
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub noise: Vec<f64>,
}

/// Batched draw with everything needed for the backward pass.
#[derive(Clone, Debug)]
pub struct PolicyBatch {
    cache: MlpCache,
    pub noise: Array2<f64>,
    pub pre_squash: Array2<f64>,
    pub std: Array2<f64>,
    log_std_clamped: Array2<bool>,
    /// Per-dimension weight of the log-density; 0 for dimensions the round ignores.
    pub mask: Array2<f64>,
    pub actions: Array2<f64>,
    pub log_probs: Array1<f64>,
}

impl PolicyParams {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        hidden: &[usize],
        action_dim: usize,
        squash: Squash,
        rng: &mut R,
    ) -> Result<Self> {
        if let Squash::AffineTanh { lo, hi } = squash {
            if !(lo < hi) {
                return Err(Error::Shape(format!("squash range [{lo}, {hi}] is empty")));
            }
        }
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2 * action_dim);
        Ok(Self {
            trunk: Mlp::new(&sizes, rng)?,
            action_dim,
            squash,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.trunk.input_dim()
    }

    pub fn is_finite(&self) -> bool {
        self.trunk.is_finite()
    }

    fn split_head(&self, row: ArrayView1<'_, f64>, d: usize) -> (f64, f64, bool) {
        let raw = row[self.action_dim + d];
        let clamped = !(LOG_STD_MIN..=LOG_STD_MAX).contains(&raw);
        (row[d], raw.clamp(LOG_STD_MIN, LOG_STD_MAX), clamped)
    }

    /// Mean and clamped log standard deviation per action dimension.
    pub fn head(&self, features: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let out = self.trunk.forward_one(features)?;
        let row = ArrayView1::from(&out[..]);
        Ok((0..self.action_dim)
            .map(|d| {
                let (m, ls, _) = self.split_head(row, d);
                (m, ls)
            })
            .unzip())
    }

    pub fn sample<R: Rng + ?Sized>(&self, features: &[f64], rng: &mut R) -> Result<PolicySample> {
        let noise: Vec<f64> = (0..self.action_dim).map(|_| rng.sample(StandardNormal)).collect();
        self.sample_with_noise(features, &noise)
    }

    pub fn sample_with_noise(&self, features: &[f64], noise: &[f64]) -> Result<PolicySample> {
        if !self.is_finite() {
            return Err(Error::NonFinite("policy parameters".into()));
        }
        let (mean, log_std) = self.head(features)?;
        let mut action = Vec::with_capacity(self.action_dim);
        let mut log_prob = 0.0;
        for d in 0..self.action_dim {
            let eps = noise[d];
            let x = mean[d] + log_std[d].exp() * eps;
            action.push(self.squash.apply(x));
            log_prob += -0.5 * eps * eps - log_std[d] - HALF_LOG_TWO_PI - self.squash.log_jacobian(x);
        }
        Ok(PolicySample {
            action,
            log_prob,
            noise: noise.to_vec(),
        })
    }

    /// Squashed mean: the deterministic deployment action.
    pub fn mean_action(&self, features: &[f64]) -> Result<Vec<f64>> {
        let (mean, _) = self.head(features)?;
        Ok(mean.into_iter().map(|m| self.squash.apply(m)).collect())
    }

    pub fn log_prob(&self, features: &[f64], action: &[f64]) -> Result<f64> {
        if action.len() != self.action_dim {
            return Err(Error::Shape(format!(
                "action of length {}, policy has {} dimensions",
                action.len(),
                self.action_dim
            )));
        }
        let (mean, log_std) = self.head(features)?;
        let mut lp = 0.0;
        for d in 0..self.action_dim {
            let x = self.squash.invert(action[d])?;
            let z = (x - mean[d]) / log_std[d].exp();
            lp += -0.5 * z * z - log_std[d] - HALF_LOG_TWO_PI - self.squash.log_jacobian(x);
        }
        Ok(lp)
    }

    /// Batched reparameterized draw with fixed noise (`B × action_dim`).
    pub fn evaluate_batch(&self, features: ArrayView2<'_, f64>, noise: ArrayView2<'_, f64>) -> Result<PolicyBatch> {
        self.evaluate_batch_masked(features, noise, None)
    }

    /// As [`PolicyParams::evaluate_batch`], with the log-density summed only
    /// over dimensions where `mask` is 1.
    pub fn evaluate_batch_masked(
        &self,
        features: ArrayView2<'_, f64>,
        noise: ArrayView2<'_, f64>,
        mask: Option<ArrayView2<'_, f64>>,
    ) -> Result<PolicyBatch> {
        let b = features.nrows();
        if noise.dim() != (b, self.action_dim) {
            return Err(Error::Shape(format!(
                "noise {:?} for batch {b} × {}",
                noise.dim(),
                self.action_dim
            )));
        }
        let mask = match mask {
            Some(m) if m.dim() != (b, self.action_dim) => {
                return Err(Error::Shape(format!("mask {:?} for batch {b} × {}", m.dim(), self.action_dim)))
            }
            Some(m) => m.to_owned(),
            None => Array2::ones((b, self.action_dim)),
        };
        let cache = self.trunk.forward_cached(features)?;
        let out = cache.output();
        let shape = (b, self.action_dim);
        let mut pre_squash = Array2::zeros(shape);
        let mut std = Array2::zeros(shape);
        let mut clamped = Array2::from_elem(shape, false);
        let mut actions = Array2::zeros(shape);
        let mut log_probs = Array1::zeros(b);
        for r in 0..b {
            let row = out.row(r);
            for d in 0..self.action_dim {
                let (m, ls, c) = self.split_head(row, d);
                let s = ls.exp();
                let eps = noise[[r, d]];
                let x = m + s * eps;
                pre_squash[[r, d]] = x;
                std[[r, d]] = s;
                clamped[[r, d]] = c;
                actions[[r, d]] = self.squash.apply(x);
                log_probs[r] += mask[[r, d]] * (-0.5 * eps * eps - ls - HALF_LOG_TWO_PI - self.squash.log_jacobian(x));
            }
        }
        Ok(PolicyBatch {
            cache,
            noise: noise.to_owned(),
            pre_squash,
            std,
            log_std_clamped: clamped,
            mask,
            actions,
            log_probs,
        })
    }

    /// Parameter gradient of `Σ_r d_log_prob[r]·log π_r + Σ_{r,d} d_action[r,d]·a_{r,d}`
    /// through the reparameterized sample.
    pub fn backward_batch(
        &self,
        batch: &PolicyBatch,
        d_action: ArrayView2<'_, f64>,
        d_log_prob: ArrayView1<'_, f64>,
    ) -> Result<Vec<f64>> {
        let (b, ad) = batch.actions.dim();
        if d_action.dim() != (b, ad) || d_log_prob.len() != b {
            return Err(Error::Shape("policy upstream gradient".into()));
        }
        let mut upstream = Array2::zeros((b, 2 * ad));
        for r in 0..b {
            for d in 0..ad {
                let x = batch.pre_squash[[r, d]];
                let d_lp = d_log_prob[r] * batch.mask[[r, d]];
                // dL/dx through the action and through −log|da/dx|.
                let dx = d_action[[r, d]] * self.squash.derivative(x) - d_lp * self.squash.d_log_jacobian(x);
                upstream[[r, d]] = dx;
                if !batch.log_std_clamped[[r, d]] {
                    // x depends on log σ via σ·ε; log π also has a direct −log σ term.
                    upstream[[r, ad + d]] = dx * batch.std[[r, d]] * batch.noise[[r, d]] - d_lp;
                }
            }
        }
        let (grads, _) = self.trunk.backward(&batch.cache, upstream.view())?;
        Ok(grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use crate::rng::{stream, Stream};
    use ndarray::Array2;

    fn fixed_policy(mean: f64, log_std: f64, squash: Squash) -> PolicyParams {
        // One input, no hidden layer: outputs are the biases.
        PolicyParams {
            trunk: Mlp::from_params(&[1, 2], vec![0.0, 0.0, mean, log_std]).unwrap(),
            action_dim: 1,
            squash,
        }
    }

    #[test]
    fn tiny_sigma_zero_mean_hits_midpoint() {
        let p = fixed_policy(0.0, LOG_STD_MIN, Squash::AffineTanh { lo: 0.0, hi: 1.0 });
        let s = p.sample_with_noise(&[0.3], &[1.7]).unwrap();
        assert!((s.action[0] - 0.5).abs() < 1e-8);
        assert_eq!(p.mean_action(&[0.3]).unwrap(), vec![0.5]);
    }

    #[test]
    fn fixed_noise_is_deterministic() {
        let mut rng = stream(4, Stream::Init, &[]);
        let p = PolicyParams::new(3, &[8], 2, Squash::AffineTanh { lo: 0.0, hi: 4.0 }, &mut rng).unwrap();
        let a = p.sample_with_noise(&[0.1, 0.2, 0.3], &[0.5, -1.0]).unwrap();
        let b = p.sample_with_noise(&[0.1, 0.2, 0.3], &[0.5, -1.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn density_integrates_to_one() {
        for (m, ls) in [(0.0, 0.0), (0.7, -0.5), (-1.2, 0.3)] {
            let p = fixed_policy(m, ls, Squash::AffineTanh { lo: 0.0, hi: 2.0 });
            let mass = integrate(
                |a| {
                    if a <= 0.0 || a >= 2.0 {
                        0.0
                    } else {
                        p.log_prob(&[0.0], &[a]).map(f64::exp).unwrap_or(0.0)
                    }
                },
                0.0,
                2.0,
            );
            assert!((mass - 1.0).abs() < 1e-3, "mass {mass} for ({m}, {ls})");
        }
    }

    #[test]
    fn sample_then_score_round_trip() {
        let mut rng = stream(8, Stream::Init, &[]);
        let p = PolicyParams::new(2, &[16], 2, Squash::AffineTanh { lo: 0.0, hi: 1.0 }, &mut rng).unwrap();
        for _ in 0..200 {
            let f = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let s = p.sample(&f, &mut rng).unwrap();
            let lp = p.log_prob(&f, &s.action).unwrap();
            assert!((lp - s.log_prob).abs() < 1e-9, "{lp} vs {}", s.log_prob);
            assert!(s.action.iter().all(|&a| (0.0..=1.0).contains(&a)));
        }
    }

    #[test]
    fn boundary_actions_rejected() {
        let p = fixed_policy(0.0, 0.0, Squash::AffineTanh { lo: 0.0, hi: 1.0 });
        assert!(p.log_prob(&[0.0], &[1.0]).is_err());
        assert!(p.log_prob(&[0.0], &[-0.1]).is_err());
    }

    #[test]
    fn wider_sigma_lowers_mean_log_prob() {
        let mut last = f64::INFINITY;
        for ls in [-3.0, -2.0, -1.0, 0.0] {
            let p = fixed_policy(0.2, ls, Squash::AffineTanh { lo: 0.0, hi: 1.0 });
            let mut rng = stream(1, Stream::Init, &[]);
            let mean_lp: f64 =
                (0..4000).map(|_| p.sample(&[0.0], &mut rng).unwrap().log_prob).sum::<f64>() / 4000.0;
            assert!(mean_lp < last);
            last = mean_lp;
        }
    }

    #[test]
    fn entropy_estimate_matches_quadrature() {
        let p = fixed_policy(0.3, -0.7, Squash::AffineTanh { lo: 0.0, hi: 1.0 });
        let entropy = integrate(
            |a| {
                if a <= 0.0 || a >= 1.0 {
                    return 0.0;
                }
                let lp = p.log_prob(&[0.0], &[a]).unwrap();
                -lp * lp.exp()
            },
            0.0,
            1.0,
        );
        let mut rng = stream(2, Stream::Init, &[]);
        let n = 20_000;
        let lps: Vec<f64> = (0..n).map(|_| p.sample(&[0.0], &mut rng).unwrap().log_prob).collect();
        let mean = lps.iter().sum::<f64>() / n as f64;
        let var = lps.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((-mean - entropy).abs() < 4.0 * se, "{} vs {entropy} (se {se})", -mean);
    }

    #[test]
    fn batch_matches_single_samples() {
        let mut rng = stream(6, Stream::Init, &[]);
        let p = PolicyParams::new(3, &[8], 2, Squash::AffineTanh { lo: 0.0, hi: 2.0 }, &mut rng).unwrap();
        let feats = Array2::from_shape_fn((4, 3), |(r, c)| (r as f64 - c as f64) * 0.3);
        let noise = Array2::from_shape_fn((4, 2), |(r, c)| (r * 2 + c) as f64 * 0.25 - 1.0);
        let batch = p.evaluate_batch(feats.view(), noise.view()).unwrap();
        for r in 0..4 {
            let f: Vec<f64> = feats.row(r).to_vec();
            let n: Vec<f64> = noise.row(r).to_vec();
            let s = p.sample_with_noise(&f, &n).unwrap();
            assert!((s.log_prob - batch.log_probs[r]).abs() < 1e-12);
            for d in 0..2 {
                assert!((s.action[d] - batch.actions[[r, d]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_squash_is_plain_gaussian() {
        let p = fixed_policy(0.4, 0.0, Squash::Identity);
        let lp = p.log_prob(&[0.0], &[0.4]).unwrap();
        assert!((lp + HALF_LOG_TWO_PI).abs() < 1e-15);
        assert!(p.log_prob(&[0.0], &[-3.0]).is_ok());
    }
}
