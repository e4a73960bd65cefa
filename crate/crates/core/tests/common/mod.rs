//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::io::Write;

use bidlearn_core::auction::{reward, AuctionSettings, Observation};
use bidlearn_core::nn::{critic_input, CriticParams, Mlp, PolicyParams, Squash};
use bidlearn_core::rng::{stream, Stream};
use bidlearn_core::sac::{actor_loss_and_grad, critic_loss_and_grad, relabel, TransitionRecord};
use bidlearn_core::strategy::{play_episode, LEARNER};
use bidlearn_core::oracle::StrategyKind;
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

pub const FD_STEP: f64 = 1e-5;

/// `|a − b| / max(|a|, |b|)`, with gradients below `1e-8` in both compared absolutely.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-8 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng, normal: bool) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| {
        if normal {
            rng.sample(StandardNormal)
        } else {
            rng.random_range(-1.0..1.0)
        }
    })
}

/// Largest relative error between the analytic actor gradient and central differences.
pub fn actor_fd_error(seed: u64, squash: Squash, masked: bool, alpha: f64) -> f64 {
    let mut rng = stream(seed, Stream::Init, &[]);
    let (f, d, b) = (5, 2, 6);
    let mut policy = PolicyParams::new(f, &[7, 6], d, squash, &mut rng).unwrap();
    let critics = CriticParams::new(f, d, &[6, 5], &mut rng).unwrap();
    let obs = random_matrix(b, f, &mut rng, false);
    let noise = random_matrix(b, d, &mut rng, true);
    let mask = Array2::from_shape_fn((b, d), |(r, c)| if masked && r % 2 == 0 && c == 0 { 0.0 } else { 1.0 });
    let m = masked.then(|| mask.view());
    let analytic = actor_loss_and_grad(&policy, &critics, alpha, obs.view(), m, noise.view())
        .unwrap()
        .grads;
    let mut worst: f64 = 0.0;
    for i in 0..policy.trunk.n_params() {
        let orig = policy.trunk.params()[i];
        policy.trunk.params_mut()[i] = orig + FD_STEP;
        let up = actor_loss_and_grad(&policy, &critics, alpha, obs.view(), m, noise.view()).unwrap().loss;
        policy.trunk.params_mut()[i] = orig - FD_STEP;
        let down = actor_loss_and_grad(&policy, &critics, alpha, obs.view(), m, noise.view()).unwrap().loss;
        policy.trunk.params_mut()[i] = orig;
        worst = worst.max(relative_error(analytic[i], (up - down) / (2.0 * FD_STEP)));
    }
    worst
}

/// Largest relative error of the critic regression gradient.
pub fn critic_fd_error(seed: u64) -> f64 {
    let mut rng = stream(seed, Stream::Init, &[]);
    let (f, d, b) = (5, 2, 8);
    let mut net = Mlp::new(&[f + d, 8, 6, 1], &mut rng).unwrap();
    let input = critic_input(random_matrix(b, f, &mut rng, false).view(), random_matrix(b, d, &mut rng, false).view());
    let y = Array1::from_shape_fn(b, |_| rng.random_range(-1.0..1.0));
    let (_, analytic) = critic_loss_and_grad(&net, input.view(), &y).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..net.n_params() {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + FD_STEP;
        let up = critic_loss_and_grad(&net, input.view(), &y).unwrap().0;
        net.params_mut()[i] = orig - FD_STEP;
        let down = critic_loss_and_grad(&net, input.view(), &y).unwrap().0;
        net.params_mut()[i] = orig;
        worst = worst.max(relative_error(analytic[i], (up - down) / (2.0 * FD_STEP)));
    }
    worst
}

/// Collects at least `n` transitions with random raw bids against `opponents`,
/// relabels each to a fresh type and counts exact mismatches against the
/// environment reward of the recorded round. Returns `(checked, mismatches)`.
pub fn relabel_mismatches(settings: &AuctionSettings, opponents: StrategyKind, n: usize, seed: u64) -> (usize, usize) {
    let mut rng = stream(seed, Stream::Collect, &[]);
    let (mut checked, mut bad) = (0, 0);
    let d = settings.action_dim();
    let cap = settings.bid_cap();
    let mut e = 0u64;
    while checked < n {
        let types = bidlearn_core::auction::sample_types(settings, &mut rng);
        let mut draws = stream(seed, Stream::Collect, &[e]);
        let mut learner = |_: &Observation| -> bidlearn_core::Result<Vec<f64>> {
            Ok((0..d).map(|_| draws.random_range(-0.05 * cap..1.05 * cap)).collect())
        };
        let ep = play_episode(settings, opponents, types, e, &mut learner).unwrap();
        for step in &ep.steps {
            let rec = TransitionRecord::from_step(step, e, 1.0);
            let t = settings.sample_type(&mut rng);
            let r = relabel(&rec, t, settings).unwrap();
            let env = reward(settings, t, &step.outcome, LEARNER) - rec.penalty;
            if r.reward.to_bits() != env.to_bits() || r.obs.own_type != t || r.next_obs.own_type != t {
                bad += 1;
            }
            checked += 1;
        }
        e += 1;
    }
    (checked, bad)
}

/// Writes one acceptance line to stderr, bypassing the test harness's capture.
pub fn report(criterion: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[acceptance] {tag} {criterion}: {detail}");
}
