mod common;

use bidlearn_core::nn::Squash;
use common::{actor_fd_error, critic_fd_error};

const TOL: f64 = 1e-4;

#[test]
fn actor_gradient_through_tanh_squash() {
    for seed in 0..4 {
        let e = actor_fd_error(seed, Squash::AffineTanh { lo: 0.0, hi: 2.0 }, false, 0.5);
        assert!(e < TOL, "seed {seed}: {e:e}");
    }
}

#[test]
fn actor_gradient_with_masked_dimensions() {
    for seed in 0..4 {
        let e = actor_fd_error(seed, Squash::AffineTanh { lo: 1.0, hi: 3.0 }, true, 0.3);
        assert!(e < TOL, "seed {seed}: {e:e}");
    }
}

#[test]
fn actor_gradient_without_squash() {
    for seed in 0..4 {
        let e = actor_fd_error(seed, Squash::Identity, false, 0.2);
        assert!(e < TOL, "seed {seed}: {e:e}");
    }
}

#[test]
fn critic_gradient() {
    for seed in 0..4 {
        let e = critic_fd_error(seed);
        assert!(e < TOL, "seed {seed}: {e:e}");
    }
}
