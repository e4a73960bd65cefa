//! Acceptance suite. Each test prints one `[acceptance] PASS|FAIL` line to
//! stderr and then asserts. Tolerances are fixed here.

mod common;

use bidlearn_core::auction::{Auction, AuctionSettings, PriceRule, TypeProfile};
use bidlearn_core::eval::{bid_table, mc_expected_utility, round2_surface, surface_rms, EvalConfig};
use bidlearn_core::experiment::{run_experiment, ExperimentSpec};
use bidlearn_core::nn::{CriticParams, PolicyParams, Squash};
use bidlearn_core::oracle::{
    first_round_split_bid, oracle_expected_utility, second_round_loser_bid, split_equilibrium_closed_form_n3,
};
use bidlearn_core::quadrature::integrate;
use bidlearn_core::rng::{stream, Stream};
use bidlearn_core::sac::{polyak_update, temperature_update, TemperatureState};
use bidlearn_core::strategy::{PolicyMode, Strategy};
use bidlearn_core::ExperimentId;
use common::report;
use ndarray::Array1;
use rand::Rng;

const ORACLE_PROFILES: usize = 100_000;
const MC_SIGMAS: f64 = 3.0;
const QUADRATURE_TOL: f64 = 1e-8;
const GRADIENT_TOL: f64 = 1e-4;
const RELABEL_TRANSITIONS: usize = 10_000;
const ONE_ROUND_UD: f64 = 0.01;
const ONE_ROUND_L2: f64 = 0.05;
const TWO_ROUND_UD: f64 = 0.02;
const TWO_ROUND_MEAN_FIRST_BID: f64 = 0.05;
const TWO_ROUND_SURFACE_RMS: f64 = 0.1;
const SPLIT_UD: f64 = 0.05;
const LEARNING_SEED: u64 = 0;

fn check(criterion: &str, pass: bool, detail: String) {
    report(criterion, pass, &detail);
    assert!(pass, "{criterion}: {detail}");
}

fn oracle_value(id: ExperimentId, expected: f64) {
    let s = id.default_settings();
    let analytic = oracle_expected_utility(id, &s).unwrap();
    let config = EvalConfig {
        n_profiles: ORACLE_PROFILES,
        seed: 11,
        ..EvalConfig::default()
    };
    let mc = mc_expected_utility(&Strategy::Oracle(id.optimal_learner()), id, &s, &config).unwrap();
    let z = (mc.mean - expected) / mc.se;
    let pass = (analytic - expected).abs() < 1e-12 && z.abs() < MC_SIGMAS;
    check(
        &format!("oracle value {id}"),
        pass,
        format!(
            "analytic {analytic:.10} (expected {expected:.10}), MC {:.5} ± {:.5} at {ORACLE_PROFILES} profiles, |z| = {:.2} < {MC_SIGMAS}",
            mc.mean,
            mc.se,
            z.abs()
        ),
    );
}

#[test]
fn oracle_value_one_round_first_price() {
    oracle_value(ExperimentId::Seq1FP2, 1.0 / 6.0);
}

#[test]
fn oracle_value_one_round_second_price() {
    oracle_value(ExperimentId::Seq1SP2, 1.0 / 6.0);
}

#[test]
fn oracle_value_split_truthful() {
    oracle_value(ExperimentId::SplitTruthful2, 0.9);
}

#[test]
fn split_quadrature_matches_closed_form() {
    let s = ExperimentId::SplitEquilibrium3.default_settings();
    let (lo, hi, n) = (1.0, 2.0 - 1e-6, 1000);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let theta = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let (first, second) = split_equilibrium_closed_form_n3(theta, s.scale_c).unwrap();
        worst = worst
            .max((first_round_split_bid(theta, &s) - first).abs())
            .max((second_round_loser_bid(theta, &s) - second).abs());
    }
    check(
        "split equilibrium quadrature vs closed form",
        worst < QUADRATURE_TOL,
        format!("max abs error {worst:.3e} on {n} points over [1, 2-1e-6] (< {QUADRATURE_TOL:e})"),
    );
}

#[test]
fn gradients_match_finite_differences() {
    let mut worst: f64 = 0.0;
    for seed in 0..3 {
        worst = worst
            .max(common::actor_fd_error(seed, Squash::AffineTanh { lo: 0.0, hi: 2.0 }, false, 0.5))
            .max(common::actor_fd_error(seed, Squash::AffineTanh { lo: 1.0, hi: 3.0 }, true, 0.5))
            .max(common::actor_fd_error(seed, Squash::Identity, false, 0.5))
            .max(common::critic_fd_error(seed));
    }
    check(
        "actor and critic gradients",
        worst < GRADIENT_TOL,
        format!("max relative error {worst:.3e} at h = {:e} (< {GRADIENT_TOL:e})", common::FD_STEP),
    );
}

#[test]
fn relabeled_rewards_are_exact() {
    let seq = ExperimentId::Seq2FPTruthful3;
    let split = ExperimentId::SplitEquilibrium3;
    let (n1, bad1) = common::relabel_mismatches(&seq.default_settings(), seq.opponents(), RELABEL_TRANSITIONS, 21);
    let (n2, bad2) =
        common::relabel_mismatches(&split.default_settings(), split.opponents(), RELABEL_TRANSITIONS, 22);
    check(
        "relabel soundness",
        bad1 == 0 && bad2 == 0,
        format!("{bad1} of {n1} sequential and {bad2} of {n2} split-award transitions differ bitwise"),
    );
}

struct Learned {
    ud: f64,
    se: f64,
    strategy: Strategy,
    report: bidlearn_core::eval::EvalReport,
    spec: ExperimentSpec,
}

fn learn(id: ExperimentId) -> Learned {
    let spec = ExperimentSpec::desk(id);
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&spec, dir.path(), LEARNING_SEED).unwrap();
    let ckpt = bidlearn_core::nn::Checkpoint::load(&dir.path().join("checkpoints/final.ckpt")).unwrap();
    let params = match ckpt.policy {
        bidlearn_core::nn::PolicySnapshot::Learned(p) => p,
        _ => unreachable!(),
    };
    Learned {
        ud: out.report.utility_difference,
        se: out.report.achieved_se,
        strategy: Strategy::Policy {
            params,
            mode: PolicyMode::Mean,
        },
        report: out.report,
        spec,
    }
}

fn one_round(id: ExperimentId, name: &str) {
    let l = learn(id);
    let l2 = l.report.l2(1, "bid").unwrap();
    check(
        name,
        l.ud <= ONE_ROUND_UD && l2 <= ONE_ROUND_L2,
        format!(
            "utility difference {:.4} ± {:.4} (≤ {ONE_ROUND_UD}), round-1 l2 {l2:.4} (≤ {ONE_ROUND_L2}), desk preset, {} epochs",
            l.ud, l.se, l.spec.train.epochs
        ),
    );
}

#[test]
fn learning_one_round_second_price() {
    one_round(ExperimentId::Seq1SP2, "learning Seq1SP2");
}

#[test]
fn learning_one_round_first_price() {
    one_round(ExperimentId::Seq1FP2, "learning Seq1FP2");
}

#[test]
fn learning_two_rounds_against_truthful_bidders() {
    let l = learn(ExperimentId::Seq2FPTruthful3);
    let s = &l.spec.settings;
    let rows = bid_table(&l.strategy, l.spec.id, s, 0, &l.spec.eval).unwrap();
    let mean_first = rows.iter().map(|r| r.learned[0].max(0.0)).sum::<f64>() / rows.len() as f64;
    let rms = surface_rms(&round2_surface(&l.strategy, s, &l.spec.eval).unwrap());
    check(
        "learning Seq2FPTruthful3",
        l.ud <= TWO_ROUND_UD && mean_first <= TWO_ROUND_MEAN_FIRST_BID && rms <= TWO_ROUND_SURFACE_RMS,
        format!(
            "utility difference {:.4} ± {:.4} (≤ {TWO_ROUND_UD}), round-1 mean bid {mean_first:.4} (≤ {TWO_ROUND_MEAN_FIRST_BID}), round-2 surface rms {rms:.4} (≤ {TWO_ROUND_SURFACE_RMS})",
            l.ud, l.se
        ),
    );
}

#[test]
fn learning_split_award_against_truthful_seller() {
    let l = learn(ExperimentId::SplitTruthful2);
    check(
        "learning SplitTruthful2",
        l.ud <= SPLIT_UD,
        format!("utility difference {:.4} ± {:.4} (≤ {SPLIT_UD}), desk preset, {} epochs", l.ud, l.se, l.spec.train.epochs),
    );
}

#[test]
fn identical_runs_are_identical() {
    let mut spec = ExperimentSpec::desk(ExperimentId::Seq2FPTruthful3).scaled(0.1).unwrap().with_workers(2);
    spec.eval.n_profiles = 2000;
    let a_dir = tempfile::tempdir().unwrap();
    let b_dir = tempfile::tempdir().unwrap();
    let a = run_experiment(&spec, a_dir.path(), 5).unwrap();
    let b = run_experiment(&spec, b_dir.path(), 5).unwrap();
    let read = |d: &std::path::Path, f: &str| std::fs::read(d.join(f)).unwrap();
    let same_files = ["train_log.tsv", "eval_report.txt", "checkpoints/final.ckpt", "plots/bids_round1.tsv"]
        .iter()
        .all(|f| read(a_dir.path(), f) == read(b_dir.path(), f));
    check(
        "determinism",
        a.log == b.log && a.report == b.report && same_files,
        format!(
            "{} epochs twice with seed 5 and 2 workers: logs, reports and artifacts byte-identical = {}",
            spec.train.epochs,
            a.log == b.log && a.report == b.report && same_files
        ),
    );
}

/// Deterministic sweeps over the invariants that the `properties` target
/// checks with random inputs.
#[test]
fn invariant_sweeps() {
    let mut failures = Vec::new();
    let mut rng = stream(31, Stream::Init, &[]);

    // Conservation and single wins in sequential sales.
    for trial in 0..2000u64 {
        let n = 2 + (trial % 4) as usize;
        let rule = if trial % 2 == 0 { PriceRule::FirstPrice } else { PriceRule::SecondPrice };
        let s = AuctionSettings::sequential(n, n - 1, rule);
        let types = TypeProfile((0..n).map(|_| rng.random()).collect());
        let mut a = Auction::new(s, types, trial).unwrap();
        let mut wins = vec![0u32; n];
        while !a.is_terminal() {
            let bids: Vec<f64> = a.participants().iter().map(|_| (rng.random::<f64>() * 4.0).floor() / 4.0).collect();
            let o = a.step_sequential(&bids).unwrap();
            if o.units_sold() != 1 {
                failures.push(format!("units sold {}", o.units_sold()));
            }
            for (w, x) in wins.iter_mut().zip(&o.allocations) {
                *w += x;
            }
        }
        if wins.iter().any(|&w| w > 1) || wins.iter().sum::<u32>() as usize != n - 1 {
            failures.push(format!("wins {wins:?}"));
        }
    }

    // Squashed density normalization.
    for (mean, log_std) in [(0.0, 0.0), (1.5, -1.0), (-2.0, 0.3)] {
        let trunk = bidlearn_core::nn::Mlp::from_params(&[1, 2], vec![0.0, 0.0, mean, log_std]).unwrap();
        let p = PolicyParams {
            trunk,
            action_dim: 1,
            squash: Squash::AffineTanh { lo: 1.0, hi: 2.0 },
        };
        let mass = integrate(|a| p.log_prob(&[0.0], &[a]).unwrap().exp(), 1.0 + 1e-9, 2.0 - 1e-9);
        if (mass - 1.0).abs() > 1e-6 {
            failures.push(format!("density mass {mass}"));
        }
    }

    // Temperature signs.
    for (lp, target) in [(1.0, -5.0), (-8.0, -5.0), (3.0, 0.0), (-1.0, 0.0), (6.0, -2.0)] {
        let grows = -lp < target;
        let mut t = TemperatureState::new(0.1, 1e-3).unwrap();
        let before = t.log_alpha;
        temperature_update(&mut t, &Array1::from_elem(4, lp), target);
        if (t.log_alpha > before) != grows {
            failures.push(format!("temperature sign at log pi {lp}, target {target}"));
        }
    }

    // Polyak fixed points.
    let online = CriticParams::new(6, 2, &[8, 8], &mut rng).unwrap();
    for tau in [1e-3, 0.005, 0.5, 1.0] {
        let mut t = online.clone();
        polyak_update(&mut t, &online, tau).unwrap();
        if t != online {
            failures.push(format!("polyak moved a fixed point at tau {tau}"));
        }
    }

    // Monotone oracle bids.
    let s = AuctionSettings::split_award(3, 0.2);
    let bids: Vec<f64> = (0..1000).map(|i| first_round_split_bid(1.0 + i as f64 / 999.0, &s)).collect();
    if !bids.windows(2).all(|w| w[1] >= w[0] - 1e-12) {
        failures.push("first-round split bid not monotone".into());
    }

    check(
        "invariant sweeps",
        failures.is_empty(),
        format!(
            "2000 sequential episodes, density mass, temperature signs, polyak fixed points, oracle monotonicity: {} failures{}",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    );
}
