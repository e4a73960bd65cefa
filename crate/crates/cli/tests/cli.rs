use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bidlearn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bidlearn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn tiny_config(dir: &Path, id: &str) -> String {
    let path = dir.join("tiny.toml");
    let text = format!(
        "[experiment]\nid = \"{id}\"\npreset = \"desk\"\ncheckpoint_every = 0\n\
         [train]\nepochs = 2\nepisodes_per_epoch = 8\nupdate_steps_per_epoch = 2\nbatch_size = 16\n\
         policy_hidden = [8]\ncritic_hidden = [8]\n\
         [eval]\nn_profiles = 200\ngrid_size = 11\nlater_round_samples = 20\nsurface_size = 5\n"
    );
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn unknown_experiment_is_a_usage_error() {
    let out = bidlearn(&["run", "Seq9XP", "--preset", "desk"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Seq9XP"));
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(bidlearn(&["run"]).status.code(), Some(2));
    assert_eq!(bidlearn(&["run", "Seq1SP2", "--scale", "-1"]).status.code(), Some(2));
    assert_eq!(bidlearn(&["print-config", "Seq1SP2", "--preset", "huge"]).status.code(), Some(2));
}

#[test]
fn print_config_flags_extensions() {
    let out = bidlearn(&["print-config", "SplitTruthful2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("target_entropy = -20.0 # paper"), "{text}");
    assert!(text.contains("update_steps_per_epoch = 200 # extension"), "{text}");
    let all = bidlearn(&["print-config", "--preset", "desk"]);
    let text = String::from_utf8(all.stdout).unwrap();
    assert_eq!(text.matches("[experiment]").count(), 6);
}

#[test]
fn run_then_eval_twice_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "Seq1FP2");
    let out_dir = dir.path().join("run");
    let out = bidlearn(&["run", "Seq1FP2", "--config", &cfg, "--seed", "3", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(out_dir.join("eval_report.txt")).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), report);

    let ckpt = out_dir.join("checkpoints/final.ckpt");
    let args = ["eval", ckpt.to_str().unwrap(), "--config", &cfg];
    let a = bidlearn(&args);
    let b = bidlearn(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(String::from_utf8(a.stdout).unwrap(), report);
}

#[test]
fn corrupted_checkpoint_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ckpt");
    fs::write(&path, "bidlearn-checkpoint 1\nexperiment Seq1SP2\nepoch x\n").unwrap();
    let out = bidlearn(&["eval", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let missing = bidlearn(&["eval", dir.path().join("nope.ckpt").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(4));
}

#[test]
fn oracle_pseudo_checkpoint_evaluates() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("oracle.ckpt");
    fs::write(
        &path,
        "bidlearn-checkpoint 1\nexperiment Seq1SP2\nepoch 0\npolicy oracle Equilibrium\nend\n",
    )
    .unwrap();
    let out = bidlearn(&["eval", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().contains("optimal_reward = 0.16666"));
}

#[test]
fn reference_tables_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = bidlearn(&["reference-tables", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let values = fs::read_to_string(dir.path().join("optimal_values.tsv")).unwrap();
    assert!(values.contains("SplitTruthful2\t0.9"));
    assert!(dir.path().join("split_quadrature_diagnostic.txt").exists());
}
