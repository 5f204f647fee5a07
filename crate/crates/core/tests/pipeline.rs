//! Loop-level contracts: resumption, mode isolation, provenance and the CLI.

use std::path::Path;
use std::process::Command;

use skillforge::evaluator::{EvalReport, EvalSettings};
use skillforge::explorer::{collect_round, RoundConfig};
use skillforge::orchestrator::{
    eval_path, model_path, records_path, run_loop, LoopMode, RunConfig, RunOptions, RunReport,
};
use skillforge::policy::{BobFactory, ScriptedExpertConfig};
use skillforge::store::{file_sha256, read_json};
use skillforge::trainer::LinearSoftmaxModel;

fn tiny(mode: LoopMode) -> RunConfig {
    let mut cfg = RunConfig { iterations: 3, mode, master_seed: 11, ..RunConfig::default() };
    cfg.round.episodes = 6;
    cfg.round.horizon = 40;
    cfg.train.epochs = 3;
    cfg.train.dim = 1 << 12;
    cfg.eval = EvalSettings { ns_trials: 2, ap_trials: 3, ap_horizon: 30 };
    cfg.feedback_rollouts = 3;
    cfg
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let cfg = tiny(LoopMode::Exif);
    let dir = tempfile::tempdir().unwrap();
    let whole = dir.path().join("whole");
    let split = dir.path().join("split");
    run_loop(&cfg, &whole, &RunOptions::default()).unwrap();
    let partial = run_loop(&cfg, &split, &RunOptions { resume: false, stop_after: Some(2) }).unwrap();
    assert!(!partial.complete);
    assert_eq!(partial.iterations.len(), 2);
    let resumed = run_loop(&cfg, &split, &RunOptions { resume: true, stop_after: None }).unwrap();
    assert!(resumed.complete);
    let a = std::fs::read(whole.join("run_report.json")).unwrap();
    let b = std::fs::read(split.join("run_report.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn tampered_checkpoint_artifacts_are_refused() {
    let cfg = tiny(LoopMode::EfNoFeedback);
    let dir = tempfile::tempdir().unwrap();
    run_loop(&cfg, dir.path(), &RunOptions { resume: false, stop_after: Some(1) }).unwrap();
    std::fs::write(model_path(dir.path(), 0), b"not a model").unwrap();
    assert!(run_loop(&cfg, dir.path(), &RunOptions { resume: true, stop_after: None }).is_err());
}

#[test]
fn feedback_is_the_only_difference_between_exif_and_ef() {
    let dir = tempfile::tempdir().unwrap();
    let exif = run_loop(&tiny(LoopMode::Exif), &dir.path().join("exif"), &RunOptions::default()).unwrap();
    let ef = run_loop(&tiny(LoopMode::EfNoFeedback), &dir.path().join("ef"), &RunOptions::default()).unwrap();
    // Same seed schedule, no feedback yet: the first iteration is identical.
    let (x0, e0) = (&exif.iterations[0], &ef.iterations[0]);
    assert_eq!(x0.round_config_hash, e0.round_config_hash);
    assert_eq!(x0.records_sha256, e0.records_sha256);
    assert_eq!(x0.model_sha256, e0.model_sha256);
    assert_eq!(x0.eval_sha256, e0.eval_sha256);
    assert!(x0.feedback_in.is_none());
    for it in &exif.iterations[1..] {
        assert!(it.feedback_in.is_some());
    }
    assert!(ef.iterations.iter().all(|i| i.feedback_in.is_none() && i.feedback_out.is_none()));
    for (x, e) in exif.iterations.iter().zip(&ef.iterations) {
        assert_eq!(x.round_config_hash, e.round_config_hash);
    }
}

fn check_provenance(root: &Path, report: &RunReport) {
    for it in &report.iterations {
        let k = it.iteration;
        assert_eq!(file_sha256(&records_path(root, k)).unwrap(), it.records_sha256);
        assert_eq!(file_sha256(&model_path(root, k)).unwrap(), it.model_sha256);
        assert_eq!(file_sha256(&eval_path(root, k)).unwrap(), it.eval_sha256);
        let eval: EvalReport = read_json(&eval_path(root, k)).unwrap();
        assert_eq!(eval.ns.ns, it.ns);
        assert_eq!(eval.ap.mean, it.ap_mean);
        let model = LinearSoftmaxModel::load(&model_path(root, k)).unwrap();
        assert_eq!(model.meta.dataset_hash, it.dataset_hash);
    }
}

#[test]
fn every_reported_number_traces_to_an_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_loop(&tiny(LoopMode::Exif), dir.path(), &RunOptions::default()).unwrap();
    check_provenance(dir.path(), &report);
    let stored: RunReport = read_json(&dir.path().join("run_report.json")).unwrap();
    assert_eq!(stored, report);
}

#[test]
fn other_modes_complete() {
    let dir = tempfile::tempdir().unwrap();
    for mode in [LoopMode::PfBaseline, LoopMode::SelfPlay] {
        let mut cfg = tiny(mode);
        cfg.round.episodes = 20;
        let root = dir.path().join(mode.name());
        let report = run_loop(&cfg, &root, &RunOptions::default()).unwrap();
        assert_eq!(report.iterations.len(), 3);
        check_provenance(&root, &report);
    }
}

#[test]
fn zero_bob_at_full_noise_is_uniform_random_exploration() {
    let cfg = RoundConfig { episodes: 5, horizon: 60, base_seed: 77, ..RoundConfig::default() };
    let bob = BobFactory::new(LinearSoftmaxModel::zeros(256), 1.0);
    let random = ScriptedExpertConfig::uniform().with_epsilon(1.0);
    let a = collect_round(&cfg, &bob, None);
    let b = collect_round(&cfg, &random, None);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.steps, y.steps);
        assert_eq!(x.final_obs, y.final_obs);
    }
}

fn cli(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_skillforge"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "iterations = 1\nfeedback_rollouts = 2\n[round]\nepisodes = 4\nhorizon = 30\n[train]\nepochs = 2\ndim = 4096\n[eval]\nns_trials = 1\nap_trials = 2\nap_horizon = 20\n",
    )
    .unwrap();
    let root = dir.path().join("run");
    let (c, r) = (config.to_str().unwrap(), root.to_str().unwrap());
    assert_eq!(cli(&["--config", c, "--root", r, "--seed", "5", "loop"]), 0);
    assert_eq!(cli(&["--config", c, "--root", r, "--seed", "5", "loop"]), 2, "existing run without --resume");
    assert_eq!(cli(&["--config", c, "--root", r, "--seed", "5", "--resume", "loop"]), 0);
    assert_eq!(cli(&["--config", c, "--root", r, "validate"]), 0);
    assert_eq!(cli(&["--root", r, "--mode", "nonsense", "loop"]), 2);
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "iterations = 0\n").unwrap();
    assert_eq!(cli(&["--config", bad.to_str().unwrap(), "loop"]), 2);
    let empty = dir.path().join("empty");
    assert_eq!(cli(&["--config", c, "--root", empty.to_str().unwrap(), "train"]), 3);
}
