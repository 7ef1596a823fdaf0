//! End-to-end runs of the experiment commands on small budgets.

use std::path::{Path, PathBuf};

use dronefleet::controllers::ControllerKind;
use dronefleet::experiment::{
    cmd_compare, cmd_eval, cmd_sweep, cmd_train, DistrictSource, ExperimentConfig, PATTERNS,
};
use dronefleet::geography::District;
use dronefleet::rlagent::{Checkpoint, LAYER_SIZES};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn quick(pattern: &str, out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(pattern).unwrap();
    cfg.seeds = vec![1];
    cfg.train.episodes = 2;
    cfg.train.max_steps = 40;
    cfg.train.learning_starts = 30;
    cfg.horizon = 1200;
    cfg.warmup = 60;
    cfg.output_dir = out.to_path_buf();
    cfg
}

#[test]
fn bundled_configs_match_presets() {
    let district = District::load(&configs_dir().join("district.json")).unwrap();
    assert_eq!(district, District::synthetic());
    for p in PATTERNS {
        let cfg = ExperimentConfig::load(&configs_dir().join(format!("{p}.json"))).unwrap();
        let preset = ExperimentConfig::preset(p).unwrap();
        assert!(matches!(cfg.district, DistrictSource::Path(_)));
        assert_eq!(cfg.scenario().unwrap(), preset.scenario().unwrap());
        assert_eq!(cfg.train, preset.train);
    }
}

#[test]
fn smallest_training_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick("bernoulli", dir.path());
    cfg.train.episodes = 1;
    let runs = cmd_train(&cfg).unwrap();
    assert_eq!(runs.len(), 1);
    for d in 1..=4 {
        let path = dir.path().join(format!("seed_1/pdc_{d}.json"));
        let ckpt = Checkpoint::load(&path).unwrap();
        assert_eq!(ckpt.layer_sizes, LAYER_SIZES.to_vec());
        assert_eq!(ckpt.pdc, d);
    }
    let curve = std::fs::read_to_string(dir.path().join("seed_1/curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 2);
    assert!(curve.starts_with("episode,steps,mean_reward"));
    // the run directory holds a config that reproduces the run on its own
    let saved = ExperimentConfig::load(&dir.path().join("seed_1/config.json")).unwrap();
    assert!(matches!(saved.district, DistrictSource::Inline(_)));
    assert_eq!(saved.initial_allocation, Some(vec![12, 11, 17, 20]));
}

#[test]
fn multi_seed_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick("tvb", dir.path());
    cfg.seeds = vec![1, 2, 3];
    cmd_train(&cfg).unwrap();
    for s in 1..=3 {
        assert!(dir.path().join(format!("seed_{s}/curve.csv")).exists());
    }
    let summary = std::fs::read_to_string(dir.path().join("curve_summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(
        lines.next().unwrap(),
        "episode,seeds,reward_mean,reward_stderr,uavs_mean,uavs_stderr,p_max_mean,p_max_stderr"
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn eval_of_trained_checkpoints_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick("mmb", &dir.path().join("train"));
    cmd_train(&cfg).unwrap();
    let eval = ExperimentConfig {
        controller: ControllerKind::Rl,
        checkpoints: Some(dir.path().join("train")),
        output_dir: dir.path().join("eval"),
        ..cfg
    };
    let a = cmd_eval(&eval).unwrap();
    let b = cmd_eval(&eval).unwrap();
    assert_eq!(a, b);
    assert!(dir.path().join("eval/report.json").exists());
    let rows = std::fs::read_to_string(dir.path().join("eval/eval.csv")).unwrap();
    assert!(rows.lines().nth(1).unwrap().starts_with("rl,mmb,1,"));
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        controller: ControllerKind::Static,
        seeds: vec![1, 2],
        ..quick("bernoulli", dir.path())
    };
    let points = cmd_sweep(&cfg, &[30, 45, 60]).unwrap();
    assert_eq!(points.len(), 6);
    for p in &points {
        assert_eq!(p.report.n_mean, p.total_uavs as f64);
    }
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn compare_subset_and_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let base = quick("bernoulli", &dir.path().join("cmp"));
    let rows = cmd_compare(&base, &[ControllerKind::Static], &["bernoulli".into()]).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].metrics[5], 60.0);

    let ckpts = dir.path().join("ckpt");
    for p in PATTERNS {
        cmd_train(&quick(p, &ckpts.join(p))).unwrap();
    }
    let cfg = ExperimentConfig {
        checkpoints: Some(ckpts),
        ..base
    };
    let patterns: Vec<String> = PATTERNS.iter().map(|s| s.to_string()).collect();
    let rows = cmd_compare(&cfg, &ControllerKind::ALL, &patterns).unwrap();
    assert_eq!(rows.len(), 12);
    let csv = std::fs::read_to_string(dir.path().join("cmp/compare.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "algorithm,pattern,p_max,q_mean,w_mean,sigma_w,sigma_q,n_mean"
    );
    assert_eq!(csv.lines().count(), 13);
}

#[test]
fn checkpoint_shape_mismatch_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick("bernoulli", &dir.path().join("train"));
    cmd_train(&cfg).unwrap();
    let path = dir.path().join("train/seed_1/pdc_2.json");
    let mut ckpt = Checkpoint::load(&path).unwrap();
    ckpt.layers.pop();
    ckpt.layer_sizes.pop();
    ckpt.save(&path).unwrap();
    let eval = ExperimentConfig {
        controller: ControllerKind::Rl,
        checkpoints: Some(dir.path().join("train")),
        output_dir: dir.path().join("eval"),
        ..cfg
    };
    assert_eq!(cmd_eval(&eval).unwrap_err().exit_code(), 3);
}
