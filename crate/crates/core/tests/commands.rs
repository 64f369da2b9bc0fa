mod common;

use std::fs;
use std::path::{Path, PathBuf};

use greenpco::config::RunConfig;
use greenpco::io::read_pose_file;
use greenpco::run::{cmd_ablate, cmd_eval, cmd_odometry, cmd_synth, cmd_train, config_snapshot_path, RunError};
use greenpco::synth::SceneSpec;
use tempfile::TempDir;

fn config(root: &Path, train: &[&str], odometry: &[&str]) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.paths.data_root = Some(root.to_path_buf());
    cfg.paths.model = Some(root.join("model.bin"));
    cfg.paths.out = Some(root.join("out"));
    cfg.train.sequences = train.iter().map(|s| s.to_string()).collect();
    cfg.train.scans = 3;
    cfg.odometry.sequences = odometry.iter().map(|s| s.to_string()).collect();
    cfg
}

fn static_spec(frames: usize) -> SceneSpec {
    SceneSpec {
        frames,
        noise_sigma: 0.0,
        dropout: 0.0,
        shuffle: false,
        step_m: 0.0,
        yaw_deg: 0.0,
        pitch_deg: 0.0,
        ..Default::default()
    }
}

/// A dataset with a moving sequence "00" of `frames` scans.
fn dataset(frames: usize) -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let root = dir.path().to_path_buf();
    cmd_synth(&root, "00", &common::small_scene(frames, 5)).unwrap();
    (dir, root)
}

#[test]
fn training_is_bit_reproducible() {
    let (_d, root) = dataset(6);
    let mut cfg = config(&root, &["00"], &[]);
    let a = cmd_train(&cfg).unwrap();
    let first = fs::read(&a.path).unwrap();
    cfg.paths.model = Some(root.join("again.bin"));
    let b = cmd_train(&cfg).unwrap();
    assert_eq!(first, fs::read(&b.path).unwrap());
    assert_eq!(a.sha256, b.sha256);
    assert!(a.bytes <= 100 * 1024);
    assert!(config_snapshot_path(&a.path).exists());
    assert_eq!(a.model.metadata().training_scans, 3);
}

#[test]
fn no_scans_means_no_model() {
    let dir = TempDir::new().unwrap();
    let root = dir.path();
    fs::create_dir_all(root.join("sequences/07/velodyne")).unwrap();
    let cfg = config(root, &["07"], &[]);
    assert!(matches!(cmd_train(&cfg), Err(RunError::NoTrainingScans(_))));
    assert!(!root.join("model.bin").exists());
    assert!(!root.join("model.tmp").exists());

    let missing = config(root, &["08"], &[]);
    assert!(cmd_train(&missing).is_err());
    assert!(!root.join("model.bin").exists());
}

#[test]
fn identical_scans_give_identity() {
    let (_d, root) = dataset(4);
    cmd_synth(&root, "01", &static_spec(2)).unwrap();
    let cfg = config(&root, &["00"], &["01"]);
    cmd_train(&cfg).unwrap();
    let out = cmd_odometry(&cfg).unwrap();
    let traj = &out[0].run.trajectory;
    assert_eq!(traj.len(), 2);
    let rel = traj.poses()[0].relative_to(&traj.poses()[1]);
    assert!(rel.rotation_angle() <= 1e-6);
    assert!(rel.translation().norm() <= 1e-6);
    assert_eq!(out[0].run.fallback_count(), 0);
}

#[test]
fn odometry_outputs_are_complete_and_reproducible() {
    let (_d, root) = dataset(50);
    let cfg = config(&root, &["00"], &["00"]);
    let model = cmd_train(&cfg).unwrap();
    let out = cmd_odometry(&cfg).unwrap();
    let dir = &out[0].dir;
    let pred = dir.join("00.txt");
    assert_eq!(read_pose_file(&pred).unwrap().len(), 50);
    for f in ["trajectory.csv", "frames.csv", "config.toml", "metadata.toml", "gt_pipeline.txt", "metrics.csv"] {
        assert!(dir.join(f).exists(), "{f} missing");
    }
    let frames = fs::read_to_string(dir.join("frames.csv")).unwrap();
    assert_eq!(frames.lines().count(), 1 + 49);
    let meta = fs::read_to_string(dir.join("metadata.toml")).unwrap();
    assert!(meta.contains(&model.sha256) && meta.contains("seed = "));

    // rerun from the snapshot written into the output directory
    let mut again = RunConfig::load(&dir.join("config.toml")).unwrap();
    again.paths.out = Some(root.join("rerun"));
    cmd_odometry(&again).unwrap();
    assert_eq!(fs::read(&pred).unwrap(), fs::read(root.join("rerun/00/00.txt")).unwrap());

    let gt = dir.join("gt_pipeline.txt");
    let e = cmd_eval(&gt, &gt).unwrap();
    assert_eq!(e.rel_translation_rmse, 0.0);
    assert_eq!(e.rel_rotation_rmse, 0.0);
    assert_eq!(e.final_drift_pct, 0.0);
}

#[test]
fn static_synth_scans_are_identical() {
    let dir = TempDir::new().unwrap();
    cmd_synth(dir.path(), "03", &static_spec(4)).unwrap();
    let v = dir.path().join("sequences/03/velodyne");
    let first = fs::read(v.join("000000.bin")).unwrap();
    for i in 1..4 {
        assert_eq!(first, fs::read(v.join(format!("{i:06}.bin"))).unwrap());
    }
    assert!(dir.path().join("sequences/03/scene.toml").exists());
}

#[test]
fn ablation_grid_rows() {
    let (_d, root) = dataset(3);
    let mut cfg = config(&root, &["00"], &["00"]);
    cfg.train.scans = 2;
    cfg.ablate.points = vec![128, 256, 512];
    let rows = cmd_ablate(&cfg).unwrap();
    assert_eq!(rows.len(), 3 * 3 + 2);
    assert!(rows[9..].iter().all(|r| r.points == 512));
    assert!(!rows[9].views && rows[10].views && !rows[10].eigen_features);
    let csv = fs::read_to_string(root.join("out/ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);
}

#[test]
fn bad_grid_is_rejected_before_running() {
    let (_d, root) = dataset(3);
    let mut cfg = config(&root, &["00"], &["00"]);
    cfg.ablate.points = vec![512, 2];
    assert!(cmd_ablate(&cfg).is_err());
    assert!(!root.join("out").exists());
}
