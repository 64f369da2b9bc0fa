//! File-level commands behind the CLI: train, odometry, eval, ablate, synth.
//! Every output directory records the config, seed and model hash it was
//! produced with.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::evaluate::{csv_report, evaluate, EvalError, OdometryErrors};
use crate::features::{read_model, write_model, FeatureError, SaabModel};
use crate::io::{read_pose_file, write_trajectory, write_trajectory_csv, IoError, ScanSequence};
use crate::pipeline::{run_odometry, stride_indices, train_model, OdometryRun, PipelineError};
use crate::sampling::SamplingStrategy;
use crate::synth::{generate, write_kitti, SceneSpec};
use crate::types::{PointCloud, Trajectory};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0} is required")]
    Missing(&'static str),
    #[error("no training scans found in sequences {0:?}")]
    NoTrainingScans(Vec<String>),
    #[error("sequence {0} has no ground truth")]
    NoGroundTruth(String),
    #[error("file operation on {path} failed: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::File {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), RunError> {
    fs::write(path, contents).map_err(file_err(path))
}

fn create_dir(path: &Path) -> Result<(), RunError> {
    fs::create_dir_all(path).map_err(file_err(path))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn data_root(cfg: &RunConfig) -> Result<&Path, RunError> {
    cfg.paths.data_root.as_deref().ok_or(RunError::Missing("data root"))
}

/// Loads the training scans at a uniform stride over the concatenation of
/// the training sequences.
pub fn load_training_scans(cfg: &RunConfig) -> Result<Vec<PointCloud>, RunError> {
    let root = data_root(cfg)?;
    let mut all = Vec::new();
    for id in &cfg.train.sequences {
        let seq = ScanSequence::open(root, id, cfg.run.axis_mapping)?;
        all.extend(seq.scan_paths().iter().cloned());
    }
    if all.is_empty() || cfg.train.scans == 0 {
        return Err(RunError::NoTrainingScans(cfg.train.sequences.clone()));
    }
    stride_indices(all.len(), cfg.train.scans)
        .into_iter()
        .map(|i| Ok(crate::io::read_velodyne_scan(&all[i], &cfg.run.axis_mapping)?))
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: SaabModel,
    pub path: PathBuf,
    pub bytes: usize,
    pub sha256: String,
}

/// Writes `bytes` to `path` through a temporary sibling and a rename, so an
/// interrupted write never leaves a partial file under the final name.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    let tmp = path.with_extension("tmp");
    write_file(&tmp, bytes)?;
    fs::rename(&tmp, path).map_err(file_err(path))
}

pub fn config_snapshot_path(model: &Path) -> PathBuf {
    let mut name = model.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".config.toml");
    model.with_file_name(name)
}

pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutput, RunError> {
    let cfg = cfg.clone().resolved();
    cfg.validate()?;
    let path = cfg.paths.model.clone().ok_or(RunError::Missing("model path"))?;
    let scans = load_training_scans(&cfg)?;
    log::info!("training on {} scans", scans.len());
    let model = train_model(&scans, &cfg)?;
    let bytes = write_model(&model);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_atomic(&path, &bytes)?;
    write_file(&config_snapshot_path(&path), cfg.to_toml()?)?;
    Ok(TrainOutput {
        model,
        path,
        bytes: bytes.len(),
        sha256: sha256_hex(&bytes),
    })
}

pub fn load_model(path: &Path) -> Result<(SaabModel, String), RunError> {
    let bytes = fs::read(path).map_err(file_err(path))?;
    Ok((read_model(&bytes)?, sha256_hex(&bytes)))
}

#[derive(Debug, Clone)]
pub struct SequenceOutput {
    pub id: String,
    pub dir: PathBuf,
    pub run: OdometryRun,
    pub ground_truth: Option<Trajectory>,
    pub errors: Option<OdometryErrors>,
}

fn metadata_toml(cfg: &RunConfig, model_path: &Path, model_hash: &str, seq: &ScanSequence) -> String {
    let gt_frame = if seq.calibration().is_some() {
        "camera poses converted with calib.txt and the axis mapping"
    } else {
        "poses assumed in the sensor frame (no calib.txt)"
    };
    format!(
        "seed = {}\nmodel = {:?}\nmodel_sha256 = \"{model_hash}\"\nsequence = \"{}\"\nscans = {}\n\
         pose_frame = \"pipeline frame: axis mapping {} applied to sensor coordinates\"\n\
         ground_truth_frame = \"{gt_frame}\"\n",
        cfg.run.seed,
        model_path.display().to_string(),
        seq.id,
        seq.len(),
        cfg.run.axis_mapping,
    )
}

/// Runs odometry on one opened sequence and writes its outputs under `dir`.
pub fn odometry_sequence(
    cfg: &RunConfig,
    model: &SaabModel,
    model_path: &Path,
    model_hash: &str,
    seq: &ScanSequence,
    dir: &Path,
) -> Result<SequenceOutput, RunError> {
    create_dir(dir)?;
    let run = run_odometry(seq.len(), |i| seq.read_scan(i).map_err(|e| e.to_string()), model, cfg);
    if run.trajectory.is_empty() {
        return Err(RunError::Io(IoError::EmptyTrajectory));
    }
    write_trajectory(&run.trajectory, &dir.join(format!("{}.txt", seq.id)))?;
    write_trajectory_csv(&run.trajectory, &dir.join("trajectory.csv"))?;
    write_file(&dir.join("frames.csv"), run.frames_csv())?;
    write_file(&dir.join("config.toml"), cfg.to_toml()?)?;
    write_file(&dir.join("metadata.toml"), metadata_toml(cfg, model_path, model_hash, seq))?;
    let ground_truth = seq.ground_truth();
    let errors = match &ground_truth {
        Some(gt) => {
            write_trajectory(gt, &dir.join("gt_pipeline.txt"))?;
            let e = evaluate(&run.trajectory, gt)?;
            write_file(&dir.join("metrics.csv"), csv_report(&[(seq.id.clone(), e)]))?;
            Some(e)
        }
        None => None,
    };
    if run.fallback_count() > 0 {
        log::warn!("sequence {}: {} frames fell back to identity", seq.id, run.fallback_count());
    }
    Ok(SequenceOutput {
        id: seq.id.clone(),
        dir: dir.to_path_buf(),
        run,
        ground_truth,
        errors,
    })
}

pub fn cmd_odometry(cfg: &RunConfig) -> Result<Vec<SequenceOutput>, RunError> {
    let cfg = cfg.clone().resolved();
    cfg.validate()?;
    let root = data_root(&cfg)?;
    let model_path = cfg.paths.model.clone().ok_or(RunError::Missing("model path"))?;
    let out = cfg.paths.out.clone().ok_or(RunError::Missing("output directory"))?;
    let (model, hash) = load_model(&model_path)?;
    let mut results = Vec::new();
    for id in &cfg.odometry.sequences {
        let seq = ScanSequence::open(root, id, cfg.run.axis_mapping)?;
        log::info!("sequence {id}: {} scans", seq.len());
        results.push(odometry_sequence(&cfg, &model, &model_path, &hash, &seq, &out.join(id))?);
    }
    Ok(results)
}

/// Scores a predicted KITTI pose file against a ground-truth pose file
/// already in the same frame.
pub fn cmd_eval(pred: &Path, gt: &Path) -> Result<OdometryErrors, RunError> {
    let p = read_pose_file(pred)?;
    let g = read_pose_file(gt)?;
    Ok(evaluate(&p, &g)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub strategy: SamplingStrategy,
    pub points: usize,
    pub views: bool,
    pub eigen_features: bool,
    /// Per sequence.
    pub errors: Vec<(String, OdometryErrors)>,
}

impl AblationRow {
    /// Mean over sequences of the KITTI translation error, or of the final
    /// drift when the paths are too short for the KITTI metric.
    pub fn translation_error(&self) -> f64 {
        let vals: Vec<f64> = self
            .errors
            .iter()
            .map(|(_, e)| e.kitti_translation_pct.unwrap_or(e.final_drift_pct))
            .collect();
        vals.iter().sum::<f64>() / vals.len().max(1) as f64
    }

    pub fn rotation_error(&self) -> f64 {
        let vals: Vec<f64> = self
            .errors
            .iter()
            .map(|(_, e)| e.kitti_rotation_deg_per_m.unwrap_or(e.rel_rotation_rmse.to_degrees()))
            .collect();
        vals.iter().sum::<f64>() / vals.len().max(1) as f64
    }
}

pub const ABLATION_CSV_HEADER: &str = "strategy,points,views,eigen_features,translation_error,rotation_error";

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = String::from(ABLATION_CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{:.6},{:.6}\n",
            r.strategy,
            r.points,
            r.views as u8,
            r.eigen_features as u8,
            r.translation_error(),
            r.rotation_error()
        ));
    }
    s
}

/// The grid: every strategy × point count with both toggles on, then the
/// view and eigen-feature toggles off for the geometry-aware row at the
/// largest point count.
pub fn ablation_grid(cfg: &RunConfig) -> Vec<RunConfig> {
    let mut out = Vec::new();
    for &strategy in &cfg.ablate.strategies {
        for &points in &cfg.ablate.points {
            let mut c = cfg.clone();
            c.sampling.strategy = strategy;
            c.sampling.target_count = points;
            c.odometry.views = true;
            c.features.eigen_features = true;
            out.push(c);
        }
    }
    if cfg.ablate.toggles {
        let mut base = cfg.clone();
        base.sampling.strategy = SamplingStrategy::Geometry;
        base.sampling.target_count = cfg.ablate.points.iter().copied().max().unwrap_or(cfg.sampling.target_count);
        base.features.eigen_features = true;
        let mut no_views = base.clone();
        no_views.odometry.views = false;
        let mut no_eigen = base;
        no_eigen.odometry.views = true;
        no_eigen.features.eigen_features = false;
        out.push(no_views);
        out.push(no_eigen);
    }
    out
}

/// Runs one ablation configuration on in-memory data: trains on
/// `training`, then runs odometry on each `(id, scans, ground truth)`.
pub fn ablation_row(
    cfg: &RunConfig,
    training: &[PointCloud],
    sequences: &[(String, Vec<PointCloud>, Trajectory)],
) -> Result<AblationRow, RunError> {
    let cfg = cfg.clone().resolved();
    let model = train_model(training, &cfg)?;
    let mut errors = Vec::new();
    for (id, scans, gt) in sequences {
        let run = run_odometry(scans.len(), |i| Ok(scans[i].clone()), &model, &cfg);
        errors.push((id.clone(), evaluate(&run.trajectory, gt)?));
    }
    Ok(AblationRow {
        strategy: cfg.sampling.strategy,
        points: cfg.sampling.target_count,
        views: cfg.odometry.views,
        eigen_features: cfg.features.eigen_features,
        errors,
    })
}

pub fn cmd_ablate(cfg: &RunConfig) -> Result<Vec<AblationRow>, RunError> {
    let cfg = cfg.clone().resolved();
    cfg.validate()?;
    cfg.validate_ablation()?;
    let out = cfg.paths.out.clone().ok_or(RunError::Missing("output directory"))?;
    let root = data_root(&cfg)?.to_path_buf();
    let training = load_training_scans(&cfg)?;
    let mut sequences = Vec::new();
    for id in &cfg.odometry.sequences {
        let seq = ScanSequence::open(&root, id, cfg.run.axis_mapping)?;
        let gt = seq.ground_truth().ok_or_else(|| RunError::NoGroundTruth(id.clone()))?;
        let scans = (0..seq.len()).map(|i| seq.read_scan(i)).collect::<Result<Vec<_>, _>>()?;
        sequences.push((id.clone(), scans, gt));
    }
    let mut rows = Vec::new();
    for c in ablation_grid(&cfg) {
        log::info!(
            "ablation: {} × {} views={} eigen={}",
            c.sampling.strategy,
            c.sampling.target_count,
            c.odometry.views,
            c.features.eigen_features
        );
        rows.push(ablation_row(&c, &training, &sequences)?);
    }
    create_dir(&out)?;
    write_file(&out.join("ablation.csv"), ablation_csv(&rows))?;
    write_file(&out.join("config.toml"), cfg.to_toml()?)?;
    Ok(rows)
}

pub fn cmd_synth(root: &Path, id: &str, spec: &SceneSpec) -> Result<(), RunError> {
    let seq = generate(spec);
    write_kitti(root, id, &seq)?;
    let spec_path = root.join("sequences").join(id).join("scene.toml");
    write_file(&spec_path, toml::to_string_pretty(spec).map_err(ConfigError::from)?)?;
    Ok(())
}
