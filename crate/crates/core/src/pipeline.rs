//! Scan-to-scan odometry: sample, partition, extract, match, reject
//! outliers, estimate, accumulate.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::config::RunConfig;
use crate::features::{extract_features, train_saab, FeatureError, FeatureMatrix, ModelMetadata, SaabModel};
use crate::matching::{match_views, ransac_filter, MatchingError};
use crate::motion::{accumulate, estimate_rigid_motion, CorrespondenceCloud, MotionError};
use crate::partition::{partition_views, Views};
use crate::sampling::{sample, Sample, SamplingError};
use crate::types::{Point3, PointCloud, RigidMotion, Trajectory};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error("could not load scan {index}: {reason}")]
    Scan { index: usize, reason: String },
    #[error("previous frame could not be prepared")]
    MissingPrevious,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub sampling: Duration,
    pub features: Duration,
    pub matching: Duration,
    pub motion: Duration,
}

/// Everything computed from one scan that matching needs.
#[derive(Debug, Clone)]
pub struct FrameData {
    pub sample: Sample,
    pub views: Views,
    pub features: FeatureMatrix,
}

impl FrameData {
    pub fn points(&self) -> &[Point3] {
        self.sample.cloud.points()
    }
}

/// Samples, partitions and describes one scan. Every frame is sampled with
/// the run seed.
pub fn prepare_frame(cloud: &PointCloud, model: &SaabModel, cfg: &RunConfig, timings: &mut StageTimings) -> Result<FrameData, PipelineError> {
    let t0 = Instant::now();
    let s = sample(cloud, &cfg.sampling)?;
    let views = if cfg.odometry.views {
        partition_views(&s.cloud)
    } else {
        Views::single(s.cloud.len())
    };
    timings.sampling += t0.elapsed();
    let t1 = Instant::now();
    let features = extract_features(&s.cloud, model, &s.eigen, &cfg.features)?;
    timings.features += t1.elapsed();
    Ok(FrameData {
        sample: s,
        views,
        features,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEstimate {
    /// Maps scan-`t` coordinates onto scan-`t+1` coordinates.
    pub alignment: RigidMotion,
    pub residual: f64,
    pub pairs: usize,
    pub inliers: usize,
}

/// Estimates the transform aligning `prev` onto `next`.
pub fn estimate_pair(prev: &FrameData, next: &FrameData, cfg: &RunConfig, frame: usize, timings: &mut StageTimings) -> Result<PairEstimate, PipelineError> {
    let t0 = Instant::now();
    let pairs = match_views(&prev.features, &prev.views, &next.features, &next.views, &cfg.matching)?;
    timings.matching += t0.elapsed();
    let t1 = Instant::now();
    let out = if cfg.ransac.enabled {
        let rc = crate::matching::RansacConfig {
            seed: cfg.ransac.seed.wrapping_add(frame as u64),
            ..cfg.ransac
        };
        let r = ransac_filter(&pairs, prev.points(), next.points(), &rc)?;
        PairEstimate {
            alignment: r.motion,
            residual: r.residual,
            pairs: pairs.len(),
            inliers: r.inliers.len(),
        }
    } else {
        let xs: Vec<Point3> = pairs.iter().map(|c| prev.points()[c.source_index]).collect();
        let ys: Vec<Point3> = pairs.iter().map(|c| next.points()[c.target_index]).collect();
        let est = estimate_rigid_motion(&CorrespondenceCloud::new(&xs, &ys)?)?;
        PairEstimate {
            alignment: est.motion,
            residual: est.residual,
            pairs: pairs.len(),
            inliers: pairs.len(),
        }
    };
    timings.motion += t1.elapsed();
    Ok(out)
}

/// Diagnostics for the step from frame `frame - 1` to `frame`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameReport {
    pub frame: usize,
    pub sampled_points: usize,
    pub pairs: usize,
    pub inliers: usize,
    pub residual: f64,
    /// Identity motion was used because the step failed.
    pub fallback: bool,
    pub error: Option<String>,
    pub timings: StageTimings,
}

pub const FRAME_CSV_HEADER: &str =
    "frame,sampled_points,pairs,inliers,residual,fallback,sampling_ms,features_ms,matching_ms,motion_ms,error";

impl FrameReport {
    pub fn csv_row(&self) -> String {
        let ms = |d: Duration| format!("{:.3}", d.as_secs_f64() * 1e3);
        format!(
            "{},{},{},{},{:.9e},{},{},{},{},{},{}",
            self.frame,
            self.sampled_points,
            self.pairs,
            self.inliers,
            self.residual,
            self.fallback as u8,
            ms(self.timings.sampling),
            ms(self.timings.features),
            ms(self.timings.matching),
            ms(self.timings.motion),
            self.error.as_deref().unwrap_or("").replace([',', '\n'], ";")
        )
    }
}

#[derive(Debug, Clone)]
pub struct OdometryRun {
    pub trajectory: Trajectory,
    pub frames: Vec<FrameReport>,
}

impl OdometryRun {
    pub fn frames_csv(&self) -> String {
        let mut s = String::from(FRAME_CSV_HEADER);
        s.push('\n');
        for f in &self.frames {
            s.push_str(&f.csv_row());
            s.push('\n');
        }
        s
    }

    pub fn fallback_count(&self) -> usize {
        self.frames.iter().filter(|f| f.fallback).count()
    }
}

/// Runs odometry over `count` scans supplied by `load`. A failing step
/// contributes an identity motion, so the trajectory always has `count` poses.
pub fn run_odometry<L>(count: usize, mut load: L, model: &SaabModel, cfg: &RunConfig) -> OdometryRun
where
    L: FnMut(usize) -> Result<PointCloud, String>,
{
    let mut trajectory = Trajectory::new();
    let mut frames = Vec::with_capacity(count.saturating_sub(1));
    if count == 0 {
        return OdometryRun {
            trajectory: Trajectory::from_poses(Vec::new()),
            frames,
        };
    }
    let mut prepare = |index: usize, timings: &mut StageTimings| -> Result<FrameData, PipelineError> {
        let cloud = load(index).map_err(|reason| PipelineError::Scan { index, reason })?;
        prepare_frame(&cloud, model, cfg, timings)
    };
    let mut first_timings = StageTimings::default();
    let mut prev = prepare(0, &mut first_timings);
    if let Err(e) = &prev {
        log::warn!("frame 0: {e}");
    }
    for frame in 1..count {
        let mut timings = StageTimings::default();
        let next = prepare(frame, &mut timings);
        let step = match (&prev, &next) {
            (Ok(p), Ok(n)) => estimate_pair(p, n, cfg, frame, &mut timings),
            (_, Err(e)) => Err(PipelineError::Scan {
                index: frame,
                reason: e.to_string(),
            }),
            (Err(_), _) => Err(PipelineError::MissingPrevious),
        };
        let sampled_points = next.as_ref().map_or(0, |n| n.sample.cloud.len());
        let report = match step {
            Ok(est) => {
                // the ego-motion is the inverse of the scan alignment
                accumulate(&mut trajectory, &est.alignment.inverse());
                FrameReport {
                    frame,
                    sampled_points,
                    pairs: est.pairs,
                    inliers: est.inliers,
                    residual: est.residual,
                    fallback: false,
                    error: None,
                    timings,
                }
            }
            Err(e) => {
                log::warn!("frame {frame}: {e}; using identity motion");
                accumulate(&mut trajectory, &RigidMotion::identity());
                FrameReport {
                    frame,
                    sampled_points,
                    pairs: 0,
                    inliers: 0,
                    residual: f64::NAN,
                    fallback: true,
                    error: Some(e.to_string()),
                    timings,
                }
            }
        };
        log::debug!(
            "frame {frame}: {} pairs, {} inliers, residual {:.4}",
            report.pairs,
            report.inliers,
            report.residual
        );
        frames.push(report);
        prev = next;
    }
    OdometryRun { trajectory, frames }
}

/// `count` indices spread uniformly over `0..total`, first index included.
pub fn stride_indices(total: usize, count: usize) -> Vec<usize> {
    let count = count.min(total);
    (0..count).map(|i| i * total / count).collect()
}

/// Samples each training scan with the run's sampling config and trains the
/// Saab model.
pub fn train_model(scans: &[PointCloud], cfg: &RunConfig) -> Result<SaabModel, PipelineError> {
    let sampled: Vec<Result<Sample, SamplingError>> = crate::par::map_slice(scans, |c| sample(c, &cfg.sampling));
    let mut clouds = Vec::with_capacity(sampled.len());
    for (i, s) in sampled.into_iter().enumerate() {
        match s {
            Ok(s) => clouds.push(s.cloud),
            Err(e) => log::warn!("training scan {i} skipped: {e}"),
        }
    }
    let meta = ModelMetadata {
        training_scans: clouds.len() as u32,
        seed: cfg.run.seed,
    };
    Ok(train_saab(&clouds, &cfg.saab, meta)?)
}
