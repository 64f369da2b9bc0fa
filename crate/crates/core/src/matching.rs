//! Feature-space correspondences between consecutive scans, and RANSAC
//! outlier rejection.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMatrix;
use crate::knn::KdTree;
use crate::motion::{estimate_rigid_motion, CorrespondenceCloud, MotionError};
use crate::par;
use crate::partition::{ViewLabel, Views};
use crate::types::{Point3, RigidMotion};

/// Relative tolerance on `‖(b−a)×(c−a)‖ / (‖b−a‖·‖c−a‖)` below which a
/// minimal sample counts as collinear.
pub const COLLINEAR_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchingError {
    #[error("no view is populated in both scans")]
    NoCorrespondences,
    #[error("feature dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("RANSAC needs at least {needed} pairs, got {got}")]
    TooFewPairs { needed: usize, got: usize },
    #[error("RANSAC found no hypothesis with at least 3 inliers")]
    RansacFailure,
    #[error("invalid RANSAC configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Motion(#[from] MotionError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    /// Index into the scan-`t` sampled cloud.
    pub source_index: usize,
    /// Index into the scan-`t+1` sampled cloud.
    pub target_index: usize,
    pub feature_distance: f64,
    pub view: ViewLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchOptions {
    /// Keep only pairs that are each other's nearest neighbor.
    pub mutual: bool,
}

fn view_rows(features: &FeatureMatrix, indices: &[usize]) -> KdTree<f32> {
    let mut data = Vec::with_capacity(indices.len() * features.dim());
    for &i in indices {
        data.extend_from_slice(features.row(i));
    }
    KdTree::new(data, features.dim())
}

fn match_one_view(
    label: ViewLabel,
    features_t: &FeatureMatrix,
    src: &[usize],
    features_t1: &FeatureMatrix,
    dst: &[usize],
    opts: &MatchOptions,
) -> Vec<Correspondence> {
    if src.is_empty() || dst.is_empty() {
        return Vec::new();
    }
    let tree = view_rows(features_t1, dst);
    let nearest = par::map_slice(src, |&i| tree.nearest(features_t.row(i)).expect("non-empty tree"));
    let back = opts.mutual.then(|| view_rows(features_t, src));
    src.iter()
        .zip(nearest)
        .filter(|(&i, n)| match &back {
            Some(b) => src[b.nearest(features_t1.row(dst[n.index])).expect("non-empty tree").index] == i,
            None => true,
        })
        .map(|(&i, n)| Correspondence {
            source_index: i,
            target_index: dst[n.index],
            feature_distance: n.distance_squared.sqrt(),
            view: label,
        })
        .collect()
}

/// Nearest neighbor in feature space from every scan-`t` point to the
/// scan-`t+1` points of the same view. Pairs are ordered by view, then by
/// source index.
pub fn match_views(
    features_t: &FeatureMatrix,
    views_t: &Views,
    features_t1: &FeatureMatrix,
    views_t1: &Views,
    opts: &MatchOptions,
) -> Result<Vec<Correspondence>, MatchingError> {
    if features_t.dim() != features_t1.dim() {
        return Err(MatchingError::DimensionMismatch(features_t.dim(), features_t1.dim()));
    }
    if !ViewLabel::ALL
        .iter()
        .any(|&l| !views_t.get(l).is_empty() && !views_t1.get(l).is_empty())
    {
        return Err(MatchingError::NoCorrespondences);
    }
    let per_view = par::map_slice(&ViewLabel::ALL, |&l| {
        match_one_view(l, features_t, views_t.get(l), features_t1, views_t1.get(l), opts)
    });
    Ok(per_view.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacConfig {
    pub enabled: bool,
    pub max_iterations: usize,
    /// Meters.
    pub inlier_threshold: f64,
    pub min_sample: usize,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            max_iterations: 2048,
            inlier_threshold: 0.1,
            min_sample: 3,
            seed: 0,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<(), MatchingError> {
        if self.max_iterations == 0 {
            return Err(MatchingError::InvalidConfig("max_iterations must be >= 1".into()));
        }
        if !(self.inlier_threshold > 0.0 && self.inlier_threshold.is_finite()) {
            return Err(MatchingError::InvalidConfig("inlier_threshold must be > 0".into()));
        }
        if self.min_sample < 3 {
            return Err(MatchingError::InvalidConfig("min_sample must be >= 3".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    pub inliers: Vec<Correspondence>,
    /// Refit on all inliers of the best hypothesis.
    pub motion: RigidMotion,
    /// Mean squared alignment error of `motion` over the inliers.
    pub residual: f64,
    /// Inlier count of every evaluated hypothesis, in sampling order.
    pub hypothesis_inliers: Vec<usize>,
    pub best_iteration: usize,
}

fn collinear(a: &Point3, b: &Point3, c: &Point3) -> bool {
    let u = b.to_vector() - a.to_vector();
    let v = c.to_vector() - a.to_vector();
    let scale = u.norm() * v.norm();
    scale == 0.0 || u.cross(&v).norm() <= COLLINEAR_TOLERANCE * scale
}

fn pair_points(pairs: &[Correspondence], coords_t: &[Point3], coords_t1: &[Point3]) -> (Vec<Point3>, Vec<Point3>) {
    pairs
        .iter()
        .map(|c| (coords_t[c.source_index], coords_t1[c.target_index]))
        .unzip()
}

fn inlier_mask(motion: &RigidMotion, xs: &[Point3], ys: &[Point3], threshold: f64) -> Vec<bool> {
    let t2 = threshold * threshold;
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (motion.apply_vector(&x.to_vector()) - y.to_vector()).norm_squared() <= t2)
        .collect()
}

/// Draws the minimal samples up front from one seeded stream so that the
/// hypotheses do not depend on evaluation order. Collinear samples are
/// skipped, up to `10 × max_iterations` draws in total.
fn draw_samples(xs: &[Point3], ys: &[Point3], cfg: &RansacConfig) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.max_iterations);
    for _ in 0..cfg.max_iterations.saturating_mul(10) {
        if out.len() == cfg.max_iterations {
            break;
        }
        let s = index::sample(&mut rng, xs.len(), cfg.min_sample).into_vec();
        let degenerate = collinear(&xs[s[0]], &xs[s[1]], &xs[s[2]]) || collinear(&ys[s[0]], &ys[s[1]], &ys[s[2]]);
        if !degenerate {
            out.push(s);
        }
    }
    out
}

/// Robust rigid motion from putative pairs. The best hypothesis is the one
/// with most inliers, earliest sample on ties.
pub fn ransac_filter(
    pairs: &[Correspondence],
    coords_t: &[Point3],
    coords_t1: &[Point3],
    cfg: &RansacConfig,
) -> Result<RansacResult, MatchingError> {
    cfg.validate()?;
    if pairs.len() < cfg.min_sample {
        return Err(MatchingError::TooFewPairs {
            needed: cfg.min_sample,
            got: pairs.len(),
        });
    }
    let (xs, ys) = pair_points(pairs, coords_t, coords_t1);
    let samples = draw_samples(&xs, &ys, cfg);
    let counts = par::map_slice(&samples, |s| {
        let sx: Vec<Point3> = s.iter().map(|&i| xs[i]).collect();
        let sy: Vec<Point3> = s.iter().map(|&i| ys[i]).collect();
        let c = CorrespondenceCloud::new(&sx, &sy).expect("sample size >= 3");
        match estimate_rigid_motion(&c) {
            Ok(est) => inlier_mask(&est.motion, &xs, &ys, cfg.inlier_threshold)
                .iter()
                .filter(|&&b| b)
                .count(),
            Err(_) => 0,
        }
    });
    let (best_iteration, &best_count) = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .ok_or(MatchingError::RansacFailure)?;
    if best_count < 3 {
        return Err(MatchingError::RansacFailure);
    }

    let s = &samples[best_iteration];
    let sx: Vec<Point3> = s.iter().map(|&i| xs[i]).collect();
    let sy: Vec<Point3> = s.iter().map(|&i| ys[i]).collect();
    let hypothesis = estimate_rigid_motion(&CorrespondenceCloud::new(&sx, &sy)?)?.motion;
    let mask = inlier_mask(&hypothesis, &xs, &ys, cfg.inlier_threshold);
    let keep: Vec<usize> = (0..pairs.len()).filter(|&i| mask[i]).collect();
    let ix: Vec<Point3> = keep.iter().map(|&i| xs[i]).collect();
    let iy: Vec<Point3> = keep.iter().map(|&i| ys[i]).collect();
    let refit = estimate_rigid_motion(&CorrespondenceCloud::new(&ix, &iy)?).map(|e| e.motion);
    let motion = match refit {
        Ok(m) => m,
        Err(e) => {
            log::warn!("RANSAC refit failed ({e}); keeping the minimal-sample hypothesis");
            hypothesis
        }
    };
    let residual = crate::motion::alignment_error(&CorrespondenceCloud::new(&ix, &iy)?, &motion);
    Ok(RansacResult {
        inliers: keep.iter().map(|&i| pairs[i]).collect(),
        motion,
        residual,
        hypothesis_inliers: counts,
        best_iteration,
    })
}
