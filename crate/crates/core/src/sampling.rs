//! Local-PCA eigen-features and point sampling.
//!
//! Geometry-aware sampling keeps points whose neighborhood is neither linear
//! nor planar and has high eigen-entropy, then reduces the survivors to a
//! fixed budget by seeded uniform sampling. Random and farthest-point
//! sampling are provided as ablation baselines.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knn::{cloud_tree, KdTree};
use crate::par;
use crate::types::PointCloud;

/// Neighborhoods whose covariance trace is at or below this are degenerate.
pub const DEGENERATE_TRACE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("neighborhood of point {index} is degenerate (all neighbors coincide)")]
    DegenerateNeighborhood { index: usize },
    #[error("no point passed the eigen-feature thresholds")]
    EmptySelection,
    #[error("requested {requested} points from a cloud of {available}")]
    InsufficientPoints { requested: usize, available: usize },
    #[error("invalid sampling config: {0}")]
    InvalidConfig(String),
}

/// Normalized local-PCA eigenvalues and the three descriptors derived from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenFeatures {
    pub linearity: f64,
    pub planarity: f64,
    pub eigen_entropy: f64,
    /// `λ1 ≥ λ2 ≥ λ3 ≥ 0`, summing to one.
    pub lambdas: [f64; 3],
}

impl EigenFeatures {
    /// Stand-in for points whose neighborhood collapsed to a single location.
    pub const DEGENERATE: EigenFeatures = EigenFeatures {
        linearity: 1.0,
        planarity: 0.0,
        eigen_entropy: 0.0,
        lambdas: [1.0, 0.0, 0.0],
    };

    /// Descriptors from raw (unnormalized, unsorted) covariance eigenvalues.
    pub fn from_eigenvalues(raw: [f64; 3]) -> Self {
        let mut l = raw.map(|v| v.max(0.0));
        l.sort_by(|a, b| b.total_cmp(a));
        let sum: f64 = l.iter().sum();
        let l = l.map(|v| v / sum);
        let entropy = l.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum();
        EigenFeatures {
            linearity: (l[0] - l[1]) / l[0],
            planarity: (l[1] - l[2]) / l[0],
            eigen_entropy: entropy,
            lambdas: l,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.linearity, self.planarity, self.eigen_entropy]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SamplingStrategy {
    #[default]
    #[serde(alias = "geometry-aware")]
    Geometry,
    Random,
    #[serde(alias = "farthest")]
    Fps,
}

impl std::str::FromStr for SamplingStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "geometry" | "geometry-aware" => Ok(Self::Geometry),
            "random" => Ok(Self::Random),
            "fps" | "farthest" => Ok(Self::Fps),
            _ => Err(format!("unknown sampling strategy '{s}' (geometry|random|fps)")),
        }
    }
}

impl std::fmt::Display for SamplingStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Geometry => "geometry",
            Self::Random => "random",
            Self::Fps => "fps",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub k_neighbors: usize,
    pub linearity_max: f64,
    pub planarity_max: f64,
    pub entropy_min: f64,
    pub target_count: usize,
    pub strategy: SamplingStrategy,
    pub rng_seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 48,
            linearity_max: 0.7,
            planarity_max: 0.7,
            entropy_min: 0.8,
            target_count: 2048,
            strategy: SamplingStrategy::Geometry,
            rng_seed: 0,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<(), SamplingError> {
        let bad = |m: String| Err(SamplingError::InvalidConfig(m));
        if self.k_neighbors < 3 {
            return bad(format!("k_neighbors {} < 3", self.k_neighbors));
        }
        if self.target_count < 3 {
            return bad(format!("target_count {} < 3", self.target_count));
        }
        for (name, v) in [("linearity_max", self.linearity_max), ("planarity_max", self.planarity_max)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} {v} outside [0, 1]"));
            }
        }
        if !(0.0..=3f64.ln()).contains(&self.entropy_min) {
            return bad(format!("entropy_min {} outside [0, ln 3]", self.entropy_min));
        }
        Ok(())
    }

    fn passes(&self, f: &EigenFeatures) -> bool {
        f.linearity < self.linearity_max && f.planarity < self.planarity_max && f.eigen_entropy > self.entropy_min
    }
}

/// Eigen-features of `index` from its `neighbors` (which include the point itself).
pub fn eigen_features_of(cloud: &PointCloud, index: usize, neighbors: &[usize]) -> Result<EigenFeatures, SamplingError> {
    let n = neighbors.len() as f64;
    let mut mean = Vector3::zeros();
    for &j in neighbors {
        mean += cloud.point(j).to_vector();
    }
    mean /= n;
    let mut cov = Matrix3::zeros();
    for &j in neighbors {
        let d = cloud.point(j).to_vector() - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    if cov.trace() <= DEGENERATE_TRACE {
        return Err(SamplingError::DegenerateNeighborhood { index });
    }
    let eig = SymmetricEigen::new(cov);
    let v = eig.eigenvalues;
    Ok(EigenFeatures::from_eigenvalues([v[0], v[1], v[2]]))
}

fn neighbor_indices(tree: &KdTree<f64>, cloud: &PointCloud, index: usize, k: usize) -> Vec<usize> {
    tree.knn(&cloud.point(index).as_array(), k).into_iter().map(|n| n.index).collect()
}

/// Eigen-features of one point from its `k` nearest neighbors (itself included).
pub fn eigen_features(cloud: &PointCloud, index: usize, k: usize) -> Result<EigenFeatures, SamplingError> {
    check_k(cloud, k)?;
    let tree = cloud_tree(cloud.points());
    eigen_features_of(cloud, index, &neighbor_indices(&tree, cloud, index, k))
}

fn check_k(cloud: &PointCloud, k: usize) -> Result<(), SamplingError> {
    if k < 3 {
        return Err(SamplingError::InvalidConfig(format!("k {k} < 3")));
    }
    if cloud.len() < k {
        return Err(SamplingError::InsufficientPoints {
            requested: k,
            available: cloud.len(),
        });
    }
    Ok(())
}

/// Eigen-features for the listed points of `cloud`, with neighborhoods taken
/// from the whole cloud. `None` marks a degenerate neighborhood.
pub fn eigen_features_for(cloud: &PointCloud, indices: &[usize], k: usize) -> Result<Vec<Option<EigenFeatures>>, SamplingError> {
    check_k(cloud, k)?;
    let tree = cloud_tree(cloud.points());
    Ok(par::map_slice(indices, |&i| {
        eigen_features_of(cloud, i, &neighbor_indices(&tree, cloud, i, k)).ok()
    }))
}

/// Eigen-features for every point of `cloud`.
pub fn all_eigen_features(cloud: &PointCloud, k: usize) -> Result<Vec<Option<EigenFeatures>>, SamplingError> {
    let all: Vec<usize> = (0..cloud.len()).collect();
    eigen_features_for(cloud, &all, k)
}

/// A sampled sub-cloud together with where its points came from.
#[derive(Debug, Clone)]
pub struct Sample {
    pub cloud: PointCloud,
    /// Index of every sampled point in the input cloud.
    pub indices: Vec<usize>,
    /// Eigen-features of every sampled point, computed on the input cloud.
    pub eigen: Vec<EigenFeatures>,
}

/// Keeps points with linearity and planarity strictly below their maxima and
/// entropy strictly above its minimum; reduces survivors to `target_count`
/// by seeded uniform sampling.
pub fn geometry_aware_sample(cloud: &PointCloud, cfg: &SamplingConfig) -> Result<Sample, SamplingError> {
    cfg.validate()?;
    let features = all_eigen_features(cloud, cfg.k_neighbors)?;
    let survivors: Vec<usize> = features
        .iter()
        .enumerate()
        .filter_map(|(i, f)| f.filter(|f| cfg.passes(f)).map(|_| i))
        .collect();
    if survivors.is_empty() {
        return Err(SamplingError::EmptySelection);
    }
    let indices = if survivors.len() > cfg.target_count {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        let mut picked: Vec<usize> = index::sample(&mut rng, survivors.len(), cfg.target_count)
            .into_iter()
            .map(|i| survivors[i])
            .collect();
        picked.sort_unstable();
        picked
    } else {
        if survivors.len() < cfg.target_count {
            log::info!(
                "geometry-aware sampling kept {} points, {} short of the target {}",
                survivors.len(),
                cfg.target_count - survivors.len(),
                cfg.target_count
            );
        }
        survivors
    };
    let eigen = indices
        .iter()
        .map(|&i| features[i].expect("survivors have features"))
        .collect();
    Ok(Sample {
        cloud: cloud.select(&indices),
        indices,
        eigen,
    })
}

fn check_count(cloud: &PointCloud, n: usize) -> Result<(), SamplingError> {
    if n > cloud.len() {
        return Err(SamplingError::InsufficientPoints {
            requested: n,
            available: cloud.len(),
        });
    }
    Ok(())
}

/// Indices of `n` points drawn uniformly without replacement.
pub fn random_indices(cloud: &PointCloud, n: usize, seed: u64) -> Result<Vec<usize>, SamplingError> {
    check_count(cloud, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(index::sample(&mut rng, cloud.len(), n).into_vec())
}

pub fn random_sample(cloud: &PointCloud, n: usize, seed: u64) -> Result<PointCloud, SamplingError> {
    Ok(cloud.select(&random_indices(cloud, n, seed)?))
}

/// Greedy max-min farthest-point selection from a seeded random start.
/// Ties go to the lowest index.
pub fn farthest_point_indices(cloud: &PointCloud, n: usize, seed: u64) -> Result<Vec<usize>, SamplingError> {
    check_count(cloud, n)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let points = cloud.points();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = rng.random_range(0..points.len());
    let mut min_dist = vec![f64::INFINITY; points.len()];
    let mut chosen = Vec::with_capacity(n);
    chosen.push(current);
    while chosen.len() < n {
        let c = points[current];
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for (i, (p, d)) in points.iter().zip(min_dist.iter_mut()).enumerate() {
            *d = d.min(p.distance_squared(&c));
            if *d > best.1 {
                best = (i, *d);
            }
        }
        current = best.0;
        chosen.push(current);
    }
    Ok(chosen)
}

pub fn farthest_point_sample(cloud: &PointCloud, n: usize, seed: u64) -> Result<PointCloud, SamplingError> {
    Ok(cloud.select(&farthest_point_indices(cloud, n, seed)?))
}

/// Samples with the configured strategy. Baseline strategies still attach
/// eigen-features (degenerate neighborhoods get [`EigenFeatures::DEGENERATE`]).
pub fn sample(cloud: &PointCloud, cfg: &SamplingConfig) -> Result<Sample, SamplingError> {
    cfg.validate()?;
    let n = cfg.target_count.min(cloud.len());
    let indices = match cfg.strategy {
        SamplingStrategy::Geometry => return geometry_aware_sample(cloud, cfg),
        SamplingStrategy::Random => random_indices(cloud, n, cfg.rng_seed)?,
        SamplingStrategy::Fps => farthest_point_indices(cloud, n, cfg.rng_seed)?,
    };
    let eigen = eigen_features_for(cloud, &indices, cfg.k_neighbors)?
        .into_iter()
        .map(|f| f.unwrap_or(EigenFeatures::DEGENERATE))
        .collect();
    Ok(Sample {
        cloud: cloud.select(&indices),
        indices,
        eigen,
    })
}
