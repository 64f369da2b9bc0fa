//! Two-hop point features: octant-mean attributes transformed channel by
//! channel with learned Saab filters, followed by the point's coordinates and
//! eigen-features.
//!
//! Hop 1 takes the three coordinate channels. For every point, the relative
//! coordinates of its nearest neighbors are averaged per octant, giving one
//! 8-vector per channel, and each 8-vector is Saab-transformed. Output
//! coefficients whose energy reaches the threshold are kept; they form the
//! hop-1 part of the feature and become the input channels of hop 2, which
//! repeats the octant averaging over the same sampled cloud.

mod model;
pub mod octant;
pub mod saab;

pub use model::{read_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use octant::{octant_attributes, OctantGroups};
pub use saab::{ChannelStats, Octants, SaabChannelFilter};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knn::cloud_tree;
use crate::par;
use crate::sampling::EigenFeatures;
use crate::types::PointCloud;

/// Number of coordinate channels feeding the first hop.
pub const INPUT_CHANNELS: usize = 3;
pub const HOP_COUNT: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("channel variance {variance:.3e} too small to learn AC kernels")]
    DegenerateTraining { variance: f64 },
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("no training points")]
    NoTrainingData,
    #[error("bad model file: {0}")]
    ModelFormat(String),
    #[error("{features} eigen-feature entries for {points} points")]
    EigenLengthMismatch { features: usize, points: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaabConfig {
    pub hop1_k: usize,
    pub hop2_k: usize,
    /// Output components at or above this energy are kept and forwarded.
    pub energy_threshold: f64,
}

impl Default for SaabConfig {
    fn default() -> Self {
        Self {
            hop1_k: 32,
            hop2_k: 32,
            energy_threshold: 1e-4,
        }
    }
}

/// Which optional blocks are appended to the hop coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureOptions {
    pub eigen_features: bool,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self { eigen_features: true }
    }
}

/// One input channel of a hop and its filter. `source` is the channel's
/// position in the previous hop's retained outputs (or the coordinate axis
/// for hop 1).
#[derive(Debug, Clone, PartialEq)]
pub struct HopChannel {
    pub source: usize,
    pub filter: SaabChannelFilter,
}

impl HopChannel {
    pub fn parent_energy(&self) -> f64 {
        self.filter.energies().iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hop {
    pub k_neighbors: usize,
    pub energy_threshold: f64,
    pub channels: Vec<HopChannel>,
}

impl Hop {
    /// `(channel, component)` pairs kept by the energy threshold, in channel
    /// then component order.
    pub fn retained(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (c, ch) in self.channels.iter().enumerate() {
            for (j, &e) in ch.filter.energies().iter().enumerate() {
                if e >= self.energy_threshold {
                    out.push((c, j));
                }
            }
        }
        out
    }

    pub fn retained_energies(&self) -> Vec<f64> {
        self.retained()
            .into_iter()
            .map(|(c, j)| self.channels[c].filter.energies()[j])
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModelMetadata {
    pub training_scans: u32,
    pub seed: u64,
}

/// Trained two-hop feature extractor. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct SaabModel {
    hops: Vec<Hop>,
    metadata: ModelMetadata,
}

impl SaabModel {
    pub fn from_hops(hops: Vec<Hop>, metadata: ModelMetadata) -> Result<Self, FeatureError> {
        let model = Self { hops, metadata };
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<(), FeatureError> {
        if self.hops.len() != HOP_COUNT {
            return Err(FeatureError::ModelMismatch(format!("{} hops, expected {HOP_COUNT}", self.hops.len())));
        }
        if self.hops[0].channels.len() != INPUT_CHANNELS {
            return Err(FeatureError::ModelMismatch(format!(
                "hop 1 has {} input channels, expected {INPUT_CHANNELS}",
                self.hops[0].channels.len()
            )));
        }
        let forwarded = self.hops[0].retained().len();
        if self.hops[1].channels.len() != forwarded {
            return Err(FeatureError::ModelMismatch(format!(
                "hop 2 has {} channels but hop 1 forwards {forwarded}",
                self.hops[1].channels.len()
            )));
        }
        Ok(())
    }

    pub fn hops(&self) -> &[Hop] {
        &self.hops
    }

    pub fn metadata(&self) -> &ModelMetadata {
        &self.metadata
    }

    /// Number of hop coefficients in every feature vector.
    pub fn coefficient_count(&self) -> usize {
        self.hops.iter().map(|h| h.retained().len()).sum()
    }

    /// Dimension of every feature vector produced with `opts`.
    pub fn feature_dim(&self, opts: &FeatureOptions) -> usize {
        self.coefficient_count() + 3 + if opts.eigen_features { 3 } else { 0 }
    }
}

/// Row-major per-point feature vectors of a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(dim: usize, data: Vec<f32>) -> Self {
        assert!(dim > 0 && data.len().is_multiple_of(dim), "bad feature matrix shape");
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix { dim: self.dim, data }
    }
}

fn octant_groups(cloud: &PointCloud, k: usize) -> Vec<OctantGroups> {
    let tree = cloud_tree(cloud.points());
    par::map_range(cloud.len(), |i| {
        let nn = octant::neighbors_excluding_self(&tree, cloud, i, k);
        OctantGroups::new(cloud, i, &nn)
    })
}

fn coordinate_channels(cloud: &PointCloud) -> [Vec<f64>; INPUT_CHANNELS] {
    let pts = cloud.points();
    [
        pts.iter().map(|p| p.x).collect(),
        pts.iter().map(|p| p.y).collect(),
        pts.iter().map(|p| p.z).collect(),
    ]
}

/// Per-point attributes of every input channel: `attrs[channel][point]`.
fn hop1_attributes(cloud: &PointCloud, groups: &[OctantGroups]) -> Vec<Vec<Octants>> {
    coordinate_channels(cloud)
        .iter()
        .map(|values| par::map_slice(groups, |g| g.relative_mean(values)))
        .collect()
}

fn hop2_attributes(groups: &[OctantGroups], channels: &[Vec<f64>]) -> Vec<Vec<Octants>> {
    channels
        .iter()
        .map(|values| par::map_slice(groups, |g| g.mean(values)))
        .collect()
}

/// Retained outputs of a hop as channel columns: `out[r][point]`.
fn hop_outputs(hop: &Hop, attrs: &[Vec<Octants>]) -> Vec<Vec<f64>> {
    let retained = hop.retained();
    let n = attrs.first().map_or(0, Vec::len);
    let mut out = vec![vec![0.0; n]; retained.len()];
    let mut buf = [0.0; saab::OCTANTS];
    for (c, ch) in hop.channels.iter().enumerate() {
        let slots: Vec<(usize, usize)> = retained
            .iter()
            .enumerate()
            .filter(|(_, &(rc, _))| rc == c)
            .map(|(slot, &(_, j))| (slot, j))
            .collect();
        if slots.is_empty() {
            continue;
        }
        for (p, x) in attrs[c].iter().enumerate() {
            ch.filter.transform(x, &mut buf[..ch.filter.output_count()]);
            for &(slot, j) in &slots {
                out[slot][p] = buf[j];
            }
        }
    }
    out
}

fn fit_channels(
    stats: Vec<ChannelStats>,
    parent_energies: &[f64],
    sources: impl Iterator<Item = usize>,
) -> Vec<HopChannel> {
    stats
        .iter()
        .zip(parent_energies)
        .zip(sources)
        .map(|((s, &e), source)| {
            let filter = SaabChannelFilter::fit(s, e).unwrap_or_else(|err| {
                log::warn!("channel {source}: {err}; keeping DC only");
                SaabChannelFilter::dc_only(e, s.max_norm())
            });
            HopChannel { source, filter }
        })
        .collect()
}

/// Accumulates channel statistics cloud by cloud, merging in cloud order so
/// the result does not depend on scheduling.
fn accumulate_stats(per_cloud: &[Vec<Vec<Octants>>], channels: usize) -> Vec<ChannelStats> {
    let shards: Vec<Vec<ChannelStats>> = par::map_slice(per_cloud, |attrs| {
        attrs.iter().map(ChannelStats::from_vectors).collect()
    });
    let mut total = vec![ChannelStats::default(); channels];
    for shard in &shards {
        for (t, s) in total.iter_mut().zip(shard) {
            t.merge(s);
        }
    }
    total
}

/// Learns both hops from already-sampled training clouds in one pass.
pub fn train_saab(clouds: &[PointCloud], cfg: &SaabConfig, metadata: ModelMetadata) -> Result<SaabModel, FeatureError> {
    let clouds: Vec<&PointCloud> = clouds.iter().filter(|c| c.len() > 1).collect();
    if clouds.is_empty() {
        return Err(FeatureError::NoTrainingData);
    }

    let groups1: Vec<Vec<OctantGroups>> = clouds.iter().map(|c| octant_groups(c, cfg.hop1_k)).collect();
    let attrs1: Vec<Vec<Vec<Octants>>> = clouds.iter().zip(&groups1).map(|(c, g)| hop1_attributes(c, g)).collect();
    let stats1 = accumulate_stats(&attrs1, INPUT_CHANNELS);
    let root = 1.0 / INPUT_CHANNELS as f64;
    let hop1 = Hop {
        k_neighbors: cfg.hop1_k,
        energy_threshold: cfg.energy_threshold,
        channels: fit_channels(stats1, &[root; INPUT_CHANNELS], 0..INPUT_CHANNELS),
    };

    let forwarded = hop1.retained_energies();
    let attrs2: Vec<Vec<Vec<Octants>>> = clouds
        .iter()
        .zip(&groups1)
        .zip(&attrs1)
        .map(|((c, g1), a1)| {
            let outputs = hop_outputs(&hop1, a1);
            if cfg.hop2_k == cfg.hop1_k {
                hop2_attributes(g1, &outputs)
            } else {
                hop2_attributes(&octant_groups(c, cfg.hop2_k), &outputs)
            }
        })
        .collect();
    let stats2 = accumulate_stats(&attrs2, forwarded.len());
    let hop2 = Hop {
        k_neighbors: cfg.hop2_k,
        energy_threshold: cfg.energy_threshold,
        channels: fit_channels(stats2, &forwarded, 0..forwarded.len()),
    };

    SaabModel::from_hops(vec![hop1, hop2], metadata)
}

/// Retained hop-1 then hop-2 coefficients of every point, as `f64`
/// columns: `out[coefficient][point]`.
pub fn hop_coefficients(cloud: &PointCloud, model: &SaabModel) -> Result<Vec<Vec<f64>>, FeatureError> {
    model.check()?;
    let (hop1, hop2) = (&model.hops[0], &model.hops[1]);
    let groups1 = octant_groups(cloud, hop1.k_neighbors);
    let mut out = hop_outputs(hop1, &hop1_attributes(cloud, &groups1));
    let attrs2 = if hop2.k_neighbors == hop1.k_neighbors {
        hop2_attributes(&groups1, &out)
    } else {
        hop2_attributes(&octant_groups(cloud, hop2.k_neighbors), &out)
    };
    out.extend(hop_outputs(hop2, &attrs2));
    Ok(out)
}

/// Feature vectors `[hop-1 coefficients, hop-2 coefficients, x, y, z,
/// (linearity, planarity, eigen-entropy)]` for every point of `cloud`.
pub fn extract_features(
    cloud: &PointCloud,
    model: &SaabModel,
    eigen: &[EigenFeatures],
    opts: &FeatureOptions,
) -> Result<FeatureMatrix, FeatureError> {
    if eigen.len() != cloud.len() {
        return Err(FeatureError::EigenLengthMismatch {
            features: eigen.len(),
            points: cloud.len(),
        });
    }
    let coefficients = hop_coefficients(cloud, model)?;
    let dim = model.feature_dim(opts);
    let mut data = Vec::with_capacity(dim * cloud.len());
    for (i, p) in cloud.points().iter().enumerate() {
        data.extend(coefficients.iter().map(|col| col[i] as f32));
        data.extend(p.as_array().map(|v| v as f32));
        if opts.eigen_features {
            data.extend(eigen[i].as_array().map(|v| v as f32));
        }
    }
    Ok(FeatureMatrix::new(dim, data))
}
