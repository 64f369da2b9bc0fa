//! Octant partitioning of a point's neighborhood.

use crate::knn::KdTree;
use crate::types::PointCloud;

use super::saab::{Octants, OCTANTS};

/// Octant of `d = neighbor − center`: bit 0 for `x ≥ 0`, bit 1 for `y ≥ 0`,
/// bit 2 for `z ≥ 0`.
#[inline]
pub fn octant_of(dx: f64, dy: f64, dz: f64) -> usize {
    (dx >= 0.0) as usize | ((dy >= 0.0) as usize) << 1 | ((dz >= 0.0) as usize) << 2
}

/// The `k` nearest neighbors of a center (the center itself excluded),
/// grouped by octant.
#[derive(Debug, Clone, PartialEq)]
pub struct OctantGroups {
    center: usize,
    members: [Vec<usize>; OCTANTS],
}

impl OctantGroups {
    pub fn new(cloud: &PointCloud, center: usize, neighbors: &[usize]) -> Self {
        let c = cloud.point(center);
        let mut members: [Vec<usize>; OCTANTS] = Default::default();
        for &j in neighbors {
            let p = cloud.point(j);
            members[octant_of(p.x - c.x, p.y - c.y, p.z - c.z)].push(j);
        }
        Self { center, members }
    }

    pub fn members(&self, octant: usize) -> &[usize] {
        &self.members[octant]
    }

    /// Per-octant mean of `values`; empty octants give zero.
    pub fn mean(&self, values: &[f64]) -> Octants {
        let mut out = [0.0; OCTANTS];
        for (o, m) in out.iter_mut().zip(&self.members) {
            if !m.is_empty() {
                *o = m.iter().map(|&j| values[j]).sum::<f64>() / m.len() as f64;
            }
        }
        out
    }

    /// Per-octant mean of `values[j] − values[center]`; empty octants give zero.
    pub fn relative_mean(&self, values: &[f64]) -> Octants {
        let c = values[self.center];
        let mut out = [0.0; OCTANTS];
        for (o, m) in out.iter_mut().zip(&self.members) {
            if !m.is_empty() {
                *o = m.iter().map(|&j| values[j] - c).sum::<f64>() / m.len() as f64;
            }
        }
        out
    }
}

/// The `k` nearest neighbors of `center`, excluding `center` itself.
pub fn neighbors_excluding_self(tree: &KdTree<f64>, cloud: &PointCloud, center: usize, k: usize) -> Vec<usize> {
    let k = k.min(cloud.len().saturating_sub(1));
    let mut nn: Vec<usize> = tree
        .knn(&cloud.point(center).as_array(), k + 1)
        .into_iter()
        .map(|n| n.index)
        .collect();
    match nn.iter().position(|&j| j == center) {
        Some(pos) => {
            nn.remove(pos);
        }
        None => {
            nn.pop();
        }
    }
    nn
}

/// Per-octant means of `channel_values` over the `k` nearest neighbors of
/// `center`. Empty octants contribute zero.
pub fn octant_attributes(cloud: &PointCloud, center: usize, k: usize, channel_values: &[f64]) -> Octants {
    let tree = crate::knn::cloud_tree(cloud.points());
    let nn = neighbors_excluding_self(&tree, cloud, center, k);
    OctantGroups::new(cloud, center, &nn).mean(channel_values)
}
