//! Azimuthal view partitioning around the vehicle.
//!
//! The azimuth is measured in the horizontal `X–Z` plane, `0°` along `+X`
//! (right) and `90°` along `+Z` (forward). Each view is a half-open 90° sector
//! with an inclusive lower bound, so every point lands in exactly one view.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Point3, PointCloud};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("azimuth undefined for a point on the vertical axis")]
pub struct OriginPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViewLabel {
    Front,
    Rear,
    Left,
    Right,
}

impl ViewLabel {
    pub const ALL: [ViewLabel; 4] = [ViewLabel::Front, ViewLabel::Rear, ViewLabel::Left, ViewLabel::Right];

    pub fn index(self) -> usize {
        match self {
            ViewLabel::Front => 0,
            ViewLabel::Rear => 1,
            ViewLabel::Left => 2,
            ViewLabel::Right => 3,
        }
    }

    /// Front `[45°, 135°)`, Left `[135°, 225°)`, Rear `[225°, 315°)`,
    /// Right `[315°, 360°) ∪ [0°, 45°)`.
    pub fn from_azimuth(deg: f64) -> ViewLabel {
        if (45.0..135.0).contains(&deg) {
            ViewLabel::Front
        } else if (135.0..225.0).contains(&deg) {
            ViewLabel::Left
        } else if (225.0..315.0).contains(&deg) {
            ViewLabel::Rear
        } else {
            ViewLabel::Right
        }
    }

    pub fn of_point(p: &Point3) -> ViewLabel {
        match azimuth(p) {
            Ok(deg) => ViewLabel::from_azimuth(deg),
            Err(OriginPoint) => {
                log::warn!("point on the vertical axis assigned to the right view");
                ViewLabel::Right
            }
        }
    }
}

/// Azimuth of `p` in degrees, in `[0, 360)`.
pub fn azimuth(p: &Point3) -> Result<f64, OriginPoint> {
    if p.x == 0.0 && p.z == 0.0 {
        return Err(OriginPoint);
    }
    let deg = p.z.atan2(p.x).to_degrees();
    let wrapped = if deg < 0.0 { deg + 360.0 } else { deg };
    // -tiny + 360 rounds to 360
    Ok(if wrapped >= 360.0 { 0.0 } else { wrapped })
}

/// Four disjoint views; each holds indices into the partitioned cloud, in
/// increasing order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Views {
    groups: [Vec<usize>; 4],
}

impl Views {
    /// A single group holding everything, for runs with partitioning disabled.
    /// It is reported under [`ViewLabel::Front`].
    pub fn single(n: usize) -> Views {
        let mut v = Views::default();
        v.groups[0] = (0..n).collect();
        v
    }

    pub fn get(&self, label: ViewLabel) -> &[usize] {
        &self.groups[label.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ViewLabel, &[usize])> {
        ViewLabel::ALL.into_iter().map(move |l| (l, self.get(l)))
    }

    pub fn total(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// Extracts the sub-cloud of one view.
    pub fn cloud(&self, cloud: &PointCloud, label: ViewLabel) -> PointCloud {
        cloud.select(self.get(label))
    }
}

pub fn partition_views(cloud: &PointCloud) -> Views {
    let labels = crate::par::map_slice(cloud.points(), ViewLabel::of_point);
    let mut views = Views::default();
    for (i, l) in labels.into_iter().enumerate() {
        views.groups[l.index()].push(i);
    }
    views
}
