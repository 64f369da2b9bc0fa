//! Trajectory error metrics: the KITTI subsequence metric, per-frame relative
//! pose RMSE, and end-point drift.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Rotation3, Vector3};
use thiserror::Error;

use crate::types::{rotation_angle, Trajectory};

/// Subsequence lengths of the KITTI odometry benchmark, in meters.
pub const KITTI_LENGTHS: [f64; 8] = [100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("trajectory lengths differ ({pred} predicted vs {gt} ground truth)")]
    LengthMismatch { pred: usize, gt: usize },
    #[error("need at least 2 poses, got {0}")]
    TooShort(usize),
    #[error("ground-truth path of {0:.1} m is shorter than every subsequence length")]
    PathTooShort(f64),
}

fn check_lengths(pred: &Trajectory, gt: &Trajectory) -> Result<(), EvalError> {
    if pred.len() != gt.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            gt: gt.len(),
        });
    }
    if gt.len() < 2 {
        return Err(EvalError::TooShort(gt.len()));
    }
    Ok(())
}

fn cumulative_distances(gt: &Trajectory) -> Vec<f64> {
    let mut d = Vec::with_capacity(gt.len());
    let mut acc = 0.0;
    d.push(0.0);
    for w in gt.poses().windows(2) {
        acc += (w[1].translation() - w[0].translation()).norm();
        d.push(acc);
    }
    d
}

/// One KITTI subsequence error sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentError {
    pub first_frame: usize,
    pub length: f64,
    /// Translation error per meter (fraction, not percent).
    pub translation: f64,
    /// Rotation error in radians per meter.
    pub rotation: f64,
}

/// Every (start frame, length) error sample. A subsequence of length `L`
/// starting at frame `i` ends at the first frame whose ground-truth arc
/// length from `i` exceeds `L`.
pub fn kitti_segments(pred: &Trajectory, gt: &Trajectory) -> Result<Vec<SegmentError>, EvalError> {
    check_lengths(pred, gt)?;
    let dist = cumulative_distances(gt);
    let (p, g) = (pred.poses(), gt.poses());
    let per_start = crate::par::map_range(gt.len(), |first| {
        let mut out = Vec::new();
        for &len in &KITTI_LENGTHS {
            let Some(last) = (first..gt.len()).find(|&j| dist[j] > dist[first] + len) else {
                continue;
            };
            let d_gt = g[first].relative_to(&g[last]);
            let d_pred = p[first].relative_to(&p[last]);
            let err = d_pred.inverse().then_after(&d_gt);
            out.push(SegmentError {
                first_frame: first,
                length: len,
                translation: err.translation().norm() / len,
                rotation: err.rotation_angle() / len,
            });
        }
        out
    });
    Ok(per_start.into_iter().flatten().collect())
}

/// KITTI metric: (mean translation error in %, mean rotation error in deg/m).
pub fn kitti_errors(pred: &Trajectory, gt: &Trajectory) -> Result<(f64, f64), EvalError> {
    let segs = kitti_segments(pred, gt)?;
    if segs.is_empty() {
        return Err(EvalError::PathTooShort(gt.path_length()));
    }
    let n = segs.len() as f64;
    let t = segs.iter().map(|s| s.translation).sum::<f64>() / n;
    let r = segs.iter().map(|s| s.rotation).sum::<f64>() / n;
    Ok((t * 100.0, r.to_degrees()))
}

fn euler_xyz(r: &Matrix3<f64>) -> Vector3<f64> {
    let (roll, pitch, yaw) = Rotation3::from_matrix_unchecked(*r).euler_angles();
    Vector3::new(roll, pitch, yaw)
}

fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(std::f64::consts::TAU);
    if w > std::f64::consts::PI {
        w - std::f64::consts::TAU
    } else {
        w
    }
}

/// Per-frame relative motion RMSE: (translation in m, rotation in rad).
/// Translation residual is `‖Δt_pred − Δt_gt‖`; rotation residual is the norm
/// of the wrapped difference of XYZ Euler angles.
pub fn relative_pose_rmse(pred: &Trajectory, gt: &Trajectory) -> Result<(f64, f64), EvalError> {
    check_lengths(pred, gt)?;
    let (p, g) = (pred.poses(), gt.poses());
    let mut st = 0.0;
    let mut sr = 0.0;
    for i in 0..gt.len() - 1 {
        let dp = p[i].relative_to(&p[i + 1]);
        let dg = g[i].relative_to(&g[i + 1]);
        st += (dp.translation() - dg.translation()).norm_squared();
        let de = euler_xyz(dp.rotation()) - euler_xyz(dg.rotation());
        sr += de.map(wrap_angle).norm_squared();
    }
    let n = (gt.len() - 1) as f64;
    Ok(((st / n).sqrt(), (sr / n).sqrt()))
}

/// End-point translation drift as a percentage of ground-truth path length,
/// with both trajectories expressed relative to their first pose.
pub fn final_drift_pct(pred: &Trajectory, gt: &Trajectory) -> Result<f64, EvalError> {
    check_lengths(pred, gt)?;
    let (p, g) = (pred.poses(), gt.poses());
    let n = gt.len() - 1;
    let dp = p[0].relative_to(&p[n]);
    let dg = g[0].relative_to(&g[n]);
    let len = gt.path_length();
    if len <= 0.0 {
        return Ok(0.0);
    }
    Ok((dp.translation() - dg.translation()).norm() / len * 100.0)
}

/// Geodesic angle of each per-frame relative rotation residual, in radians.
pub fn frame_rotation_errors(pred: &Trajectory, gt: &Trajectory) -> Result<Vec<f64>, EvalError> {
    check_lengths(pred, gt)?;
    let (p, g) = (pred.poses(), gt.poses());
    Ok((0..gt.len() - 1)
        .map(|i| {
            let dp = p[i].relative_to(&p[i + 1]);
            let dg = g[i].relative_to(&g[i + 1]);
            rotation_angle(&(dp.rotation().transpose() * dg.rotation()))
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryErrors {
    /// `None` when the path is shorter than 100 m.
    pub kitti_translation_pct: Option<f64>,
    pub kitti_rotation_deg_per_m: Option<f64>,
    pub rel_translation_rmse: f64,
    pub rel_rotation_rmse: f64,
    pub final_drift_pct: f64,
    pub path_length: f64,
    pub frames: usize,
}

pub fn evaluate(pred: &Trajectory, gt: &Trajectory) -> Result<OdometryErrors, EvalError> {
    let (rt, rr) = relative_pose_rmse(pred, gt)?;
    let kitti = match kitti_errors(pred, gt) {
        Ok(v) => Some(v),
        Err(EvalError::PathTooShort(len)) => {
            log::info!("path of {len:.1} m is under 100 m; KITTI metric not reported");
            None
        }
        Err(e) => return Err(e),
    };
    Ok(OdometryErrors {
        kitti_translation_pct: kitti.map(|k| k.0),
        kitti_rotation_deg_per_m: kitti.map(|k| k.1),
        rel_translation_rmse: rt,
        rel_rotation_rmse: rr,
        final_drift_pct: final_drift_pct(pred, gt)?,
        path_length: gt.path_length(),
        frames: gt.len(),
    })
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.prec$}"))
}

pub const CSV_HEADER: &str =
    "sequence,frames,path_m,rel_translation_rmse,rel_rotation_rmse,kitti_translation_pct,kitti_rotation_deg_per_m,final_drift_pct";

impl OdometryErrors {
    pub fn csv_row(&self, sequence: &str) -> String {
        let o = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.6}"));
        format!(
            "{sequence},{},{:.3},{:.6},{:.6},{},{},{:.6}",
            self.frames,
            self.path_length,
            self.rel_translation_rmse,
            self.rel_rotation_rmse,
            o(self.kitti_translation_pct),
            o(self.kitti_rotation_deg_per_m),
            self.final_drift_pct
        )
    }
}

/// Plain-text table, one row per sequence.
pub fn text_report(rows: &[(String, OdometryErrors)]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<10} {:>7} {:>9} {:>14} {:>14} {:>9} {:>10} {:>9}",
        "sequence", "frames", "path[m]", "avg t RMSE", "avg r RMSE", "t[%]", "r[deg/m]", "drift[%]"
    );
    for (name, e) in rows {
        let _ = writeln!(
            s,
            "{:<10} {:>7} {:>9.1} {:>14.4} {:>14.4} {:>9} {:>10} {:>9.3}",
            name,
            e.frames,
            e.path_length,
            e.rel_translation_rmse,
            e.rel_rotation_rmse,
            opt(e.kitti_translation_pct, 2),
            opt(e.kitti_rotation_deg_per_m, 4),
            e.final_drift_pct
        );
    }
    s
}

pub fn csv_report(rows: &[(String, OdometryErrors)]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for (name, e) in rows {
        s.push_str(&e.csv_row(name));
        s.push('\n');
    }
    s
}
