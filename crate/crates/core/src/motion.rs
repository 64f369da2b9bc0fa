//! Closed-form rigid alignment of paired points and trajectory accumulation.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::types::{compose_pose, Point3, RigidMotion, Trajectory};

/// Relative singular-value threshold below which the cross-covariance is
/// treated as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;
const SVD_EPS: f64 = 1e-12;
const SVD_MAX_ITER: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MotionError {
    #[error("need at least 3 correspondences, got {0}")]
    TooFewPairs(usize),
    #[error("source and target have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("correspondences are degenerate (cross-covariance rank < 2)")]
    DegenerateGeometry,
    #[error("SVD did not converge")]
    SvdFailure,
}

/// Row-aligned source/target pairs: `target[i]` corresponds to `source[i]`.
#[derive(Debug, Clone, Copy)]
pub struct CorrespondenceCloud<'a> {
    source: &'a [Point3],
    target: &'a [Point3],
}

impl<'a> CorrespondenceCloud<'a> {
    pub fn new(source: &'a [Point3], target: &'a [Point3]) -> Result<Self, MotionError> {
        if source.len() != target.len() {
            return Err(MotionError::LengthMismatch(source.len(), target.len()));
        }
        if source.len() < 3 {
            return Err(MotionError::TooFewPairs(source.len()));
        }
        Ok(Self { source, target })
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn source(&self) -> &[Point3] {
        self.source
    }

    pub fn target(&self) -> &[Point3] {
        self.target
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionEstimate {
    pub motion: RigidMotion,
    /// Mean squared alignment error `1/N Σ ‖R·xᵢ + t − yᵢ‖²`.
    pub residual: f64,
}

fn centroid(points: &[Point3]) -> Vector3<f64> {
    points.iter().fold(Vector3::zeros(), |acc, p| acc + p.to_vector()) / points.len() as f64
}

/// Mean squared error of `motion` over the pairs.
pub fn alignment_error(c: &CorrespondenceCloud, motion: &RigidMotion) -> f64 {
    c.source
        .iter()
        .zip(c.target)
        .map(|(x, y)| (motion.apply_vector(&x.to_vector()) - y.to_vector()).norm_squared())
        .sum::<f64>()
        / c.len() as f64
}

/// Least-squares proper rigid motion mapping source onto target: centroids,
/// cross-covariance `K = Σ (xᵢ − x̄)(yᵢ − ȳ)ᵀ = U S Vᵀ`,
/// `R = V · diag(1, 1, det(V Uᵀ)) · Uᵀ`, `t = ȳ − R x̄`.
pub fn estimate_rigid_motion(c: &CorrespondenceCloud) -> Result<MotionEstimate, MotionError> {
    let x_bar = centroid(c.source);
    let y_bar = centroid(c.target);
    let mut k = Matrix3::zeros();
    for (x, y) in c.source.iter().zip(c.target) {
        k += (x.to_vector() - x_bar) * (y.to_vector() - y_bar).transpose();
    }
    let svd = k.try_svd(true, true, SVD_EPS, SVD_MAX_ITER).ok_or(MotionError::SvdFailure)?;
    let s = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    if s[order[0]] <= 0.0 || s[order[1]] <= RANK_TOLERANCE * s[order[0]] {
        return Err(MotionError::DegenerateGeometry);
    }
    let u = svd.u.ok_or(MotionError::SvdFailure)?;
    let v = svd.v_t.ok_or(MotionError::SvdFailure)?.transpose();
    // reflection guard acts on the weakest singular direction
    let mut diag = Vector3::new(1.0, 1.0, 1.0);
    diag[order[2]] = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&diag) * u.transpose();
    let t = y_bar - r * x_bar;
    let motion = RigidMotion::new_unchecked(r, t);
    Ok(MotionEstimate {
        motion,
        residual: alignment_error(c, &motion),
    })
}

/// Appends `last · motion` to the trajectory.
///
/// # Panics
/// If `traj` is empty.
pub fn accumulate(traj: &mut Trajectory, motion: &RigidMotion) {
    let last = *traj.last().expect("trajectory must not be empty");
    traj.push(compose_pose(&last, motion));
}
