//! Geometric value types shared by every pipeline stage.
//!
//! Motion math is carried out in `f64` throughout. Poses store only the
//! rotation and translation blocks; the homogeneous bottom row is implied, so
//! it stays exactly `(0, 0, 0, 1)` no matter how many compositions are applied.

use nalgebra::{Matrix3, Matrix4, Vector3};
use thiserror::Error;

/// Maximum tolerated deviation of `RᵀR` from the identity, and of `det(R)`
/// from one, for a matrix to be accepted as a rotation.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("matrix is not a proper rotation (orthonormality error {orthonormality:.3e}, det {det:.12})")]
    NotARotation { orthonormality: f64, det: f64 },
    #[error("non-finite value in rigid transform")]
    NonFinite,
}

/// A point in the sensor frame, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn distance_squared(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

/// An ordered list of points with optional per-point intensity.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point3>,
    intensity: Option<Vec<f32>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        Self {
            points,
            intensity: None,
        }
    }

    /// # Panics
    /// If `intensity.len() != points.len()`.
    pub fn with_intensity(points: Vec<Point3>, intensity: Vec<f32>) -> Self {
        assert_eq!(points.len(), intensity.len(), "intensity length mismatch");
        Self {
            points,
            intensity: Some(intensity),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn intensity(&self) -> Option<&[f32]> {
        self.intensity.as_deref()
    }

    pub fn point(&self, index: usize) -> Point3 {
        self.points[index]
    }

    /// Sub-cloud made of the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        let points = indices.iter().map(|&i| self.points[i]).collect();
        let intensity = self
            .intensity
            .as_ref()
            .map(|v| indices.iter().map(|&i| v[i]).collect());
        PointCloud { points, intensity }
    }

    pub fn transformed(&self, motion: &RigidMotion) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| motion.apply(p)).collect(),
            intensity: self.intensity.clone(),
        }
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }
}

/// A proper rigid transform `x ↦ R·x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidMotion {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidMotion {
    /// Validates that `rotation` is orthonormal with determinant +1.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let orthonormality = orthonormality_error(&rotation);
        let det = rotation.determinant();
        if orthonormality > ROTATION_TOLERANCE || (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(GeometryError::NotARotation {
                orthonormality,
                det,
            });
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Skips validation; callers guarantee the rotation invariants.
    pub(crate) fn new_unchecked(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new_unchecked(Matrix3::identity(), Vector3::zeros())
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new_unchecked(Matrix3::identity(), t)
    }

    /// Rotation of `angle` radians about `axis` (normalized internally) followed by `t`.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, t: Vector3<f64>) -> Self {
        let axis = nalgebra::Unit::new_normalize(axis);
        let r = nalgebra::Rotation3::from_axis_angle(&axis, angle);
        Self::new_unchecked(*r.matrix(), t)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from_vector(&(self.rotation * p.to_vector() + self.translation))
    }

    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new_unchecked(rt, -(rt * self.translation))
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn then_after(&self, other: &RigidMotion) -> Self {
        Self::new_unchecked(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Rotation angle in radians, computed with `atan2` so it stays accurate
    /// near zero.
    pub fn rotation_angle(&self) -> f64 {
        rotation_angle(&self.rotation)
    }
}

/// Geodesic angle of a rotation matrix, accurate for small and large angles.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let s = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]).norm() * 0.5;
    let c = (r.trace() - 1.0) * 0.5;
    s.atan2(c)
}

/// `max |RᵀR − I|` over all entries.
pub fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).abs().max()
}

/// A vehicle pose: rigid transform from the current sensor frame to the
/// frame of the first scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose(RigidMotion);

impl Pose {
    pub fn identity() -> Self {
        Pose(RigidMotion::identity())
    }

    pub fn from_motion(m: RigidMotion) -> Self {
        Pose(m)
    }

    pub fn as_motion(&self) -> &RigidMotion {
        &self.0
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        self.0.rotation()
    }

    pub fn translation(&self) -> &Vector3<f64> {
        self.0.translation()
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        self.0.to_homogeneous()
    }

    /// Row-major upper 3×4 block, the layout used by KITTI pose files.
    pub fn to_row_major_3x4(&self) -> [f64; 12] {
        let r = self.rotation();
        let t = self.translation();
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
        ]
    }

    /// Pose of `other` expressed relative to `self`: `self⁻¹ · other`.
    pub fn relative_to(&self, other: &Pose) -> RigidMotion {
        self.0.inverse().then_after(&other.0)
    }
}

/// `prev · [R t; 0 1]`.
pub fn compose_pose(prev: &Pose, motion: &RigidMotion) -> Pose {
    Pose(prev.0.then_after(motion))
}

/// Time-ordered poses, one per processed scan.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    poses: Vec<Pose>,
}

impl Trajectory {
    /// Trajectory holding only the identity pose.
    pub fn new() -> Self {
        Self::starting_at(Pose::identity())
    }

    pub fn starting_at(initial: Pose) -> Self {
        Self {
            poses: vec![initial],
        }
    }

    pub fn from_poses(poses: Vec<Pose>) -> Self {
        Self { poses }
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn last(&self) -> Option<&Pose> {
        self.poses.last()
    }

    pub fn push(&mut self, pose: Pose) {
        self.poses.push(pose);
    }

    /// Total arc length of the translation path, in meters.
    pub fn path_length(&self) -> f64 {
        self.poses
            .windows(2)
            .map(|w| (w[1].translation() - w[0].translation()).norm())
            .sum()
    }

    /// Applies `g · T · g⁻¹` to every pose. `g` may be any invertible linear
    /// map with orthogonal rows of unit length (including reflections): the
    /// result is again a proper rigid motion.
    pub fn change_of_basis(&self, g: &Matrix4<f64>) -> Result<Trajectory, GeometryError> {
        let g_inv = g.try_inverse().ok_or(GeometryError::NonFinite)?;
        let poses = self
            .poses
            .iter()
            .map(|p| {
                let m = g * p.to_homogeneous() * g_inv;
                let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
                let t: Vector3<f64> = m.fixed_view::<3, 1>(0, 3).into_owned();
                RigidMotion::new(r, t).map(Pose)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Trajectory { poses })
    }
}

impl Default for Trajectory {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_mul(a: &Matrix4<f64>, b: &Matrix4<f64>) -> Matrix4<f64> {
        let mut out = Matrix4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                let mut s = 0.0;
                for k in 0..4 {
                    s += a[(i, k)] * b[(k, j)];
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    fn motion_strategy() -> impl Strategy<Value = RigidMotion> {
        (
            prop::array::uniform3(-1.0f64..1.0),
            -3.0f64..3.0,
            prop::array::uniform3(-10.0f64..10.0),
        )
            .prop_filter("axis must be nonzero", |(a, _, _)| {
                a.iter().map(|v| v * v).sum::<f64>() > 1e-6
            })
            .prop_map(|(a, angle, t)| {
                RigidMotion::from_axis_angle(Vector3::from(a), angle, Vector3::from(t))
            })
    }

    #[test]
    fn identity_composition() {
        let p = compose_pose(&Pose::identity(), &RigidMotion::identity());
        assert_eq!(p, Pose::identity());
    }

    #[test]
    fn pure_translation() {
        let p = compose_pose(
            &Pose::identity(),
            &RigidMotion::from_translation(Vector3::new(1.0, 0.0, 0.0)),
        );
        assert_eq!(*p.translation(), Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(*p.rotation(), Matrix3::identity());
    }

    #[test]
    fn chained_matches_naive_product() {
        let m1 = RigidMotion::from_axis_angle(Vector3::new(0.3, 1.0, -0.2), 0.7, Vector3::new(1.0, -2.0, 0.5));
        let m2 = RigidMotion::from_axis_angle(Vector3::new(-1.0, 0.1, 0.4), -1.3, Vector3::new(0.2, 0.3, 4.0));
        let p = compose_pose(&compose_pose(&Pose::identity(), &m1), &m2);
        let oracle = naive_mul(&m1.to_homogeneous(), &m2.to_homogeneous());
        let diff = (p.to_homogeneous() - oracle).abs().max();
        assert!(diff <= 1e-12, "diff {diff}");
    }

    #[test]
    fn rejects_reflection() {
        let r = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(matches!(
            RigidMotion::new(r, Vector3::zeros()),
            Err(GeometryError::NotARotation { .. })
        ));
    }

    #[test]
    fn small_angles_are_accurate() {
        let m = RigidMotion::from_axis_angle(Vector3::new(0.0, 1.0, 0.0), 3e-11, Vector3::zeros());
        assert!((m.rotation_angle() - 3e-11).abs() < 1e-20);
    }

    #[test]
    fn change_of_basis_with_reflection_stays_proper() {
        let traj = Trajectory::from_poses(vec![
            Pose::identity(),
            Pose::from_motion(RigidMotion::from_axis_angle(
                Vector3::new(0.0, 0.0, 1.0),
                0.3,
                Vector3::new(1.0, 2.0, 3.0),
            )),
        ]);
        let mut g = Matrix4::identity();
        g[(1, 1)] = -1.0;
        let mapped = traj.change_of_basis(&g).unwrap();
        let back = mapped.change_of_basis(&g).unwrap();
        for (a, b) in traj.poses().iter().zip(back.poses()) {
            assert!((a.to_homogeneous() - b.to_homogeneous()).abs().max() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn composition_is_associative(a in motion_strategy(), b in motion_strategy(), c in motion_strategy()) {
            let start = Pose::identity();
            let left = compose_pose(&compose_pose(&compose_pose(&start, &a), &b), &c);
            let bc = b.then_after(&c);
            let right = compose_pose(&compose_pose(&start, &a), &bc);
            prop_assert!((left.to_homogeneous() - right.to_homogeneous()).abs().max() <= 1e-12);
        }

        #[test]
        fn bottom_row_is_exact(ms in prop::collection::vec(motion_strategy(), 1..50)) {
            let mut p = Pose::identity();
            for m in &ms {
                p = compose_pose(&p, m);
            }
            let h = p.to_homogeneous();
            prop_assert_eq!(h[(3, 0)], 0.0);
            prop_assert_eq!(h[(3, 1)], 0.0);
            prop_assert_eq!(h[(3, 2)], 0.0);
            prop_assert_eq!(h[(3, 3)], 1.0);
        }
    }
}
