//! Synthetic LiDAR sequences: a fixed world of planes, poles and isotropic
//! blobs observed from a sensor moving along a constant-curvature path.
//!
//! The world is built in the pipeline frame (`x` right, `y` up, `z`
//! forward) at the first sensor pose. Scan `k` is every world point expressed
//! in sensor frame `k` with fresh Gaussian jitter, a random fraction of
//! returns dropped, and the remaining returns in random order.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::io::{write_trajectory, write_velodyne_scan, AxisMapping, IoError};
use crate::types::{Point3, PointCloud, Pose, RigidMotion, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub frames: usize,
    pub seed: u64,
    /// Per-coordinate noise standard deviation, meters.
    pub noise_sigma: f64,
    /// Fraction of world points missing from each scan.
    pub dropout: f64,
    /// Randomize the return order of each scan.
    pub shuffle: bool,
    /// Forward travel per frame, meters.
    pub step_m: f64,
    /// Heading change per frame, degrees.
    pub yaw_deg: f64,
    /// Amplitude of a slow pitch oscillation, degrees.
    pub pitch_deg: f64,
    pub ground_points: usize,
    pub wall_points: usize,
    pub poles: usize,
    pub pole_points: usize,
    pub blobs: usize,
    pub blob_points: usize,
    pub blob_sigma: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            frames: 50,
            seed: 0,
            noise_sigma: 0.02,
            dropout: 0.1,
            shuffle: true,
            step_m: 0.8,
            yaw_deg: 1.5,
            pitch_deg: 0.3,
            ground_points: 10_000,
            wall_points: 4_000,
            poles: 20,
            pole_points: 200,
            blobs: 3,
            blob_points: 600,
            blob_sigma: 0.6,
        }
    }
}

impl SceneSpec {
    pub fn from_toml(text: &str) -> Result<Self, crate::config::ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn world_points(&self) -> usize {
        self.ground_points + self.wall_points + self.poles * self.pole_points + self.blobs * self.blob_points
    }

    pub fn points_per_scan(&self) -> usize {
        let n = self.world_points();
        n - (self.dropout.clamp(0.0, 1.0) * n as f64).round() as usize
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub scans: Vec<PointCloud>,
    /// Sensor poses in the pipeline frame, first pose identity.
    pub poses: Trajectory,
    pub world: Vec<Point3>,
}

const GROUND_Y: f64 = -1.7;
const WALL_X: f64 = -12.0;
const POLE_HEIGHT: f64 = 4.0;

/// Heading and pitch-oscillated path starting at the identity.
pub fn trajectory(spec: &SceneSpec) -> Trajectory {
    let mut traj = Trajectory::new();
    for k in 1..spec.frames {
        let wave = |j: usize| spec.pitch_deg.to_radians() * (2.0 * PI * j as f64 / 25.0).sin();
        let pitch = wave(k) - wave(k - 1);
        let r = nalgebra::Rotation3::from_euler_angles(pitch, spec.yaw_deg.to_radians(), 0.0);
        let step = RigidMotion::new(*r.matrix(), Vector3::new(0.0, 0.0, spec.step_m)).expect("rotation");
        let last = *traj.last().expect("non-empty");
        traj.push(crate::types::compose_pose(&last, &step));
    }
    traj
}

fn world_points(spec: &SceneSpec, path: &Trajectory) -> Vec<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed_5ce4e);
    let mut pts = Vec::with_capacity(spec.world_points());
    let (xmin, xmax, zmin, zmax) = (-15.0, 35.0, -10.0, 45.0);
    for _ in 0..spec.ground_points {
        pts.push(Point3::new(rng.random_range(xmin..xmax), GROUND_Y, rng.random_range(zmin..zmax)));
    }
    for _ in 0..spec.wall_points {
        pts.push(Point3::new(WALL_X, rng.random_range(GROUND_Y..GROUND_Y + 5.0), rng.random_range(zmin..zmax)));
    }
    let near_path = |x: f64, z: f64| {
        path.poses()
            .iter()
            .any(|p| (p.translation().x - x).powi(2) + (p.translation().z - z).powi(2) < 9.0)
    };
    let mut placed = 0;
    while placed < spec.poles {
        let (x, z) = (rng.random_range(WALL_X + 1.0..xmax), rng.random_range(zmin..zmax));
        if near_path(x, z) {
            continue;
        }
        for j in 0..spec.pole_points {
            let y = GROUND_Y + POLE_HEIGHT * (j as f64 + 0.5) / spec.pole_points as f64;
            pts.push(Point3::new(x, y, z));
        }
        placed += 1;
    }
    let centers = [
        Vector3::new(-7.0, 0.5, 12.0),
        Vector3::new(25.0, 1.0, 14.0),
        Vector3::new(8.0, 0.0, 36.0),
        Vector3::new(-5.0, 1.0, -6.0),
        Vector3::new(28.0, 0.5, 35.0),
    ];
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    for b in 0..spec.blobs {
        let c = if b < centers.len() {
            centers[b]
        } else {
            Vector3::new(rng.random_range(xmin..xmax), 0.5, rng.random_range(zmin..zmax))
        };
        for _ in 0..spec.blob_points {
            let d = Vector3::new(unit.sample(&mut rng), unit.sample(&mut rng), unit.sample(&mut rng)) * spec.blob_sigma;
            pts.push(Point3::from_vector(&(c + d)));
        }
    }
    pts
}

/// Generates the whole sequence in memory.
pub fn generate(spec: &SceneSpec) -> SyntheticSequence {
    let poses = trajectory(spec);
    let world = world_points(spec, &poses);
    let noise = (spec.noise_sigma > 0.0).then(|| Normal::new(0.0, spec.noise_sigma).expect("valid sigma"));
    let scans = crate::par::map_range(poses.len(), |k| {
        let to_sensor = poses.poses()[k].as_motion().inverse();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_mul(1_000_003).wrapping_add(k as u64));
        let mut order: Vec<usize> = (0..world.len()).collect();
        if spec.shuffle {
            order.shuffle(&mut rng);
        }
        let keep = world.len() - (spec.dropout.clamp(0.0, 1.0) * world.len() as f64).round() as usize;
        if keep < world.len() {
            let mut kept = index::sample(&mut rng, world.len(), keep).into_vec();
            if !spec.shuffle {
                kept.sort_unstable();
            }
            order = kept.into_iter().map(|i| order[i]).collect();
        }
        let points = order
            .into_iter()
            .map(|i| {
                let q = to_sensor.apply(&world[i]);
                match &noise {
                    Some(n) => Point3::new(q.x + n.sample(&mut rng), q.y + n.sample(&mut rng), q.z + n.sample(&mut rng)),
                    None => q,
                }
            })
            .collect();
        PointCloud::new(points)
    });
    SyntheticSequence { scans, poses, world }
}

/// Velodyne-to-camera extrinsic written to the synthetic `calib.txt`
/// (KITTI axis convention with a small lever arm).
pub fn synthetic_calibration() -> RigidMotion {
    let r = Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0);
    RigidMotion::new(r, Vector3::new(0.0, -0.08, -0.27)).expect("rotation")
}

/// Writes `seq` in KITTI layout under `root`: velodyne scans through the
/// default axis mapping, `calib.txt`, and camera-frame poses.
pub fn write_kitti(root: &Path, id: &str, seq: &SyntheticSequence) -> Result<(), IoError> {
    let mapping = AxisMapping::KITTI_VELODYNE;
    let dir = root.join("sequences").join(id);
    let velodyne = dir.join("velodyne");
    let poses_dir = root.join("poses");
    for d in [&velodyne, &poses_dir] {
        fs::create_dir_all(d).map_err(|source| IoError::WriteError {
            path: d.to_path_buf(),
            source,
        })?;
    }
    for (k, scan) in seq.scans.iter().enumerate() {
        write_velodyne_scan(scan, &velodyne.join(format!("{k:06}.bin")), &mapping)?;
    }
    let tr = synthetic_calibration();
    let values: Vec<String> = Pose::from_motion(tr)
        .to_row_major_3x4()
        .iter()
        .map(|v| format!("{v:.12e}"))
        .collect();
    let calib = dir.join("calib.txt");
    fs::write(&calib, format!("Tr: {}\n", values.join(" "))).map_err(|source| IoError::WriteError {
        path: calib.clone(),
        source,
    })?;
    // pipeline = G · camera · G⁻¹ with G = A · Tr⁻¹
    let g = mapping.homogeneous() * tr.inverse().to_homogeneous();
    let g_inv = g.try_inverse().expect("invertible");
    let camera = seq
        .poses
        .change_of_basis(&g_inv)
        .map_err(|e| IoError::InvalidSequence {
            dir: dir.clone(),
            reason: e.to_string(),
        })?;
    write_trajectory(&camera, &poses_dir.join(format!("{id}.txt")))
}
