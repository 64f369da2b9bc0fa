//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use greenpco::types::{Point3, PointCloud, RigidMotion};
use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Proper rotation with a uniformly random axis and angle in `[0, max_angle]`.
pub fn random_rotation(rng: &mut ChaCha8Rng, max_angle: f64) -> Matrix3<f64> {
    let axis = Unit::new_normalize(random_unit(rng));
    let angle = rng.random_range(0.0..=max_angle);
    Rotation3::from_axis_angle(&axis, angle).into_inner()
}

pub fn random_motion(rng: &mut ChaCha8Rng, max_angle: f64, max_t: f64) -> RigidMotion {
    let r = random_rotation(rng, max_angle);
    let t = Vector3::new(
        rng.random_range(-max_t..max_t),
        rng.random_range(-max_t..max_t),
        rng.random_range(-max_t..max_t),
    );
    RigidMotion::new(r, t).expect("rotation from axis-angle is proper")
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, half_extent: [f64; 3]) -> Vec<Point3> {
    (0..n)
        .map(|_| {
            Point3::new(
                rng.random_range(-half_extent[0]..half_extent[0]),
                rng.random_range(-half_extent[1]..half_extent[1]),
                rng.random_range(-half_extent[2]..half_extent[2]),
            )
        })
        .collect()
}

/// Angle of `a·bᵀ`, from the rotation's trace.
pub fn geodesic(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let d = a * b.transpose();
    let c = ((d.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let s = Vector3::new(d[(2, 1)] - d[(1, 2)], d[(0, 2)] - d[(2, 0)], d[(1, 0)] - d[(0, 1)]).norm() / 2.0;
    s.atan2(c)
}

/// `k` nearest neighbors by full sort on (squared distance, index).
pub fn brute_knn(points: &[Point3], query: &Point3, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (dx, dy, dz) = (p.x - query.x, p.y - query.y, p.z - query.z);
            (dx * dx + dy * dy + dz * dz, i)
        })
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, i)| i).collect()
}

/// Population covariance by the two-pass formula.
pub fn covariance(points: &[Point3]) -> [[f64; 3]; 3] {
    let n = points.len() as f64;
    let mut m = [0.0; 3];
    for p in points {
        for (a, v) in m.iter_mut().zip(p.as_array()) {
            *a += v;
        }
    }
    let m = m.map(|v| v / n);
    let mut c = [[0.0; 3]; 3];
    for p in points {
        let d = [p.x - m[0], p.y - m[1], p.z - m[2]];
        for r in 0..3 {
            for s in 0..3 {
                c[r][s] += d[r] * d[s];
            }
        }
    }
    c.map(|row| row.map(|v| v / n))
}

/// Eigenvalues of a symmetric 3×3 matrix as the roots of its characteristic
/// polynomial `λ³ − c₂λ² + c₁λ − c₀`, by the trigonometric cubic solution and
/// Newton refinement. Descending.
pub fn characteristic_eigenvalues(a: &[[f64; 3]; 3]) -> [f64; 3] {
    let c2 = a[0][0] + a[1][1] + a[2][2];
    let c1 = a[0][0] * a[1][1] + a[0][0] * a[2][2] + a[1][1] * a[2][2]
        - a[0][1] * a[1][0]
        - a[0][2] * a[2][0]
        - a[1][2] * a[2][1];
    let c0 = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);

    // depressed cubic in μ = λ − c₂/3
    let q = c2 / 3.0;
    let p = (c2 * c2 - 3.0 * c1) / 9.0;
    let r = (2.0 * c2 * c2 * c2 - 9.0 * c2 * c1 + 27.0 * c0) / 54.0;
    let mut roots = if p <= 0.0 {
        [q; 3]
    } else {
        let sp = p.sqrt();
        let theta = (r / (sp * sp * sp)).clamp(-1.0, 1.0).acos();
        [0.0, 1.0, 2.0].map(|k| q + 2.0 * sp * ((theta + 2.0 * PI * k) / 3.0).cos())
    };
    let f = |x: f64| ((x - c2) * x + c1) * x - c0;
    let df = |x: f64| (3.0 * x - 2.0 * c2) * x + c1;
    for x in roots.iter_mut() {
        for _ in 0..4 {
            let d = df(*x);
            if d.abs() < 1e-300 {
                break;
            }
            let next = *x - f(*x) / d;
            if f(next).abs() >= f(*x).abs() {
                break;
            }
            *x = next;
        }
    }
    roots.sort_by(|a, b| b.total_cmp(a));
    roots
}

/// Linearity, planarity, entropy and normalized eigenvalues from the
/// characteristic-polynomial oracle on an explicit neighbor set.
pub fn oracle_eigen_features(points: &[Point3], neighbors: &[usize]) -> ([f64; 3], [f64; 3]) {
    let nb: Vec<Point3> = neighbors.iter().map(|&j| points[j]).collect();
    let raw = characteristic_eigenvalues(&covariance(&nb)).map(|v| v.max(0.0));
    let sum: f64 = raw.iter().sum();
    let l = raw.map(|v| v / sum);
    let entropy: f64 = l.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum();
    ([(l[0] - l[1]) / l[0], (l[1] - l[2]) / l[0], entropy], l)
}

/// Anisotropic Gaussian-ish cloud with a random orientation.
pub fn anisotropic_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    let scale = [rng.random_range(0.05..3.0), rng.random_range(0.05..3.0), rng.random_range(0.05..3.0)];
    let r = random_rotation(rng, PI);
    let offset = Vector3::new(rng.random_range(-50.0..50.0), rng.random_range(-5.0..5.0), rng.random_range(-50.0..50.0));
    PointCloud::new(
        (0..n)
            .map(|_| {
                let v = Vector3::new(
                    scale[0] * rng.random_range(-1.0..1.0),
                    scale[1] * rng.random_range(-1.0..1.0),
                    scale[2] * rng.random_range(-1.0..1.0),
                );
                Point3::from_vector(&(r * v + offset))
            })
            .collect(),
    )
}

/// Small synthetic scene spec for slow tests.
pub fn small_scene(frames: usize, seed: u64) -> greenpco::synth::SceneSpec {
    greenpco::synth::SceneSpec {
        frames,
        seed,
        ..Default::default()
    }
}
