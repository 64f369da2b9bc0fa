mod common;

use common::{anisotropic_cloud, brute_knn, characteristic_eigenvalues, oracle_eigen_features, random_motion};
use greenpco::sampling::{
    all_eigen_features, eigen_features, eigen_features_of, farthest_point_indices, geometry_aware_sample, random_indices, sample,
    SamplingConfig, SamplingError, SamplingStrategy,
};
use greenpco::types::{Point3, PointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const K: usize = 48;

#[test]
fn cubic_oracle_matches_diagonal() {
    let e = characteristic_eigenvalues(&[[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]]);
    for (a, b) in e.iter().zip([3.0, 2.0, 1.0]) {
        assert!((a - b).abs() < 1e-14);
    }
    let e = characteristic_eigenvalues(&[[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 0.0]]);
    for (a, b) in e.iter().zip([3.0, 1.0, 0.0]) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn matches_characteristic_polynomial_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    for _ in 0..10 {
        let cloud = anisotropic_cloud(&mut rng, 1500);
        for _ in 0..100 {
            let i = rng.random_range(0..cloud.len());
            let got = eigen_features(&cloud, i, K).unwrap();
            let nn = brute_knn(cloud.points(), &cloud.point(i), K);
            assert!(nn.contains(&i));
            let (desc, lambdas) = oracle_eigen_features(cloud.points(), &nn);
            for (a, b) in got.as_array().iter().zip(desc) {
                assert!((a - b).abs() <= 1e-9, "point {i}: {a} vs {b}");
            }
            for (a, b) in got.lambdas.iter().zip(lambdas) {
                assert!((a - b).abs() <= 1e-9);
            }
            checked += 1;
        }
    }
    assert_eq!(checked, 1000);
}

#[test]
fn normalized_eigenvalues_and_ranges() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let cloud = anisotropic_cloud(&mut rng, 3000);
    for f in all_eigen_features(&cloud, K).unwrap().into_iter().flatten() {
        let l = f.lambdas;
        assert!(l[0] >= l[1] && l[1] >= l[2] && l[2] >= 0.0);
        assert!((l.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        assert!((0.0..=1.0).contains(&f.linearity) && (0.0..=1.0).contains(&f.planarity));
        assert!(f.eigen_entropy >= 0.0 && f.eigen_entropy <= 3f64.ln() + 1e-12);
    }
}

#[test]
fn symmetric_star_has_maximal_entropy() {
    let mut pts = vec![Point3::new(0.0, 0.0, 0.0)];
    for axis in 0..3 {
        for s in [-1.0, 1.0] {
            let mut v = [0.0; 3];
            v[axis] = s;
            pts.push(Point3::new(v[0], v[1], v[2]));
        }
    }
    let cloud = PointCloud::new(pts);
    let f = eigen_features(&cloud, 0, 7).unwrap();
    assert!((f.eigen_entropy - 3f64.ln()).abs() <= 1e-12);
    assert!(f.linearity.abs() <= 1e-12 && f.planarity.abs() <= 1e-12);
}

#[test]
fn dense_ball_entropy_approaches_ln3() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut pts = vec![Point3::new(0.0, 0.0, 0.0)];
    while pts.len() < 20_000 {
        let v = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0f64)];
        if v.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
            pts.push(Point3::new(v[0], v[1], v[2]));
        }
    }
    let cloud = PointCloud::new(pts);
    let k = 5000;
    let f = eigen_features(&cloud, 0, k).unwrap();
    assert!((f.eigen_entropy - 3f64.ln()).abs() < 5e-3, "entropy {}", f.eigen_entropy);
    let nn = brute_knn(cloud.points(), &cloud.point(0), k);
    let (desc, _) = oracle_eigen_features(cloud.points(), &nn);
    assert!((desc[2] - f.eigen_entropy).abs() <= 1e-9);
}

#[test]
fn line_and_plane_forced_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let dir = common::random_unit(&mut rng);
    let line = PointCloud::new((0..K).map(|_| Point3::from_vector(&(dir * rng.random_range(-3.0..3.0)))).collect());
    let f = eigen_features(&line, 0, K).unwrap();
    assert!((f.linearity - 1.0).abs() <= 1e-9 && f.planarity.abs() <= 1e-9);

    let m = random_motion(&mut rng, std::f64::consts::PI, 5.0);
    let plane = PointCloud::new(
        (0..K)
            .map(|_| m.apply(&Point3::new(rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0), 0.0)))
            .collect(),
    );
    let f = eigen_features(&plane, 0, K).unwrap();
    let l = f.lambdas;
    assert!(l[2].abs() <= 1e-9);
    assert!((f.planarity - l[1] / l[0]).abs() <= 1e-9);
    assert!((f.linearity - (1.0 - l[1] / l[0])).abs() <= 1e-9);
}

#[test]
fn rigid_motion_preserves_features() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let cloud = anisotropic_cloud(&mut rng, 800);
    let moved = cloud.transformed(&random_motion(&mut rng, std::f64::consts::PI, 30.0));
    for i in (0..cloud.len()).step_by(7) {
        let nn = brute_knn(cloud.points(), &cloud.point(i), K);
        let a = eigen_features_of(&cloud, i, &nn).unwrap();
        let b = eigen_features_of(&moved, i, &nn).unwrap();
        for (x, y) in a.as_array().iter().zip(b.as_array()) {
            assert!((x - y).abs() <= 1e-9);
        }
    }
}

/// 500 points on a plane patch and a dense ball of 500 well away from it.
fn plane_and_ball(rng: &mut ChaCha8Rng) -> PointCloud {
    let mut pts: Vec<Point3> = (0..500)
        .map(|_| Point3::new(rng.random_range(-10.0..10.0), 0.0, rng.random_range(-10.0..10.0)))
        .collect();
    while pts.len() < 1000 {
        let v = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0f64)];
        if v.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
            pts.push(Point3::new(v[0] * 0.8, 6.0 + v[1] * 0.8, v[2] * 0.8));
        }
    }
    PointCloud::new(pts)
}

#[test]
fn plane_discarded_ball_kept() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let cloud = plane_and_ball(&mut rng);
    let cfg = SamplingConfig::default();
    let s = geometry_aware_sample(&cloud, &cfg).unwrap();
    assert!(s.indices.iter().all(|&i| i >= 500), "plane point survived");
    let ball = s.indices.len();
    assert!((475..=525).contains(&ball), "{ball} ball points kept");
    let oracle: Vec<usize> = (0..cloud.len())
        .filter(|&i| {
            let (d, _) = oracle_eigen_features(cloud.points(), &brute_knn(cloud.points(), &cloud.point(i), K));
            d[0] < cfg.linearity_max && d[1] < cfg.planarity_max && d[2] > cfg.entropy_min
        })
        .collect();
    assert_eq!(s.indices, oracle);
}

#[test]
fn filter_is_idempotent_on_separated_clusters() {
    let mut rng = ChaCha8Rng::seed_from_u64(27);
    let mut pts = Vec::new();
    for c in 0..4 {
        let center = [c as f64 * 20.0, 0.0, 5.0];
        // a plane sheet and a ball per cluster, far apart
        for _ in 0..300 {
            pts.push(Point3::new(center[0] + rng.random_range(-3.0..3.0), -5.0, center[2] + rng.random_range(-3.0..3.0)));
        }
        let mut n = 0;
        while n < 300 {
            let v = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0f64)];
            if v.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
                pts.push(Point3::new(center[0] + v[0], center[1] + v[1], center[2] + v[2]));
                n += 1;
            }
        }
    }
    let cloud = PointCloud::new(pts);
    let cfg = SamplingConfig {
        target_count: 100_000,
        ..Default::default()
    };
    let once = geometry_aware_sample(&cloud, &cfg).unwrap();
    let twice = geometry_aware_sample(&once.cloud, &cfg).unwrap();
    assert_eq!(once.cloud.len(), twice.cloud.len(), "second pass dropped points");
    assert_eq!(once.cloud.points(), twice.cloud.points());
}

#[test]
fn survivors_reduce_to_exact_target() {
    let mut rng = ChaCha8Rng::seed_from_u64(28);
    let cloud = PointCloud::new(common::random_points(&mut rng, 6000, [5.0, 5.0, 5.0]));
    let all = geometry_aware_sample(&cloud, &SamplingConfig { target_count: 100_000, ..Default::default() }).unwrap();
    assert!(all.indices.len() > 4500);
    let s = geometry_aware_sample(&cloud, &SamplingConfig::default()).unwrap();
    assert_eq!(s.indices.len(), 2048);
    assert!(s.indices.iter().all(|i| all.indices.binary_search(i).is_ok()));
    for (j, &i) in s.indices.iter().enumerate() {
        assert_eq!(s.cloud.point(j), cloud.point(i));
    }
}

#[test]
fn collinear_scene_is_empty_selection() {
    let cloud = PointCloud::new((0..300).map(|i| Point3::new(i as f64 * 0.1, 0.5 * i as f64 * 0.1, 0.0)).collect());
    assert!(matches!(geometry_aware_sample(&cloud, &SamplingConfig::default()), Err(SamplingError::EmptySelection)));
}

fn min_pairwise(points: &[Point3]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.min(points[i].distance_squared(&points[j]));
        }
    }
    best.sqrt()
}

#[test]
fn fps_spreads_further_than_random() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for seed in 0..100 {
        let cloud = PointCloud::new(common::random_points(&mut rng, 600, [4.0, 2.0, 4.0]));
        let n = 64;
        let fps = cloud.select(&farthest_point_indices(&cloud, n, seed).unwrap());
        let rnd = cloud.select(&random_indices(&cloud, n, seed).unwrap());
        assert!(min_pairwise(fps.points()) >= min_pairwise(rnd.points()));
    }
}

#[test]
fn full_count_is_a_permutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let cloud = PointCloud::new(common::random_points(&mut rng, 300, [1.0, 1.0, 1.0]));
    for strategy in [SamplingStrategy::Random, SamplingStrategy::Fps] {
        let cfg = SamplingConfig {
            strategy,
            target_count: cloud.len(),
            ..Default::default()
        };
        let mut idx = sample(&cloud, &cfg).unwrap().indices;
        idx.sort_unstable();
        assert_eq!(idx, (0..cloud.len()).collect::<Vec<_>>());
    }
}

#[test]
fn sampling_is_seed_reproducible() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let cloud = PointCloud::new(common::random_points(&mut rng, 5000, [5.0, 5.0, 5.0]));
    for strategy in [SamplingStrategy::Geometry, SamplingStrategy::Random, SamplingStrategy::Fps] {
        let cfg = SamplingConfig {
            strategy,
            rng_seed: 9,
            ..Default::default()
        };
        let a = sample(&cloud, &cfg).unwrap();
        let b = sample(&cloud, &cfg).unwrap();
        assert_eq!(a.indices, b.indices);
        assert_eq!(a.eigen, b.eigen);
    }
}
