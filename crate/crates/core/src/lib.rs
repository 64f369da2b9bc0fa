//! Unsupervised LiDAR point-cloud odometry.
//!
//! Each scan is reduced to a few thousand discriminant points by local PCA
//! eigen-features, split into four azimuthal views, and described by a
//! two-hop Saab feature extractor learned in one feedforward pass. Points are
//! matched across consecutive scans by nearest neighbor in feature space,
//! outliers are removed by RANSAC, and the rigid motion is solved in closed
//! form.
//!
//! ```no_run
//! use greenpco::{config::RunConfig, pipeline, synth};
//!
//! let seq = synth::generate(&synth::SceneSpec::default());
//! let cfg = RunConfig::default().resolved();
//! let model = pipeline::train_model(&seq.scans[..5], &cfg).unwrap();
//! let run = pipeline::run_odometry(seq.scans.len(), |i| Ok(seq.scans[i].clone()), &model, &cfg);
//! assert_eq!(run.trajectory.len(), seq.scans.len());
//! ```

pub mod config;
pub mod evaluate;
pub mod features;
pub mod io;
pub mod knn;
pub mod matching;
pub mod motion;
pub mod par;
pub mod partition;
pub mod pipeline;
pub mod run;
pub mod sampling;
pub mod synth;
pub mod types;

pub use features::{extract_features, train_saab, FeatureMatrix, SaabModel};
pub use matching::{match_views, ransac_filter, Correspondence, RansacConfig};
pub use motion::{accumulate, estimate_rigid_motion, CorrespondenceCloud, MotionEstimate};
pub use sampling::{geometry_aware_sample, EigenFeatures, SamplingConfig, SamplingStrategy};
pub use types::{compose_pose, Point3, PointCloud, Pose, RigidMotion, Trajectory};
