//! Run configuration: a TOML file with one section per stage. Every field has
//! a default, so a file only needs the keys it changes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureOptions, SaabConfig};
use crate::io::AxisMapping;
use crate::matching::{MatchOptions, RansacConfig};
use crate::sampling::{SamplingConfig, SamplingStrategy};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Seeds every random stream of the run.
    pub seed: u64,
    pub single_thread: bool,
    /// Maps sensor axes onto the pipeline frame (`y` up, `z` forward).
    pub axis_mapping: AxisMapping,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            single_thread: false,
            axis_mapping: AxisMapping::KITTI_VELODYNE,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub data_root: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub sequences: Vec<String>,
    /// Scans taken from the training sequences at a uniform stride.
    pub scans: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            sequences: ["00", "01", "02", "03", "05", "06", "07", "08", "09"]
                .map(String::from)
                .to_vec(),
            scans: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdometrySection {
    pub sequences: Vec<String>,
    /// Match within the four azimuthal views; off matches the whole scan.
    pub views: bool,
}

impl Default for OdometrySection {
    fn default() -> Self {
        Self {
            sequences: vec!["04".into(), "10".into()],
            views: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateSection {
    pub strategies: Vec<SamplingStrategy>,
    pub points: Vec<usize>,
    /// Also run the view-partitioning and eigen-feature toggles.
    pub toggles: bool,
}

impl Default for AblateSection {
    fn default() -> Self {
        Self {
            strategies: vec![SamplingStrategy::Geometry, SamplingStrategy::Fps, SamplingStrategy::Random],
            points: vec![512, 1024, 2048],
            toggles: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub paths: PathsSection,
    pub train: TrainSection,
    pub odometry: OdometrySection,
    pub ablate: AblateSection,
    pub sampling: SamplingConfig,
    pub saab: SaabConfig,
    pub features: FeatureOptions,
    pub matching: MatchOptions,
    pub ransac: RansacConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Copies the run seed into the per-stage seeds.
    pub fn resolved(mut self) -> Self {
        self.sampling.rng_seed = self.run.seed;
        self.ransac.seed = self.run.seed;
        self
    }

    pub fn threads(&self) -> usize {
        if self.run.single_thread {
            1
        } else {
            crate::par::current_threads()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.sampling
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.ransac
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.saab.hop1_k < 1 || self.saab.hop2_k < 1 {
            return Err(ConfigError::Invalid("hop neighborhood sizes must be >= 1".into()));
        }
        if self.saab.energy_threshold.is_nan() || self.saab.energy_threshold < 0.0 {
            return Err(ConfigError::Invalid("energy_threshold must be >= 0".into()));
        }
        Ok(())
    }

    pub fn validate_ablation(&self) -> Result<(), ConfigError> {
        let a = &self.ablate;
        if a.strategies.is_empty() || a.points.is_empty() {
            return Err(ConfigError::Invalid("ablation grid is empty".into()));
        }
        for &n in &a.points {
            let probe = SamplingConfig {
                target_count: n,
                ..self.sampling.clone()
            };
            probe
                .validate()
                .map_err(|e| ConfigError::Invalid(format!("ablation point count {n}: {e}")))?;
        }
        let mut seen = a.strategies.clone();
        seen.sort_by_key(|s| s.to_string());
        seen.dedup();
        if seen.len() != a.strategies.len() {
            return Err(ConfigError::Invalid("duplicate sampling strategy in ablation grid".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
        assert!(text.contains("[sampling]"));
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = RunConfig::from_toml("[sampling]\ntarget_count = 512\n[run]\nseed = 7\n").unwrap();
        assert_eq!(c.sampling.target_count, 512);
        assert_eq!(c.sampling.k_neighbors, 48);
        assert_eq!(c.run.seed, 7);
        let r = c.resolved();
        assert_eq!((r.sampling.rng_seed, r.ransac.seed), (7, 7));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_grids() {
        assert!(RunConfig::from_toml("[sampling]\nbogus = 1\n").is_err());
        let mut c = RunConfig::default();
        c.ablate.points = vec![2];
        assert!(c.validate_ablation().is_err());
        c.ablate.points = vec![512];
        c.ablate.strategies = vec![SamplingStrategy::Fps, SamplingStrategy::Fps];
        assert!(c.validate_ablation().is_err());
    }
}
