//! TOML configuration documents.
//!
//! A pipeline config has top-level `interval` (sub-sampling used by
//! `segment`/`bench`) and `intervals` (swept by `suite`), plus optional
//! `[sensor]`, `[mesh]`, `[segmenter]`, `[eval]` and `[baseline]` tables.
//! Every key defaults to the values below, so an empty file is valid.
//!
//! ```toml
//! interval = 5
//! intervals = [5, 10, 15]
//!
//! [sensor]
//! rings = 32
//! top_deg = 10.67
//! bottom_deg = -30.67
//! # elevations_deg = [...]   explicit per-ring angles, overrides the three keys above
//! azimuth_steps = 1800
//! r_min = 0.5
//! r_max = 100.0
//! noise_sigma = 0.1
//!
//! [segmenter]
//! thresholds = [0.2, 0.2, 0.2]
//! min_segment_size = 10
//!
//! [eval]
//! dilation_radius = 2
//!
//! [baseline]
//! k_neighbors = 30
//! angle_threshold = 0.05235987755982988
//! curvature_threshold = 0.05
//! min_cluster_size = 50
//! ```
//!
//! A sensor file, as taken by `simulate --sensor`, holds the `[sensor]` keys at top level.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baseline::BaselineConfig;
use crate::error::{Error, Result};
use crate::evaluator::EvalConfig;
use crate::mesher::MeshOptions;
use crate::scan::{self, SensorConfig};
use crate::segmenter::SegmenterConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSpec {
    pub rings: usize,
    pub top_deg: f64,
    pub bottom_deg: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elevations_deg: Option<Vec<f64>>,
    pub azimuth_steps: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub noise_sigma: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            rings: scan::DEFAULT_RINGS,
            top_deg: scan::DEFAULT_TOP_ELEVATION_DEG,
            bottom_deg: scan::DEFAULT_BOTTOM_ELEVATION_DEG,
            elevations_deg: None,
            azimuth_steps: scan::DEFAULT_AZIMUTH_STEPS,
            r_min: scan::DEFAULT_R_MIN,
            r_max: scan::DEFAULT_R_MAX,
            noise_sigma: scan::DEFAULT_NOISE_SIGMA,
        }
    }
}

impl SensorSpec {
    pub fn to_config(&self) -> Result<SensorConfig> {
        match &self.elevations_deg {
            Some(deg) => SensorConfig::new(
                deg.iter().map(|d| d.to_radians()).collect(),
                self.azimuth_steps,
                self.r_min,
                self.r_max,
                self.noise_sigma,
            ),
            None => SensorConfig::uniform(
                self.rings,
                self.top_deg,
                self.bottom_deg,
                self.azimuth_steps,
                self.r_min,
                self.r_max,
                self.noise_sigma,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub interval: usize,
    pub intervals: Vec<usize>,
    pub sensor: SensorSpec,
    pub mesh: MeshOptions,
    pub segmenter: SegmenterConfig,
    pub eval: EvalConfig,
    pub baseline: BaselineConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            interval: 5,
            intervals: vec![5, 10, 15],
            sensor: SensorSpec::default(),
            mesh: MeshOptions::default(),
            segmenter: SegmenterConfig::default(),
            eval: EvalConfig::default(),
            baseline: BaselineConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn with_interval(mut self, interval: usize) -> Self {
        self.interval = interval;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let sensor = self.sensor.to_config()?;
        for interval in std::iter::once(&self.interval).chain(&self.intervals) {
            scan::subsample_steps(&sensor, *interval)?;
        }
        if let Some(limit) = self.mesh.max_edge_length {
            if limit.is_nan() || limit <= 0.0 {
                return Err(Error::param("max_edge_length must be positive"));
            }
        }
        self.segmenter.validate()?;
        self.baseline.validate()?;
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::param(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

fn as_parse_error(path: &Path, e: Error) -> Error {
    match e {
        Error::Parameter(msg) => Error::Parse {
            path: path.to_owned(),
            line: 0,
            msg,
        },
        other => other,
    }
}

pub fn read_config(path: &Path) -> Result<PipelineConfig> {
    PipelineConfig::from_toml(&read_text(path)?).map_err(|e| as_parse_error(path, e))
}

pub fn read_sensor(path: &Path) -> Result<SensorConfig> {
    let spec: SensorSpec = toml::from_str(&read_text(path)?)
        .map_err(|e| as_parse_error(path, Error::param(format!("sensor: {e}"))))?;
    spec.to_config()
}
