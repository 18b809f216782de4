//! Surface segmentation for single-spin spinning-Lidar scans.
//!
//! The scan is kept on its organized `(ring, azimuth step)` grid, so the
//! mesh over a sub-sampled grid comes from index arithmetic alone. Normals
//! come from ordered neighbor cross products on that mesh, and segments from
//! a depth-first flood fill over normal-homogeneous edges.
//!
//! ```no_run
//! use lidarseg::{config::PipelineConfig, pipeline::run_pipeline, simulator};
//!
//! let scene = simulator::generate_scene(3, &Default::default()).unwrap();
//! let cfg = PipelineConfig::default();
//! let scan = simulator::scan_scene(&scene, &cfg.sensor.to_config().unwrap());
//! let out = run_pipeline(&scan, &cfg).unwrap();
//! println!("{} segments", out.labels.segment_count());
//! ```

pub mod baseline;
pub mod config;
pub mod error;
pub mod evaluator;
pub mod io;
pub mod mesher;
pub mod normals;
pub mod pipeline;
pub mod scan;
pub mod segmenter;
pub mod simulator;

pub use error::{Error, Result};
pub use scan::{GridIndex, Point3, ScanGrid, SensorConfig};
