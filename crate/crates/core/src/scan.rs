//! Scan-grid data model for a single spin of a spinning Lidar.
//!
//! A scan is an organized grid of range returns indexed by `(ring, step)`:
//! rings are the fixed-elevation sensors of the vertical array, ordered from
//! the topmost (largest elevation) down, and steps are the firings of one
//! revolution. Coordinates are z-up, elevation is measured from the
//! horizontal plane and azimuth runs counter-clockwise from +x.

use std::f64::consts::TAU;

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Cartesian position in meters, sensor at the origin.
pub type Point3 = Vector3<f64>;

/// Range value stored for a cell without a return.
pub const INVALID: f64 = f64::NAN;

/// Number of rings of the default (HDL-32E-like) sensor.
pub const DEFAULT_RINGS: usize = 32;
/// Firings per revolution at 0.2 degree azimuth resolution.
pub const DEFAULT_AZIMUTH_STEPS: usize = 1800;
pub const DEFAULT_TOP_ELEVATION_DEG: f64 = 10.67;
pub const DEFAULT_BOTTOM_ELEVATION_DEG: f64 = -30.67;
pub const DEFAULT_R_MIN: f64 = 0.5;
pub const DEFAULT_R_MAX: f64 = 100.0;
/// Range noise standard deviation, sqrt of a 0.01 m^2 variance.
pub const DEFAULT_NOISE_SIGMA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct SensorConfig {
    ring_elevations: Vec<f64>,
    azimuth_steps: usize,
    r_min: f64,
    r_max: f64,
    noise_sigma: f64,
}

impl SensorConfig {
    /// `ring_elevations` are in radians, top to bottom.
    pub fn new(
        ring_elevations: Vec<f64>,
        azimuth_steps: usize,
        r_min: f64,
        r_max: f64,
        noise_sigma: f64,
    ) -> Result<Self> {
        if ring_elevations.len() < 2 {
            return Err(Error::param("a sensor needs at least 2 rings"));
        }
        if ring_elevations.iter().any(|e| !e.is_finite()) {
            return Err(Error::param("ring elevations must be finite"));
        }
        if ring_elevations.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::param(
                "ring elevations must be strictly decreasing (top to bottom)",
            ));
        }
        if azimuth_steps < 3 {
            return Err(Error::param("azimuth_steps must be at least 3"));
        }
        if !(r_min > 0.0 && r_min < r_max && r_max.is_finite()) {
            return Err(Error::param(format!(
                "range window must satisfy 0 < r_min < r_max, got [{r_min}, {r_max}]"
            )));
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(Error::param("noise_sigma must be finite and non-negative"));
        }
        Ok(Self {
            ring_elevations,
            azimuth_steps,
            r_min,
            r_max,
            noise_sigma,
        })
    }

    /// `rings` elevations spaced uniformly over `[bottom_deg, top_deg]`.
    pub fn uniform(
        rings: usize,
        top_deg: f64,
        bottom_deg: f64,
        azimuth_steps: usize,
        r_min: f64,
        r_max: f64,
        noise_sigma: f64,
    ) -> Result<Self> {
        if rings < 2 {
            return Err(Error::param("a sensor needs at least 2 rings"));
        }
        let span = top_deg - bottom_deg;
        let elevations = (0..rings)
            .map(|i| (top_deg - span * i as f64 / (rings - 1) as f64).to_radians())
            .collect();
        Self::new(elevations, azimuth_steps, r_min, r_max, noise_sigma)
    }

    pub fn ring_elevations(&self) -> &[f64] {
        &self.ring_elevations
    }

    pub fn rings(&self) -> usize {
        self.ring_elevations.len()
    }

    pub fn azimuth_steps(&self) -> usize {
        self.azimuth_steps
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn with_noise_sigma(mut self, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::param("noise_sigma must be finite and non-negative"));
        }
        self.noise_sigma = sigma;
        Ok(self)
    }

    /// Same angular layout with a different number of firings per spin.
    pub fn with_azimuth_steps(mut self, steps: usize) -> Result<Self> {
        if steps < 3 {
            return Err(Error::param("azimuth_steps must be at least 3"));
        }
        self.azimuth_steps = steps;
        Ok(self)
    }

    pub fn azimuth(&self, step: usize) -> f64 {
        TAU * step as f64 / self.azimuth_steps as f64
    }

    pub fn in_range(&self, r: f64) -> bool {
        r >= self.r_min && r <= self.r_max
    }

    pub fn contains(&self, idx: GridIndex) -> bool {
        idx.ring < self.rings() && idx.step < self.azimuth_steps
    }

    /// Unit direction of the beam fired at `idx`.
    pub fn direction(&self, idx: GridIndex) -> Point3 {
        let theta = self.ring_elevations[idx.ring];
        let phi = self.azimuth(idx.step);
        Vector3::new(
            theta.cos() * phi.cos(),
            theta.cos() * phi.sin(),
            theta.sin(),
        )
    }
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self::uniform(
            DEFAULT_RINGS,
            DEFAULT_TOP_ELEVATION_DEG,
            DEFAULT_BOTTOM_ELEVATION_DEG,
            DEFAULT_AZIMUTH_STEPS,
            DEFAULT_R_MIN,
            DEFAULT_R_MAX,
            DEFAULT_NOISE_SIGMA,
        )
        .expect("default sensor is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridIndex {
    pub ring: usize,
    pub step: usize,
}

impl GridIndex {
    pub const fn new(ring: usize, step: usize) -> Self {
        Self { ring, step }
    }
}

/// Converts a spherical return to Cartesian coordinates:
/// `x = r cos(theta) cos(phi)`, `y = r cos(theta) sin(phi)`, `z = r sin(theta)`.
pub fn polar_to_cartesian(config: &SensorConfig, idx: GridIndex, r: f64) -> Result<Point3> {
    if !config.contains(idx) {
        return Err(Error::contract(format!(
            "grid index ({}, {}) out of bounds for {}x{} sensor",
            idx.ring,
            idx.step,
            config.rings(),
            config.azimuth_steps()
        )));
    }
    if !r.is_finite() {
        return Err(Error::contract(format!("non-finite range {r}")));
    }
    Ok(config.direction(idx) * r)
}

/// Kept azimuth steps `0, interval, 2*interval, ...` for an interval in `1..=m`.
pub fn subsample_steps(config: &SensorConfig, interval: usize) -> Result<Vec<usize>> {
    let last = config.azimuth_steps() - 1;
    if interval == 0 || interval > last {
        return Err(Error::param(format!(
            "sampling interval {interval} outside 1..={last}"
        )));
    }
    Ok((0..=last).step_by(interval).collect())
}

/// Precomputed beam trigonometry, so positions are two multiplies per axis.
#[derive(Debug, Clone)]
struct BeamTable {
    cos_el: Vec<f64>,
    sin_el: Vec<f64>,
    cos_az: Vec<f64>,
    sin_az: Vec<f64>,
}

impl BeamTable {
    fn new(config: &SensorConfig) -> Self {
        let (sin_el, cos_el) = config.ring_elevations.iter().map(|t| t.sin_cos()).unzip();
        let (sin_az, cos_az) = (0..config.azimuth_steps)
            .map(|s| config.azimuth(s).sin_cos())
            .unzip();
        Self {
            cos_el,
            sin_el,
            cos_az,
            sin_az,
        }
    }
}

/// Organized range grid of one spin, `rings x azimuth_steps`, ring-major.
#[derive(Debug, Clone)]
pub struct ScanGrid {
    config: SensorConfig,
    ranges: Vec<f64>,
    truth_labels: Option<Vec<u32>>,
    beams: BeamTable,
}

impl PartialEq for ScanGrid {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.truth_labels == other.truth_labels
            && self.ranges.len() == other.ranges.len()
            && self
                .ranges
                .iter()
                .zip(&other.ranges)
                .all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()))
    }
}

impl ScanGrid {
    /// Grid with every cell INVALID.
    pub fn empty(config: SensorConfig) -> Self {
        let n = config.rings() * config.azimuth_steps();
        Self {
            beams: BeamTable::new(&config),
            config,
            ranges: vec![INVALID; n],
            truth_labels: None,
        }
    }

    /// Wraps ring-major ranges. Values outside `[r_min, r_max]` (or non-finite)
    /// are stored as INVALID; the truth label of an INVALID cell is forced to 0.
    pub fn from_ranges(
        config: SensorConfig,
        mut ranges: Vec<f64>,
        mut truth_labels: Option<Vec<u32>>,
    ) -> Result<Self> {
        let n = config.rings() * config.azimuth_steps();
        if ranges.len() != n {
            return Err(Error::param(format!(
                "expected {n} ranges for {}x{} grid, got {}",
                config.rings(),
                config.azimuth_steps(),
                ranges.len()
            )));
        }
        if let Some(labels) = &truth_labels {
            if labels.len() != n {
                return Err(Error::param(format!(
                    "expected {n} truth labels, got {}",
                    labels.len()
                )));
            }
        }
        for (k, r) in ranges.iter_mut().enumerate() {
            if !config.in_range(*r) {
                *r = INVALID;
                if let Some(labels) = truth_labels.as_mut() {
                    labels[k] = 0;
                }
            }
        }
        Ok(Self {
            beams: BeamTable::new(&config),
            config,
            ranges,
            truth_labels,
        })
    }

    pub fn config(&self) -> &SensorConfig {
        &self.config
    }

    pub fn rings(&self) -> usize {
        self.config.rings()
    }

    pub fn steps(&self) -> usize {
        self.config.azimuth_steps()
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    #[inline]
    pub fn offset(&self, idx: GridIndex) -> usize {
        idx.ring * self.steps() + idx.step
    }

    pub fn ranges(&self) -> &[f64] {
        &self.ranges
    }

    pub fn truth_labels(&self) -> Option<&[u32]> {
        self.truth_labels.as_deref()
    }

    #[inline]
    pub fn range(&self, idx: GridIndex) -> f64 {
        self.ranges[self.offset(idx)]
    }

    /// True iff the cell holds a finite range inside the sensor window.
    #[inline]
    pub fn is_valid(&self, idx: GridIndex) -> bool {
        self.config.in_range(self.range(idx))
    }

    pub fn valid_count(&self) -> usize {
        self.ranges
            .iter()
            .filter(|r| self.config.in_range(**r))
            .count()
    }

    /// Cartesian position of a valid cell.
    #[inline]
    pub fn point(&self, idx: GridIndex) -> Option<Point3> {
        let r = self.range(idx);
        if !self.config.in_range(r) {
            return None;
        }
        let b = &self.beams;
        let horizontal = r * b.cos_el[idx.ring];
        Some(Vector3::new(
            horizontal * b.cos_az[idx.step],
            horizontal * b.sin_az[idx.step],
            r * b.sin_el[idx.ring],
        ))
    }

    /// All valid cells as Cartesian points, in ring-major order.
    pub fn valid_points(&self) -> (Vec<Point3>, Vec<GridIndex>) {
        let mut points = Vec::new();
        let mut cells = Vec::new();
        for ring in 0..self.rings() {
            for step in 0..self.steps() {
                let idx = GridIndex::new(ring, step);
                if let Some(p) = self.point(idx) {
                    points.push(p);
                    cells.push(idx);
                }
            }
        }
        (points, cells)
    }

    /// Copy with every range multiplied by `factor`; cells leaving the window become INVALID.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let ranges = self.ranges.iter().map(|r| r * factor).collect();
        Self::from_ranges(self.config.clone(), ranges, self.truth_labels.clone())
    }
}

/// Whether `idx` holds a usable return.
pub fn valid_point(grid: &ScanGrid, idx: GridIndex) -> bool {
    grid.is_valid(idx)
}
