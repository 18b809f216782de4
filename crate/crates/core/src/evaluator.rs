//! Edge-based precision/recall against ground truth, and stage benchmarking.
//!
//! Segment boundaries are compared rather than regions, since predicted
//! segment ids carry no correspondence with truth ids. A predicted edge cell
//! counts as correct when a truth edge lies within the dilation radius
//! (Chebyshev distance on the grid, wrapping in azimuth), and vice versa for
//! recall.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scan::GridIndex;
use crate::segmenter::LabelMap;

pub const DEFAULT_DILATION_RADIUS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Tolerance in grid cells.
    pub dilation_radius: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            dilation_radius: DEFAULT_DILATION_RADIUS,
        }
    }
}

/// Boolean mask over a `rings x steps` grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMask {
    rings: usize,
    steps: usize,
    mask: Vec<bool>,
}

impl EdgeMask {
    pub fn rings(&self) -> usize {
        self.rings
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn contains(&self, idx: GridIndex) -> bool {
        self.mask[idx.ring * self.steps + idx.step]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|m| *m)
    }

    pub fn cells(&self) -> Vec<GridIndex> {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, m)| **m)
            .map(|(k, _)| GridIndex::new(k / self.steps, k % self.steps))
            .collect()
    }

    /// Cells within Chebyshev distance `radius` of a set cell; azimuth wraps,
    /// rings do not.
    pub fn dilate(&self, radius: usize) -> EdgeMask {
        if radius == 0 {
            return self.clone();
        }
        let (rings, steps) = (self.rings, self.steps);
        let mut horizontal = vec![false; self.mask.len()];
        for ring in 0..rings {
            let row = &self.mask[ring * steps..(ring + 1) * steps];
            let out = &mut horizontal[ring * steps..(ring + 1) * steps];
            if 2 * radius + 1 >= steps {
                let any = row.iter().any(|m| *m);
                out.iter_mut().for_each(|o| *o = any);
                continue;
            }
            // Circular prefix counts over the doubled row.
            let mut prefix = vec![0usize; 2 * steps + 1];
            for k in 0..2 * steps {
                prefix[k + 1] = prefix[k] + row[k % steps] as usize;
            }
            for (s, o) in out.iter_mut().enumerate() {
                let lo = s + steps - radius;
                let hi = s + steps + radius + 1;
                *o = prefix[hi.min(2 * steps)] - prefix[lo] > 0
                    || (hi > 2 * steps && prefix[hi - 2 * steps] > 0);
            }
        }
        let mut mask = vec![false; self.mask.len()];
        for ring in 0..rings {
            let lo = ring.saturating_sub(radius);
            let hi = (ring + radius).min(rings - 1);
            for s in 0..steps {
                mask[ring * steps + s] = (lo..=hi).any(|r| horizontal[r * steps + s]);
            }
        }
        EdgeMask { rings, steps, mask }
    }
}

/// Labeled cells with a 4-neighbor (azimuth wrap, no ring wrap) holding a
/// different nonzero label.
pub fn extract_edges(labels: &LabelMap) -> EdgeMask {
    let (rings, steps) = (labels.rings(), labels.steps());
    let l = labels.labels();
    let mut mask = vec![false; l.len()];
    for ring in 0..rings {
        for s in 0..steps {
            let here = l[ring * steps + s];
            if here == 0 {
                continue;
            }
            let differs = |other: u32| other != 0 && other != here;
            let left = l[ring * steps + (s + steps - 1) % steps];
            let right = l[ring * steps + (s + 1) % steps];
            let up = (ring > 0).then(|| l[(ring - 1) * steps + s]);
            let down = (ring + 1 < rings).then(|| l[(ring + 1) * steps + s]);
            mask[ring * steps + s] = differs(left)
                || differs(right)
                || up.is_some_and(differs)
                || down.is_some_and(differs);
        }
    }
    EdgeMask { rings, steps, mask }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Scores {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision > 0.0 && recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

fn covered_fraction(edges: &EdgeMask, dilated_other: &EdgeMask) -> f64 {
    let total = edges.count();
    if total == 0 {
        return 0.0;
    }
    let hit = edges
        .mask
        .iter()
        .zip(&dilated_other.mask)
        .filter(|(e, d)| **e && **d)
        .count();
    hit as f64 / total as f64
}

/// Precision, recall and F1 of predicted boundaries against truth boundaries.
pub fn edge_prf(pred: &LabelMap, truth: &LabelMap, cfg: &EvalConfig) -> Result<Scores> {
    if pred.rings() != truth.rings() || pred.steps() != truth.steps() {
        return Err(Error::param(format!(
            "label grids differ: {}x{} vs {}x{}",
            pred.rings(),
            pred.steps(),
            truth.rings(),
            truth.steps()
        )));
    }
    let pred_edges = extract_edges(pred);
    let truth_edges = extract_edges(truth);
    Ok(edge_scores(&pred_edges, &truth_edges, cfg.dilation_radius))
}

pub fn edge_scores(pred: &EdgeMask, truth: &EdgeMask, radius: usize) -> Scores {
    match (pred.is_empty(), truth.is_empty()) {
        (true, true) => Scores {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        },
        _ => Scores::new(
            covered_fraction(pred, &truth.dilate(radius)),
            covered_fraction(truth, &pred.dilate(radius)),
        ),
    }
}

/// Wall-clock milliseconds of the segmentation stages of one run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub mesh: f64,
    pub normals: f64,
    pub segment: f64,
    pub backfill: f64,
    pub prune: f64,
    pub total: f64,
}

/// One timed run that can be broken down by named stage.
pub trait StageSample {
    fn stages(&self) -> Vec<(&'static str, f64)>;
}

impl StageSample for StageTimings {
    fn stages(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("mesh", self.mesh),
            ("normals", self.normals),
            ("segment", self.segment),
            ("backfill", self.backfill),
            ("prune", self.prune),
            ("total", self.total),
        ]
    }
}

/// Per-image evaluation record written by `eval` and `suite`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<usize>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<StageTimings>,
}

impl EvalReport {
    pub fn new(scores: Scores) -> Self {
        Self {
            scene: None,
            interval: None,
            precision: scores.precision,
            recall: scores.recall,
            f1: scores.f1,
            timings_ms: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub stage: String,
    pub min: f64,
    pub median: f64,
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub repetitions: usize,
    pub stages: Vec<StageStats>,
    /// Raw per-run samples, `samples[run][stage]`.
    pub samples: Vec<Vec<f64>>,
}

impl BenchReport {
    pub fn stage(&self, name: &str) -> Option<&StageStats> {
        self.stages.iter().find(|s| s.stage == name)
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs `run` once to warm up, then `repetitions` timed times.
pub fn bench<T: StageSample>(
    repetitions: usize,
    mut run: impl FnMut() -> Result<T>,
) -> Result<BenchReport> {
    if repetitions < 3 {
        return Err(Error::param("bench needs at least 3 repetitions"));
    }
    run()?;
    let mut names = Vec::new();
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let sample = run()?.stages();
        if names.is_empty() {
            names = sample.iter().map(|(n, _)| *n).collect();
        }
        samples.push(sample.into_iter().map(|(_, v)| v).collect::<Vec<_>>());
    }
    let stages = names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let column: Vec<f64> = samples.iter().map(|s| s[k]).collect();
            StageStats {
                stage: name.to_string(),
                min: column.iter().copied().fold(f64::INFINITY, f64::min),
                median: median(&column),
                mean: column.iter().sum::<f64>() / column.len() as f64,
                max: column.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    Ok(BenchReport {
        repetitions,
        stages,
        samples,
    })
}

/// Milliseconds elapsed since `start`.
pub fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(rings: usize, steps: usize, f: impl Fn(usize, usize) -> u32) -> LabelMap {
        let labels = (0..rings * steps)
            .map(|k| f(k / steps, k % steps))
            .collect();
        LabelMap::from_labels(rings, steps, labels).unwrap()
    }

    #[test]
    fn uniform_grid_has_no_edges() {
        assert!(extract_edges(&map(4, 10, |_, _| 3)).is_empty());
    }

    #[test]
    fn halves_give_two_boundary_column_pairs() {
        // Steps 0..5 -> 1, 5..10 -> 2: boundaries at 4|5 and, by wrap, 9|0.
        let edges = extract_edges(&map(3, 10, |_, s| if s < 5 { 1 } else { 2 }));
        let mut expected = Vec::new();
        for r in 0..3 {
            for s in [0, 4, 5, 9] {
                expected.push(GridIndex::new(r, s));
            }
        }
        assert_eq!(edges.cells(), expected);
    }

    #[test]
    fn checkerboard_is_all_edges() {
        let edges = extract_edges(&map(4, 8, |r, s| 1 + ((r + s) % 2) as u32));
        assert_eq!(edges.count(), 32);
    }

    #[test]
    fn unlabeled_cells_never_edge() {
        let edges = extract_edges(&map(
            2,
            6,
            |_, s| if s == 2 { 0 } else { 1 + (s > 2) as u32 },
        ));
        assert!(!edges.contains(GridIndex::new(0, 2)));
        // 1|0|2 with a gap: only the wrap boundary 5|0 remains.
        assert_eq!(edges.count(), 4);
    }

    #[test]
    fn identical_maps_score_one() {
        let truth = map(6, 30, |r, s| 1 + (s / 7) as u32 + (r / 3) as u32 * 10);
        let s = edge_prf(&truth, &truth, &EvalConfig { dilation_radius: 0 }).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn displaced_boundary_within_dilation() {
        let truth = map(4, 40, |_, s| if s < 20 { 1 } else { 2 });
        let pred = map(4, 40, |_, s| if s < 21 { 5 } else { 6 });
        let s = edge_prf(&pred, &truth, &EvalConfig { dilation_radius: 2 }).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        let s0 = edge_prf(&pred, &truth, &EvalConfig { dilation_radius: 0 }).unwrap();
        assert!(s0.f1 < 1.0);
    }

    #[test]
    fn empty_edge_set_rules() {
        let flat = map(3, 12, |_, _| 1);
        let split = map(3, 12, |_, s| 1 + (s >= 6) as u32);
        let cfg = EvalConfig::default();
        assert_eq!(edge_prf(&flat, &flat, &cfg).unwrap().f1, 1.0);
        let s = edge_prf(&flat, &split, &cfg).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
        let s = edge_prf(&split, &flat, &cfg).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn dimension_mismatch_is_error() {
        assert!(edge_prf(
            &map(2, 5, |_, _| 1),
            &map(2, 6, |_, _| 1),
            &EvalConfig::default()
        )
        .is_err());
    }

    #[test]
    fn dilation_wraps_in_azimuth_only() {
        let mut m = map(5, 20, |_, _| 0);
        m.set(GridIndex::new(0, 0), 1);
        m.set(GridIndex::new(0, 1), 2);
        let d = extract_edges(&m).dilate(2);
        assert!(d.contains(GridIndex::new(0, 18)));
        assert!(d.contains(GridIndex::new(2, 3)));
        assert!(!d.contains(GridIndex::new(3, 0)));
        assert!(!d.contains(GridIndex::new(4, 0)));
        assert!(!d.contains(GridIndex::new(0, 4)));
        // A radius covering the whole ring.
        let all = extract_edges(&m).dilate(15);
        assert!(all.contains(GridIndex::new(4, 10)));
    }

    #[test]
    fn bench_statistics() {
        let mut calls = 0;
        let report = bench(3, || {
            calls += 1;
            Ok(StageTimings {
                mesh: calls as f64,
                total: 2.0 * calls as f64,
                ..Default::default()
            })
        })
        .unwrap();
        assert_eq!(calls, 4, "warm-up run is discarded");
        assert_eq!(report.samples.len(), 3);
        let mesh = report.stage("mesh").unwrap();
        assert_eq!((mesh.min, mesh.median, mesh.max), (2.0, 3.0, 4.0));
        assert!(mesh.min <= mesh.median && mesh.median <= mesh.max);
        assert!(bench(2, || Ok(StageTimings::default())).is_err());
    }

    #[test]
    fn report_json_shape() {
        let mut r = EvalReport::new(Scores::new(1.0, 1.0));
        r.scene = Some("s".into());
        r.interval = Some(5);
        r.timings_ms = Some(StageTimings::default());
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in [
            "scene",
            "interval",
            "precision",
            "recall",
            "f1",
            "timings_ms",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        for key in ["mesh", "normals", "segment", "backfill", "total"] {
            assert!(v["timings_ms"].get(key).is_some(), "{key}");
        }
        assert_eq!(v["f1"], 1.0);
    }
}
