//! End-to-end segmentation: sub-sample and mesh, estimate normals, flood
//! fill, backfill skipped cells, prune small segments.

use std::time::Instant;

use crate::baseline::{baseline_label_map, BaselineTimings};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::evaluator::{edge_prf, elapsed_ms, EvalReport, StageTimings};
use crate::mesher::{build_mesh_with, Mesh};
use crate::normals::{estimate_normals, NormalMap};
use crate::scan::ScanGrid;
use crate::segmenter::{backfill, prune_small, segment, LabelMap};
use crate::simulator::{scan_scene, Scene};

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// Final full-resolution labels.
    pub labels: LabelMap,
    /// Flood-fill labels on sub-sampled nodes, before backfill and pruning.
    pub node_labels: LabelMap,
    pub normals: NormalMap,
    pub mesh: Mesh,
    pub timings: StageTimings,
}

pub fn run_pipeline(scan: &ScanGrid, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.segmenter.validate()?;
    let start = Instant::now();
    let mesh = build_mesh_with(scan, cfg.interval, cfg.mesh)?;
    let mesh_ms = elapsed_ms(start);

    let t = Instant::now();
    let normals = estimate_normals(scan, &mesh);
    let normals_ms = elapsed_ms(t);

    let t = Instant::now();
    let node_labels = segment(&mesh, &normals, &cfg.segmenter);
    let segment_ms = elapsed_ms(t);

    let t = Instant::now();
    let filled = backfill(scan, &node_labels);
    let backfill_ms = elapsed_ms(t);

    let t = Instant::now();
    let labels = prune_small(&filled, cfg.segmenter.min_segment_size);
    let prune_ms = elapsed_ms(t);

    Ok(PipelineOutput {
        labels,
        node_labels,
        normals,
        mesh,
        timings: StageTimings {
            mesh: mesh_ms,
            normals: normals_ms,
            segment: segment_ms,
            backfill: backfill_ms,
            prune: prune_ms,
            total: elapsed_ms(start),
        },
    })
}

/// Scores a pipeline run against the scan's ground truth.
pub fn evaluate_scan(
    scan: &ScanGrid,
    cfg: &PipelineConfig,
) -> Result<(EvalReport, PipelineOutput)> {
    let truth = LabelMap::from_truth(scan)
        .ok_or_else(|| Error::param("scan carries no ground-truth labels"))?;
    let out = run_pipeline(scan, cfg)?;
    let scores = edge_prf(&out.labels, &truth, &cfg.eval)?;
    let mut report = EvalReport::new(scores);
    report.interval = Some(cfg.interval);
    report.timings_ms = Some(out.timings);
    Ok((report, out))
}

#[derive(Debug, Clone)]
pub struct SceneResult {
    pub name: String,
    pub scan: ScanGrid,
    /// One report and label map per configured interval, in order.
    pub runs: Vec<(EvalReport, LabelMap)>,
    pub baseline: Option<(EvalReport, BaselineTimings, LabelMap)>,
}

/// Simulates and scores one scene at every interval of `cfg.intervals`.
pub fn run_scene(
    name: &str,
    scene: &Scene,
    cfg: &PipelineConfig,
    with_baseline: bool,
) -> Result<SceneResult> {
    let sensor = cfg.sensor.to_config()?;
    let scan = scan_scene(scene, &sensor);
    let truth = LabelMap::from_truth(&scan).expect("simulated scans carry truth");
    let mut runs = Vec::with_capacity(cfg.intervals.len());
    for &interval in &cfg.intervals {
        let (mut report, out) = evaluate_scan(&scan, &cfg.clone().with_interval(interval))?;
        report.scene = Some(name.to_string());
        runs.push((report, out.labels));
    }
    let baseline = if with_baseline {
        let (labels, out) = baseline_label_map(&scan, &cfg.baseline)?;
        let mut report = EvalReport::new(edge_prf(&labels, &truth, &cfg.eval)?);
        report.scene = Some(name.to_string());
        Some((report, out.timings, labels))
    } else {
        None
    };
    Ok(SceneResult {
        name: name.to_string(),
        scan,
        runs,
        baseline,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan::SensorConfig;

    #[test]
    fn all_invalid_scan_flows_through() {
        let scan = ScanGrid::empty(SensorConfig::default());
        let out = run_pipeline(&scan, &PipelineConfig::default()).unwrap();
        assert_eq!(out.mesh.node_count(), 0);
        assert!(out.normals.is_empty());
        assert_eq!(out.labels.labeled_count(), 0);
        assert!(out.timings.total > 0.0);
    }

    #[test]
    fn missing_truth_is_reported() {
        let scan = ScanGrid::empty(SensorConfig::default());
        assert!(evaluate_scan(&scan, &PipelineConfig::default()).is_err());
    }
}
