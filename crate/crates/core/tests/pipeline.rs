use lidarseg::baseline::{baseline_label_map, BaselineConfig};
use lidarseg::config::PipelineConfig;
use lidarseg::pipeline::{evaluate_scan, run_pipeline, run_scene};
use lidarseg::segmenter::LabelMap;
use lidarseg::simulator::{generate_scene, scan_scene, GeneratorParams, Primitive, Scene, Shape};
use lidarseg::{GridIndex, ScanGrid, SensorConfig};
use nalgebra::Vector3;

/// Ground at z = -1.8 (id 1) and a box resting on it 4 m out, turned so three
/// faces (top and two sides) face the sensor.
fn ground_and_cube() -> Scene {
    let ground = Primitive::new(
        Shape::Plane {
            point: Vector3::new(0.0, 0.0, -1.8),
            normal: Vector3::z(),
            radius: None,
        },
        vec![1],
    )
    .unwrap();
    let cube = Primitive::new(
        Shape::cuboid(
            Vector3::new(4.0, 0.0, -1.2),
            Vector3::new(0.8, 0.8, 0.6),
            [0.0, 0.0, 0.6],
        ),
        vec![2, 3, 4, 5, 6, 7],
    )
    .unwrap();
    Scene::new(vec![ground, cube], 3).unwrap()
}

fn noiseless() -> SensorConfig {
    SensorConfig::default().with_noise_sigma(0.0).unwrap()
}

#[test]
fn ground_and_cube_gives_at_least_four_segments() {
    let scan = scan_scene(&ground_and_cube(), &SensorConfig::default());
    let truth = LabelMap::from_truth(&scan).unwrap();
    assert_eq!(truth.segment_count(), 4, "ground plus three visible faces");
    let out = run_pipeline(&scan, &PipelineConfig::default()).unwrap();
    assert!(
        out.labels.segment_count() >= 4,
        "{} segments",
        out.labels.segment_count()
    );
}

#[test]
fn noiseless_ground_and_cube_scores_high() {
    let scan = scan_scene(&ground_and_cube(), &noiseless());
    let (report, out) = evaluate_scan(&scan, &PipelineConfig::default()).unwrap();
    assert!(report.f1 > 0.8, "{report:?}");
    // Each truth face is dominated by one predicted label.
    let truth = LabelMap::from_truth(&scan).unwrap();
    for face in 1..=truth.max_label() {
        let mut votes = std::collections::HashMap::new();
        for (t, p) in truth.labels().iter().zip(out.labels.labels()) {
            if *t == face {
                *votes.entry(*p).or_insert(0usize) += 1;
            }
        }
        let total: usize = votes.values().sum();
        if total == 0 {
            continue;
        }
        let best = votes.values().max().unwrap();
        assert!(*best as f64 > 0.75 * total as f64, "face {face}: {votes:?}");
    }
}

#[test]
fn stage_sizes_follow_the_kept_step_ratio() {
    let scan = ScanGrid::from_ranges(SensorConfig::default(), vec![20.0; 32 * 1800], None).unwrap();
    let fine = run_pipeline(&scan, &PipelineConfig::default().with_interval(5)).unwrap();
    let coarse = run_pipeline(&scan, &PipelineConfig::default().with_interval(15)).unwrap();
    assert_eq!(fine.mesh.node_count(), 32 * 360);
    assert_eq!(coarse.mesh.node_count(), 32 * 120);
    assert_eq!(fine.mesh.node_count(), 3 * coarse.mesh.node_count());
    assert_eq!(fine.normals.len(), 3 * coarse.normals.len());
}

#[test]
fn backfill_covers_every_valid_cell_of_labeled_rings() {
    let scene = generate_scene(17, &GeneratorParams::default()).unwrap();
    let scan = scan_scene(&scene, &SensorConfig::default());
    let out = run_pipeline(&scan, &PipelineConfig::default().with_interval(10)).unwrap();
    for ring in 0..scan.rings() {
        let labeled = out.labels.ring(ring).iter().any(|&l| l != 0);
        for step in 0..scan.steps() {
            let idx = GridIndex { ring, step };
            let l = out.labels.get(idx);
            if scan.is_valid(idx) && labeled {
                assert_ne!(l, 0, "{idx:?}");
            }
            if !scan.is_valid(idx) {
                assert_eq!(l, 0, "{idx:?}");
            }
        }
    }
}

#[test]
fn pruning_leaves_no_small_segments() {
    let scene = generate_scene(21, &GeneratorParams::default()).unwrap();
    let scan = scan_scene(&scene, &SensorConfig::default());
    let cfg = PipelineConfig::default();
    let out = run_pipeline(&scan, &cfg).unwrap();
    let mut counts = vec![0usize; out.labels.max_label() as usize + 1];
    for &l in out.labels.labels() {
        counts[l as usize] += 1;
    }
    assert!(counts[1..]
        .iter()
        .all(|&c| c >= cfg.segmenter.min_segment_size));
    assert_eq!(
        out.labels.segment_count(),
        counts.len() - 1,
        "labels are compact"
    );
}

#[test]
fn run_scene_reports_every_interval() {
    let scene = generate_scene(4, &GeneratorParams::default()).unwrap();
    let cfg = PipelineConfig::default();
    let result = run_scene("s", &scene, &cfg, true).unwrap();
    let intervals: Vec<usize> = result
        .runs
        .iter()
        .map(|(r, _)| r.interval.unwrap())
        .collect();
    assert_eq!(intervals, cfg.intervals);
    for (report, _) in &result.runs {
        assert_eq!(report.scene.as_deref(), Some("s"));
        assert!((0.0..=1.0).contains(&report.f1));
        assert!(report.timings_ms.unwrap().total > 0.0);
    }
    let (report, timings, labels) = result.baseline.unwrap();
    assert!((0.0..=1.0).contains(&report.f1));
    assert!(timings.total > 0.0);
    assert_eq!(labels.labels().len(), scan_len(&result.scan));
}

fn scan_len(scan: &ScanGrid) -> usize {
    scan.rings() * scan.steps()
}

#[test]
fn baseline_separates_ground_from_cube_faces() {
    let scan = scan_scene(&ground_and_cube(), &noiseless());
    let (labels, out) = baseline_label_map(&scan, &BaselineConfig::default()).unwrap();
    assert!(labels.segment_count() >= 3, "{}", labels.segment_count());
    assert_eq!(out.labels.len(), scan.valid_count());
    let again = baseline_label_map(&scan, &BaselineConfig::default())
        .unwrap()
        .0;
    assert_eq!(labels, again);
}
