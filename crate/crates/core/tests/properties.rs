use std::collections::{BTreeSet, HashMap, VecDeque};
use std::f64::consts::TAU;

use lidarseg::evaluator::Scores;
use lidarseg::mesher::{build_mesh, Mesh};
use lidarseg::normals::{estimate_normals, weighted_normal};
use lidarseg::scan::INVALID;
use lidarseg::segmenter::{segment, LabelMap, SegmenterConfig};
use lidarseg::simulator::{generate_scene, scan_scene, GeneratorParams};
use lidarseg::{GridIndex, Point3, ScanGrid, SensorConfig};
use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;

fn small_sensor(rings: usize, steps: usize, sigma: f64) -> SensorConfig {
    SensorConfig::uniform(rings, 10.0, -30.0, steps, 0.5, 100.0, sigma).unwrap()
}

fn simulated(seed: u64, rings: usize, steps: usize, sigma: f64) -> ScanGrid {
    let scene = generate_scene(seed, &GeneratorParams::default()).unwrap();
    scan_scene(&scene, &small_sensor(rings, steps, sigma))
}

fn edge_set(mesh: &Mesh) -> BTreeSet<(GridIndex, GridIndex)> {
    mesh.nodes()
        .flat_map(|p| {
            mesh.neighbors(p)
                .into_iter()
                .map(move |q| (p.min(q), p.max(q)))
        })
        .collect()
}

fn point() -> impl Strategy<Value = Point3> {
    (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn removing_a_cell_removes_only_its_edges(
        seed in 0u64..500,
        pick in 0usize..10_000,
        interval in 1usize..6,
    ) {
        let scan = simulated(seed, 12, 90, 0.05);
        let before = build_mesh(&scan, interval).unwrap();
        let nodes: Vec<GridIndex> = before.nodes().collect();
        prop_assume!(!nodes.is_empty());
        let victim = nodes[pick % nodes.len()];
        let mut ranges = scan.ranges().to_vec();
        ranges[scan.offset(victim)] = INVALID;
        let reduced = ScanGrid::from_ranges(scan.config().clone(), ranges, None).unwrap();
        let after = build_mesh(&reduced, interval).unwrap();
        let expected: BTreeSet<_> = edge_set(&before)
            .into_iter()
            .filter(|&(a, b)| a != victim && b != victim)
            .collect();
        prop_assert_eq!(edge_set(&after), expected);
    }

    #[test]
    fn only_one_diagonal_per_quad(rings in 2usize..9, steps in 3usize..40, interval in 1usize..4) {
        prop_assume!(interval < steps);
        let scan = ScanGrid::from_ranges(small_sensor(rings, steps, 0.0), vec![7.0; rings * steps], None).unwrap();
        let mesh = build_mesh(&scan, interval).unwrap();
        let kept = mesh.layout().kept_steps().to_vec();
        let k = kept.len();
        prop_assume!(k >= 3);
        for ring in 0..rings - 1 {
            for c in 0..k {
                let here = GridIndex { ring, step: kept[c] };
                let anti = GridIndex { ring: ring + 1, step: kept[(c + k - 1) % k] };
                prop_assert!(!mesh.neighbors(here).contains(&anti));
            }
        }
        prop_assert_eq!(mesh.triangles().len(), 2 * (rings - 1) * k);
    }

    #[test]
    fn normals_ignore_range_scale(seed in 0u64..500, lambda in 0.2..4.0f64) {
        let scan = simulated(seed, 10, 120, 0.02);
        let scaled = scan.scaled(lambda).unwrap();
        let (m0, m1) = (build_mesh(&scan, 2).unwrap(), build_mesh(&scaled, 2).unwrap());
        let (n0, n1) = (estimate_normals(&scan, &m0), estimate_normals(&scaled, &m1));
        for (idx, n) in n1.iter() {
            // Cells that left the range window change the neighborhood.
            if m0.neighbors(idx) != m1.neighbors(idx) {
                continue;
            }
            let reference = n0.get(idx).expect("same neighborhood gives a normal");
            prop_assert!((n - reference).norm() < 1e-6, "{:?}: {} vs {}", idx, n, reference);
        }
    }

    #[test]
    fn normals_follow_a_spin_by_one_kept_step(seed in 0u64..500, interval in 1usize..5) {
        let (rings, steps) = (10, 120);
        prop_assume!(steps % interval == 0);
        let scan = simulated(seed, rings, steps, 0.03);
        // Rolling the ranges by `interval` steps is the scene spun about z.
        let mut rolled = vec![INVALID; rings * steps];
        for ring in 0..rings {
            for s in 0..steps {
                rolled[ring * steps + (s + interval) % steps] = scan.ranges()[ring * steps + s];
            }
        }
        let spun = ScanGrid::from_ranges(scan.config().clone(), rolled, None).unwrap();
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), TAU * interval as f64 / steps as f64);
        let n0 = estimate_normals(&scan, &build_mesh(&scan, interval).unwrap());
        let n1 = estimate_normals(&spun, &build_mesh(&spun, interval).unwrap());
        prop_assert_eq!(n0.iter().count(), n1.iter().count());
        for (idx, n) in n0.iter() {
            let moved = GridIndex { ring: idx.ring, step: (idx.step + interval) % steps };
            let m = n1.get(moved).expect("spun node has a normal");
            prop_assert!((rot * n - m).norm() < 1e-6);
        }
    }

    #[test]
    fn normals_face_the_sensor(seed in 0u64..500, interval in 1usize..8) {
        let scan = simulated(seed, 16, 180, 0.1);
        let normals = estimate_normals(&scan, &build_mesh(&scan, interval).unwrap());
        for (idx, n) in normals.iter() {
            prop_assert!(n.dot(&scan.point(idx).unwrap()) <= 0.0);
            prop_assert!((n.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn weighted_normal_rotates_with_the_points(
        center in point(),
        nbrs in prop::collection::vec(point(), 2..7),
        axis in point(),
        angle in -3.0..3.0f64,
    ) {
        prop_assume!(axis.norm() > 1e-3);
        let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        let moved: Vec<Point3> = nbrs.iter().map(|p| rot * p).collect();
        let (a, b) = (weighted_normal(&center, &nbrs), weighted_normal(&(rot * center), &moved));
        if let (Some(a), Some(b)) = (a, b) {
            // The sensor-facing flip is undecided when the normal is nearly
            // perpendicular to the position.
            prop_assume!(a.dot(&center).abs() > 1e-6 * center.norm());
            prop_assert!((rot * a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn raising_thresholds_coarsens_the_partition(
        seed in 0u64..500,
        interval in 1usize..6,
        low in prop::array::uniform3(0.01..0.4f64),
        extra in prop::array::uniform3(0.0..0.3f64),
    ) {
        let scan = simulated(seed, 16, 240, 0.05);
        let mesh = build_mesh(&scan, interval).unwrap();
        let normals = estimate_normals(&scan, &mesh);
        let fine_cfg = SegmenterConfig { thresholds: low, ..SegmenterConfig::default() };
        let high = [low[0] + extra[0], low[1] + extra[1], low[2] + extra[2]];
        let coarse_cfg = SegmenterConfig { thresholds: high, ..SegmenterConfig::default() };
        let fine = segment(&mesh, &normals, &fine_cfg);
        let coarse = segment(&mesh, &normals, &coarse_cfg);
        prop_assert!(coarse.segment_count() <= fine.segment_count());
        // Every fine segment lies inside a single coarse segment.
        let mut parent: HashMap<u32, u32> = HashMap::new();
        for idx in mesh.nodes() {
            let f = fine.get(idx);
            if f != 0 {
                prop_assert_eq!(*parent.entry(f).or_insert(coarse.get(idx)), coarse.get(idx));
            }
        }
    }

    #[test]
    fn segments_are_connected_and_deterministic(seed in 0u64..500, interval in 1usize..6) {
        let scan = simulated(seed, 16, 240, 0.1);
        let mesh = build_mesh(&scan, interval).unwrap();
        let normals = estimate_normals(&scan, &mesh);
        let cfg = SegmenterConfig::default();
        let labels = segment(&mesh, &normals, &cfg);
        prop_assert_eq!(&labels, &segment(&mesh, &normals, &cfg));
        prop_assert!(every_label_connected(&mesh, &labels));
    }

    #[test]
    fn f1_grows_with_precision_and_recall(p in 0.0..1.0f64, r in 0.0..1.0f64, dp in 0.0..1.0f64, dr in 0.0..1.0f64) {
        let base = Scores::new(p, r).f1;
        prop_assert!(Scores::new((p + dp).min(1.0), r).f1 + 1e-12 >= base);
        prop_assert!(Scores::new(p, (r + dr).min(1.0)).f1 + 1e-12 >= base);
    }
}

fn every_label_connected(mesh: &Mesh, labels: &LabelMap) -> bool {
    let mut members: HashMap<u32, Vec<GridIndex>> = HashMap::new();
    for idx in mesh.nodes() {
        let l = labels.get(idx);
        if l != 0 {
            members.entry(l).or_default().push(idx);
        }
    }
    members.values().all(|cells| {
        let label = labels.get(cells[0]);
        let mut seen = BTreeSet::from([cells[0]]);
        let mut queue = VecDeque::from([cells[0]]);
        while let Some(p) = queue.pop_front() {
            for q in mesh.neighbors(p) {
                if labels.get(q) == label && seen.insert(q) {
                    queue.push_back(q);
                }
            }
        }
        seen.len() == cells.len()
    })
}
