//! Surface segmentation by normal homogeneity.
//!
//! Labels spread depth-first over mesh edges while every normal component
//! differs by strictly less than its threshold. Cells skipped by sub-sampling
//! (and nodes without a normal) then take the label of the nearest labeled
//! cell on the same ring, and undersized segments can be dissolved.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesher::Mesh;
use crate::normals::NormalMap;
use crate::scan::{GridIndex, ScanGrid};

pub const DEFAULT_THRESHOLD: f64 = 0.2;
pub const DEFAULT_MIN_SEGMENT_SIZE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmenterConfig {
    /// Per-component limits `[I, J, K]` on `|n_p - n_q|`.
    pub thresholds: [f64; 3],
    /// Segments with fewer points are dissolved; 0 disables pruning.
    pub min_segment_size: usize,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            thresholds: [DEFAULT_THRESHOLD; 3],
            min_segment_size: DEFAULT_MIN_SEGMENT_SIZE,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thresholds.iter().any(|t| !(*t > 0.0 && *t <= 2.0)) {
            return Err(Error::param(format!(
                "thresholds must lie in (0, 2], got {:?}",
                self.thresholds
            )));
        }
        Ok(())
    }
}

/// Dense per-cell segment labels, ring-major; 0 means unlabeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    rings: usize,
    steps: usize,
    labels: Vec<u32>,
}

impl LabelMap {
    pub fn new(rings: usize, steps: usize) -> Self {
        Self {
            rings,
            steps,
            labels: vec![0; rings * steps],
        }
    }

    pub fn from_labels(rings: usize, steps: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != rings * steps {
            return Err(Error::param(format!(
                "expected {} labels for {rings}x{steps}, got {}",
                rings * steps,
                labels.len()
            )));
        }
        Ok(Self {
            rings,
            steps,
            labels,
        })
    }

    /// Ground-truth surface ids of a simulated scan.
    pub fn from_truth(grid: &ScanGrid) -> Option<Self> {
        grid.truth_labels().map(|l| Self {
            rings: grid.rings(),
            steps: grid.steps(),
            labels: l.to_vec(),
        })
    }

    pub fn rings(&self) -> usize {
        self.rings
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn get(&self, idx: GridIndex) -> u32 {
        self.labels[idx.ring * self.steps + idx.step]
    }

    pub fn set(&mut self, idx: GridIndex, label: u32) {
        self.labels[idx.ring * self.steps + idx.step] = label;
    }

    pub fn ring(&self, ring: usize) -> &[u32] {
        &self.labels[ring * self.steps..(ring + 1) * self.steps]
    }

    pub fn max_label(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// Number of distinct nonzero labels.
    pub fn segment_count(&self) -> usize {
        let mut seen = vec![false; self.max_label() as usize + 1];
        let mut count = 0;
        for &l in &self.labels {
            if l != 0 && !seen[l as usize] {
                seen[l as usize] = true;
                count += 1;
            }
        }
        count
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|l| **l != 0).count()
    }
}

#[inline]
fn similar(a: &nalgebra::Vector3<f64>, b: &nalgebra::Vector3<f64>, t: &[f64; 3]) -> bool {
    (a.x - b.x).abs() < t[0] && (a.y - b.y).abs() < t[1] && (a.z - b.z).abs() < t[2]
}

/// Depth-first label propagation. Seeds are visited ring-major; nodes without
/// a normal stay 0. Labels start at 1 in first-touch order.
pub fn segment(mesh: &Mesh, normals: &NormalMap, cfg: &SegmenterConfig) -> LabelMap {
    let layout = mesh.layout();
    let mut cell_labels = vec![0u32; layout.cell_count()];
    let mut stack = Vec::new();
    let mut label = 0u32;
    for seed in mesh.node_cells() {
        if cell_labels[seed] != 0 || normals.at_cell(seed).is_none() {
            continue;
        }
        label += 1;
        cell_labels[seed] = label;
        stack.push(seed);
        while let Some(p) = stack.pop() {
            let np = normals.at_cell(p).expect("labeled nodes have normals");
            for q in mesh.neighbor_cells(p) {
                if cell_labels[q] != 0 {
                    continue;
                }
                if let Some(nq) = normals.at_cell(q) {
                    if similar(&np, &nq, &cfg.thresholds) {
                        cell_labels[q] = label;
                        stack.push(q);
                    }
                }
            }
        }
    }
    let mut out = LabelMap::new(layout.rings(), layout.full_steps());
    for (cell, l) in cell_labels.into_iter().enumerate() {
        if l != 0 {
            out.set(layout.index_of(cell), l);
        }
    }
    out
}

/// Nearest donor per receiver along one ring, distance in steps with wrap,
/// ties to the smaller step index. Receivers are left at 0 when the ring has
/// no donor. `donor` yields the label a cell donates, `receiver` marks cells
/// to fill.
fn fill_ring(
    ring: &mut [u32],
    donor: impl Fn(usize) -> Option<u32>,
    receiver: impl Fn(usize) -> bool,
) {
    let n = ring.len();
    let donors: Vec<(usize, u32)> = (0..n).filter_map(|s| donor(s).map(|l| (s, l))).collect();
    let Some(&(first, first_label)) = donors.first() else {
        return;
    };
    // Each gap between consecutive donors (cyclically) is filled from its two
    // ends. With a single donor both ends are the same cell.
    for (k, &(a, la)) in donors.iter().enumerate() {
        let (b, lb) = donors
            .get(k + 1)
            .copied()
            .unwrap_or((first + n, first_label));
        for t in a + 1..b {
            let s = t % n;
            if !receiver(s) {
                continue;
            }
            let (db, df) = (t - a, b - t);
            // On a tie the donor with the smaller step index wins.
            let back_wins = db < df || (db == df && a <= b % n);
            ring[s] = if back_wins { la } else { lb };
        }
    }
}

/// Gives every valid unlabeled cell the label of the nearest labeled cell on
/// its ring.
pub fn backfill(grid: &ScanGrid, labels: &LabelMap) -> LabelMap {
    let mut out = labels.clone();
    let steps = labels.steps;
    for ring in 0..labels.rings {
        let source = labels.ring(ring);
        let slice = &mut out.labels[ring * steps..(ring + 1) * steps];
        fill_ring(
            slice,
            |s| (source[s] != 0).then_some(source[s]),
            |s| source[s] == 0 && grid.is_valid(GridIndex::new(ring, s)),
        );
    }
    out
}

/// Dissolves segments smaller than `min_segment_size` into the nearest
/// surviving label on the same ring, then compacts labels to `1..=k` in
/// their original order. `min_segment_size == 0` is the identity.
pub fn prune_small(labels: &LabelMap, min_segment_size: usize) -> LabelMap {
    if min_segment_size == 0 {
        return labels.clone();
    }
    let max = labels.max_label() as usize;
    let mut counts = vec![0usize; max + 1];
    for &l in &labels.labels {
        counts[l as usize] += 1;
    }
    let dissolved: Vec<bool> = counts
        .iter()
        .enumerate()
        .map(|(l, c)| l != 0 && *c < min_segment_size)
        .collect();
    let mut out = labels.clone();
    let steps = labels.steps;
    for ring in 0..labels.rings {
        let source = labels.ring(ring);
        if !source.iter().any(|&l| dissolved[l as usize]) {
            continue;
        }
        let slice = &mut out.labels[ring * steps..(ring + 1) * steps];
        for (s, l) in source.iter().enumerate() {
            if dissolved[*l as usize] {
                slice[s] = 0;
            }
        }
        fill_ring(
            slice,
            |s| {
                let l = source[s];
                (l != 0 && !dissolved[l as usize]).then_some(l)
            },
            |s| dissolved[source[s] as usize],
        );
    }
    let mut remap = vec![0u32; max + 1];
    let mut next = 0;
    for l in 1..=max {
        if counts[l] > 0 && !dissolved[l] {
            next += 1;
            remap[l] = next;
        }
    }
    for l in &mut out.labels {
        *l = remap[*l as usize];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesher::build_mesh;
    use crate::normals::estimate_normals;
    use crate::scan::SensorConfig;

    fn grid(rings: usize, steps: usize, ranges: Vec<f64>) -> ScanGrid {
        let cfg = SensorConfig::uniform(rings, 10.0, -20.0, steps, 0.5, 50.0, 0.0).unwrap();
        ScanGrid::from_ranges(cfg, ranges, None).unwrap()
    }

    fn full(rings: usize, steps: usize) -> ScanGrid {
        grid(rings, steps, vec![5.0; rings * steps])
    }

    #[test]
    fn config_validation() {
        assert!(SegmenterConfig::default().validate().is_ok());
        let bad = SegmenterConfig {
            thresholds: [0.0, 0.2, 0.2],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SegmenterConfig {
            thresholds: [0.2, 2.5, 0.2],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn backfill_nearest_with_wrap_and_tie() {
        let g = full(1 + 1, 10);
        let mut labels = LabelMap::new(2, 10);
        labels.set(GridIndex::new(0, 0), 1);
        labels.set(GridIndex::new(0, 5), 2);
        let filled = backfill(&g, &labels);
        assert_eq!(filled.ring(0), &[1, 1, 1, 2, 2, 2, 2, 2, 1, 1]);
        // Step 2 is as far from 0 as from 4: the smaller index wins.
        let mut tie = LabelMap::new(2, 10);
        tie.set(GridIndex::new(0, 0), 3);
        tie.set(GridIndex::new(0, 4), 4);
        let filled = backfill(&g, &tie);
        assert_eq!(filled.get(GridIndex::new(0, 2)), 3);
        assert_eq!(filled.get(GridIndex::new(0, 6)), 4);
        assert_eq!(filled.get(GridIndex::new(0, 7)), 3);
        // Ring 1 had no labels.
        assert!(filled.ring(1).iter().all(|l| *l == 0));
    }

    #[test]
    fn backfill_wrap_tie_prefers_smaller_step() {
        let g = full(2, 10);
        let mut labels = LabelMap::new(2, 10);
        labels.set(GridIndex::new(0, 1), 1);
        labels.set(GridIndex::new(0, 7), 2);
        let filled = backfill(&g, &labels);
        // Step 4: distance 3 to both; step 9: wrap distance 2 to step 1, 2 to step 7.
        assert_eq!(filled.get(GridIndex::new(0, 4)), 1);
        assert_eq!(filled.get(GridIndex::new(0, 9)), 1);
    }

    #[test]
    fn backfill_skips_invalid_cells() {
        let mut ranges = vec![5.0; 20];
        ranges[3] = f64::NAN;
        let g = grid(2, 10, ranges);
        let mut labels = LabelMap::new(2, 10);
        labels.set(GridIndex::new(0, 0), 1);
        let filled = backfill(&g, &labels);
        assert_eq!(filled.get(GridIndex::new(0, 3)), 0);
        assert_eq!(filled.get(GridIndex::new(0, 4)), 1);
    }

    #[test]
    fn backfill_identity_when_all_labeled() {
        let g = full(3, 8);
        let mesh = build_mesh(&g, 1).unwrap();
        let normals = estimate_normals(&g, &mesh);
        let labels = segment(&mesh, &normals, &SegmenterConfig::default());
        assert_eq!(labels.labeled_count(), 24);
        assert_eq!(backfill(&g, &labels), labels);
    }

    #[test]
    fn prune_identity_and_absorption() {
        let mut labels = LabelMap::new(2, 600);
        for s in 0..600 {
            labels.set(GridIndex::new(0, s), 1);
            labels.set(
                GridIndex::new(1, s),
                if (300..303).contains(&s) { 2 } else { 1 },
            );
        }
        labels.set(GridIndex::new(1, 500), 3);
        assert_eq!(prune_small(&labels, 0), labels);
        let pruned = prune_small(&labels, 10);
        assert!(pruned.labels().iter().all(|l| *l == 1));

        let all_small = prune_small(&labels, 10_000);
        assert!(all_small.labels().iter().all(|l| *l == 0));
    }

    #[test]
    fn prune_compacts_in_order() {
        let mut labels = LabelMap::new(1, 40);
        for s in 0..40 {
            let l = match s {
                0..=14 => 1,
                15..=16 => 2,
                _ => 3,
            };
            labels.set(GridIndex::new(0, s), l);
        }
        let pruned = prune_small(&labels, 5);
        assert_eq!(pruned.get(GridIndex::new(0, 15)), 1);
        assert_eq!(pruned.get(GridIndex::new(0, 16)), 2);
        assert_eq!(pruned.get(GridIndex::new(0, 30)), 2);
        assert_eq!(pruned.max_label(), 2);
    }
}
