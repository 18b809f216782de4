//! Per-node normals from weighted cross products of ordered neighbor vectors.
//!
//! For a node `p` with neighbors `q_0..q_k` in slot order, the vectors
//! `V_a = q_a - p` are paired circularly (`V_0 x V_1`, ..., `V_k x V_0`; a
//! node with exactly two neighbors contributes the single pair `V_0 x V_1`).
//! Each cross product is weighted by `1 / (|V_a| + |V_b|)`, so a neighbor
//! across a depth discontinuity pulls less. The weighted mean is normalized
//! and flipped to face the sensor.

use std::fmt::Write as _;

use nalgebra::Vector3;

use crate::mesher::{CellLayout, Mesh, SLOT_COUNT};
use crate::scan::{GridIndex, Point3, ScanGrid};

const DEGENERATE_MAGNITUDE: f64 = 1e-12;

/// Unit normal per sub-sampled cell; `None` for non-nodes and nodes with
/// fewer than two neighbors or fully degenerate geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    layout: CellLayout,
    normals: Vec<Option<Vector3<f64>>>,
}

impl NormalMap {
    /// Map over `layout` from explicit per-cell normals (ring-major compact cells).
    pub fn from_cells(
        layout: CellLayout,
        normals: Vec<Option<Vector3<f64>>>,
    ) -> crate::Result<Self> {
        if normals.len() != layout.cell_count() {
            return Err(crate::Error::Parameter(format!(
                "expected {} cells, got {}",
                layout.cell_count(),
                normals.len()
            )));
        }
        Ok(Self { layout, normals })
    }

    pub fn layout(&self) -> &CellLayout {
        &self.layout
    }

    #[inline]
    pub fn at_cell(&self, cell: usize) -> Option<Vector3<f64>> {
        self.normals[cell]
    }

    pub fn get(&self, idx: GridIndex) -> Option<Vector3<f64>> {
        self.layout.cell_of(idx).and_then(|c| self.normals[c])
    }

    pub fn len(&self) -> usize {
        self.normals.iter().filter(|n| n.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Present normals in ring-major order.
    pub fn iter(&self) -> impl Iterator<Item = (GridIndex, Vector3<f64>)> + '_ {
        self.normals
            .iter()
            .enumerate()
            .filter_map(|(c, n)| n.map(|n| (self.layout.index_of(c), n)))
    }

    /// Debug dump, one `i j nx ny nz` line per normal.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (idx, n) in self.iter() {
            let _ = writeln!(out, "{} {} {} {} {}", idx.ring, idx.step, n.x, n.y, n.z);
        }
        out
    }
}

/// Weighted cross-product normal of `center` from its ordered neighbors.
pub fn weighted_normal(center: &Point3, neighbors: &[Point3]) -> Option<Vector3<f64>> {
    let count = neighbors.len();
    if count < 2 {
        return None;
    }
    let mut vectors = [Vector3::zeros(); SLOT_COUNT];
    let mut lengths = [0.0; SLOT_COUNT];
    for (k, q) in neighbors.iter().enumerate() {
        vectors[k] = q - center;
        lengths[k] = vectors[k].norm();
    }
    let pairs = if count == 2 { 1 } else { count };
    let mut acc = Vector3::zeros();
    let mut weight_sum = 0.0;
    for a in 0..pairs {
        let b = (a + 1) % count;
        let span = lengths[a] + lengths[b];
        if span <= 0.0 {
            continue;
        }
        let w = 1.0 / span;
        acc += vectors[a].cross(&vectors[b]) * w;
        weight_sum += w;
    }
    if weight_sum == 0.0 {
        return None;
    }
    let mean = acc / weight_sum;
    let magnitude = mean.norm();
    // A NaN magnitude counts as degenerate.
    if magnitude.is_nan() || magnitude < DEGENERATE_MAGNITUDE {
        return None;
    }
    let n = mean / magnitude;
    Some(if n.dot(center) > 0.0 { -n } else { n })
}

fn normal_at(positions: &[Option<Point3>], mesh: &Mesh, cell: usize) -> Option<Vector3<f64>> {
    let center = positions[cell]?;
    let mut neighbors = [Vector3::zeros(); SLOT_COUNT];
    let mut count = 0;
    for n in mesh.neighbor_cells(cell) {
        neighbors[count] = positions[n].expect("mesh neighbors are valid cells");
        count += 1;
    }
    weighted_normal(&center, &neighbors[..count])
}

fn positions(grid: &ScanGrid, mesh: &Mesh) -> Vec<Option<Point3>> {
    let layout = mesh.layout();
    (0..layout.cell_count())
        .map(|c| {
            if mesh.is_node(c) {
                grid.point(layout.index_of(c))
            } else {
                None
            }
        })
        .collect()
}

/// Normal of a single node, `None` when the node is absent or degenerate.
pub fn point_normal(grid: &ScanGrid, mesh: &Mesh, node: GridIndex) -> Option<Vector3<f64>> {
    let cell = mesh.layout().cell_of(node)?;
    if !mesh.is_node(cell) {
        return None;
    }
    let center = grid.point(node)?;
    let neighbors: Vec<Point3> = mesh
        .neighbors(node)
        .into_iter()
        .map(|q| grid.point(q).expect("mesh neighbors are valid cells"))
        .collect();
    weighted_normal(&center, &neighbors)
}

pub fn estimate_normals(grid: &ScanGrid, mesh: &Mesh) -> NormalMap {
    let positions = positions(grid, mesh);
    let normals = (0..positions.len())
        .map(|c| normal_at(&positions, mesh, c))
        .collect();
    NormalMap {
        layout: mesh.layout().clone(),
        normals,
    }
}
