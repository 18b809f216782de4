//! Cylindrical six-neighbor mesh over the sub-sampled scan grid.
//!
//! Every kept cell `(i, j)` is joined with `(i+1, j)`, `(i+1, j+)` and
//! `(i, j+)`, where `j+` is the next kept azimuth step (the last kept step
//! wraps to step 0). The bottom ring only joins horizontally. Edges are made
//! only between valid cells. Each node stores its neighbors in the fixed
//! circular slot order
//!
//! ```text
//! N0 (i+1, j)   N1 (i+1, j+)   N2 (i, j+)
//! N3 (i-1, j)   N4 (i-1, j-)   N5 (i, j-)
//! ```
//!
//! which is the order the normal estimator walks around a node.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scan::{subsample_steps, GridIndex, Point3, ScanGrid};

pub const SLOT_COUNT: usize = 6;

/// Ring/column offsets of slots N0..N5; the column offset is in kept columns.
const SLOT_OFFSETS: [(isize, isize); SLOT_COUNT] =
    [(1, 0), (1, 1), (0, 1), (-1, 0), (-1, -1), (0, -1)];

/// Layout of the sub-sampled cells shared by the mesh and the per-node maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellLayout {
    rings: usize,
    full_steps: usize,
    interval: usize,
    kept_steps: Vec<usize>,
}

impl CellLayout {
    pub fn rings(&self) -> usize {
        self.rings
    }

    /// Azimuth steps of the full-resolution grid.
    pub fn full_steps(&self) -> usize {
        self.full_steps
    }

    pub fn interval(&self) -> usize {
        self.interval
    }

    pub fn kept_steps(&self) -> &[usize] {
        &self.kept_steps
    }

    pub fn columns(&self) -> usize {
        self.kept_steps.len()
    }

    /// Number of sub-sampled cells, valid or not.
    pub fn cell_count(&self) -> usize {
        self.rings * self.columns()
    }

    #[inline]
    pub fn cell(&self, ring: usize, column: usize) -> usize {
        ring * self.columns() + column
    }

    #[inline]
    pub fn index_of(&self, cell: usize) -> GridIndex {
        let k = self.columns();
        GridIndex::new(cell / k, self.kept_steps[cell % k])
    }

    /// Compact cell of a grid index when its step is a kept step.
    pub fn cell_of(&self, idx: GridIndex) -> Option<usize> {
        if idx.ring >= self.rings || idx.step >= self.full_steps || !idx.step.is_multiple_of(self.interval) {
            return None;
        }
        Some(self.cell(idx.ring, idx.step / self.interval))
    }

    /// Compact cell reached from `cell` through `slot`, ignoring validity.
    #[inline]
    fn slot_target(&self, cell: usize, slot: usize) -> Option<usize> {
        let k = self.columns() as isize;
        let ring = (cell / self.columns()) as isize;
        let col = (cell % self.columns()) as isize;
        let (dr, dc) = SLOT_OFFSETS[slot];
        let r = ring + dr;
        if r < 0 || r >= self.rings as isize {
            return None;
        }
        Some(self.cell(r as usize, (col + dc).rem_euclid(k) as usize))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshOptions {
    /// Skip edges longer than this many meters. Off by default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_edge_length: Option<f64>,
}

/// Map from each valid sub-sampled node to its ordered neighbor slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    layout: CellLayout,
    valid: Vec<bool>,
    slots: Vec<u8>,
}

impl Mesh {
    pub fn layout(&self) -> &CellLayout {
        &self.layout
    }

    pub fn interval(&self) -> usize {
        self.layout.interval
    }

    #[inline]
    pub fn is_node(&self, cell: usize) -> bool {
        self.valid[cell]
    }

    pub fn contains(&self, idx: GridIndex) -> bool {
        self.layout.cell_of(idx).is_some_and(|c| self.valid[c])
    }

    /// Compact cells of all nodes in ring-major order.
    pub fn node_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.valid.len()).filter(|c| self.valid[*c])
    }

    pub fn nodes(&self) -> impl Iterator<Item = GridIndex> + '_ {
        self.node_cells().map(|c| self.layout.index_of(c))
    }

    pub fn node_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn edge_count(&self) -> usize {
        self.slots
            .iter()
            .map(|s| s.count_ones() as usize)
            .sum::<usize>()
            / 2
    }

    /// Occupied-slot bitmask of `cell`, bit `k` for slot N`k`.
    #[inline]
    pub fn slot_mask(&self, cell: usize) -> u8 {
        self.slots[cell]
    }

    /// Neighbor cells of `cell` in slot order.
    #[inline]
    pub fn neighbor_cells(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        let mask = self.slots[cell];
        (0..SLOT_COUNT)
            .filter(move |s| mask & (1 << s) != 0)
            .map(move |s| {
                self.layout
                    .slot_target(cell, s)
                    .expect("occupied slot is in bounds")
            })
    }

    /// Neighbors of a node in slot order; empty for non-nodes.
    pub fn neighbors(&self, idx: GridIndex) -> Vec<GridIndex> {
        match self.layout.cell_of(idx) {
            Some(c) if self.valid[c] => self
                .neighbor_cells(c)
                .map(|n| self.layout.index_of(n))
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn degree(&self, idx: GridIndex) -> usize {
        self.layout
            .cell_of(idx)
            .map_or(0, |c| self.slots[c].count_ones() as usize)
    }

    /// Triangles `(i,j) (i+1,j) (i+1,j+)` and `(i,j) (i+1,j+) (i,j+)` whose three edges exist.
    pub fn triangles(&self) -> Vec<[GridIndex; 3]> {
        let mut tris = Vec::new();
        let layout = &self.layout;
        let k = layout.columns();
        for ring in 0..layout.rings.saturating_sub(1) {
            for col in 0..k {
                let a = layout.cell(ring, col);
                let b = layout.cell(ring + 1, col);
                let c = layout.cell(ring + 1, (col + 1) % k);
                let d = layout.cell(ring, (col + 1) % k);
                let sa = self.slots[a];
                if sa & 0b011 == 0b011 && self.slots[b] & 0b100 != 0 {
                    tris.push([a, b, c].map(|x| layout.index_of(x)));
                }
                if sa & 0b110 == 0b110 && self.slots[d] & 0b001 != 0 {
                    tris.push([a, c, d].map(|x| layout.index_of(x)));
                }
            }
        }
        tris
    }

    /// Text adjacency list, one `i j : i0 j0 i1 j1 ...` line per node.
    pub fn to_adjacency_text(&self) -> String {
        let mut out = String::new();
        for cell in self.node_cells() {
            let idx = self.layout.index_of(cell);
            let _ = write!(out, "{} {} :", idx.ring, idx.step);
            for n in self.neighbor_cells(cell) {
                let q = self.layout.index_of(n);
                let _ = write!(out, " {} {}", q.ring, q.step);
            }
            out.push('\n');
        }
        out
    }
}

/// Column-at-a-time mesh construction. Each pushed column is joined to the
/// previous one; `finish` closes the cylinder by joining the last column to
/// the first.
#[derive(Debug)]
pub struct MeshBuilder {
    layout: CellLayout,
    options: MeshOptions,
    valid: Vec<bool>,
    slots: Vec<u8>,
    first: Vec<Option<Point3>>,
    previous: Vec<Option<Point3>>,
    pushed: usize,
}

impl MeshBuilder {
    /// `kept_steps` lists the azimuth steps that will be pushed, in order.
    pub fn new(
        rings: usize,
        full_steps: usize,
        interval: usize,
        kept_steps: Vec<usize>,
        options: MeshOptions,
    ) -> Result<Self> {
        if rings < 2 {
            return Err(Error::param("mesh needs at least 2 rings"));
        }
        if kept_steps.len() < 2 {
            return Err(Error::param("mesh needs at least 2 kept azimuth steps"));
        }
        let layout = CellLayout {
            rings,
            full_steps,
            interval,
            kept_steps,
        };
        let n = layout.cell_count();
        Ok(Self {
            layout,
            options,
            valid: vec![false; n],
            slots: vec![0; n],
            first: Vec::new(),
            previous: Vec::new(),
            pushed: 0,
        })
    }

    fn close_enough(&self, a: &Point3, b: &Point3) -> bool {
        self.options
            .max_edge_length
            .is_none_or(|limit| (a - b).norm() <= limit)
    }

    fn join(&mut self, a: (usize, &Option<Point3>), b: (usize, &Option<Point3>), slot_a: usize) {
        if let (Some(pa), Some(pb)) = (a.1, b.1) {
            if self.close_enough(pa, pb) {
                self.slots[a.0] |= 1 << slot_a;
                self.slots[b.0] |= 1 << ((slot_a + 3) % SLOT_COUNT);
            }
        }
    }

    /// Joins columns `prev_col` and `col`: diagonal `(i,prev)-(i+1,col)` and
    /// horizontal `(i,prev)-(i,col)`.
    fn join_columns(
        &mut self,
        prev_col: usize,
        prev: &[Option<Point3>],
        col: usize,
        cur: &[Option<Point3>],
        horizontal: bool,
    ) {
        let rings = self.layout.rings;
        for ring in 0..rings {
            let a = self.layout.cell(ring, prev_col);
            if ring + 1 < rings {
                let b = self.layout.cell(ring + 1, col);
                self.join((a, &prev[ring]), (b, &cur[ring + 1]), 1);
            }
            if horizontal {
                let b = self.layout.cell(ring, col);
                self.join((a, &prev[ring]), (b, &cur[ring]), 2);
            }
        }
    }

    /// Adds the next kept column; `None` marks an INVALID cell.
    pub fn push_column(&mut self, column: &[Option<Point3>]) -> Result<()> {
        let rings = self.layout.rings;
        if column.len() != rings {
            return Err(Error::param(format!(
                "column has {} cells, expected {rings}",
                column.len()
            )));
        }
        let col = self.pushed;
        if col >= self.layout.columns() {
            return Err(Error::param("more columns pushed than kept steps"));
        }
        for (ring, p) in column.iter().enumerate() {
            self.valid[self.layout.cell(ring, col)] = p.is_some();
        }
        for ring in 0..rings.saturating_sub(1) {
            let a = self.layout.cell(ring, col);
            let b = self.layout.cell(ring + 1, col);
            self.join((a, &column[ring]), (b, &column[ring + 1]), 0);
        }
        if col > 0 {
            let prev = std::mem::take(&mut self.previous);
            self.join_columns(col - 1, &prev, col, column, true);
        } else {
            self.first = column.to_vec();
        }
        self.previous = column.to_vec();
        self.pushed += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<Mesh> {
        let k = self.layout.columns();
        if self.pushed != k {
            return Err(Error::param(format!(
                "mesh expects {k} columns, got {}",
                self.pushed
            )));
        }
        let prev = std::mem::take(&mut self.previous);
        let first = std::mem::take(&mut self.first);
        // With two columns the wrap horizontal is the edge already made.
        self.join_columns(k - 1, &prev, 0, &first, k > 2);
        Ok(Mesh {
            layout: self.layout,
            valid: self.valid,
            slots: self.slots,
        })
    }
}

pub fn build_mesh(grid: &ScanGrid, interval: usize) -> Result<Mesh> {
    build_mesh_with(grid, interval, MeshOptions::default())
}

pub fn build_mesh_with(grid: &ScanGrid, interval: usize, options: MeshOptions) -> Result<Mesh> {
    let kept = subsample_steps(grid.config(), interval)?;
    let mut builder =
        MeshBuilder::new(grid.rings(), grid.steps(), interval, kept.clone(), options)?;
    let mut column = Vec::with_capacity(grid.rings());
    for step in kept {
        column.clear();
        column.extend((0..grid.rings()).map(|ring| grid.point(GridIndex::new(ring, step))));
        builder.push_column(&column)?;
    }
    builder.finish()
}
