//! Text file formats.
//!
//! Scan grid (`LSEG1`):
//!
//! ```text
//! LSEG1 <rings> <steps> <r_min> <r_max>
//! <ring elevations in degrees, top to bottom>
//! <rings lines of steps ranges in meters, `nan` for no return>
//! LABELS                       (optional)
//! <rings lines of steps integer truth ids, 0 = none>
//! ```
//!
//! Label grid (`LLAB1`): a `LLAB1 <rings> <steps>` header followed by
//! `rings` lines of `steps` integer labels.
//!
//! Labeled clouds are written as ASCII PLY (`x y z label red green blue`) or
//! as `i j x y z label` text lines. All writers go through a temporary file
//! and a rename, so a failed command leaves no partial output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesher::Mesh;
use crate::normals::NormalMap;
use crate::scan::{GridIndex, ScanGrid, SensorConfig};
use crate::segmenter::LabelMap;

pub const SCAN_MAGIC: &str = "LSEG1";
pub const LABEL_MAGIC: &str = "LLAB1";

fn fmt_range(r: f64) -> String {
    if r.is_finite() {
        format!("{r}")
    } else {
        "nan".to_string()
    }
}

fn join_row<T>(row: &[T], f: impl Fn(&T) -> String) -> String {
    row.iter().map(f).collect::<Vec<_>>().join(" ")
}

pub fn scan_to_string(grid: &ScanGrid) -> String {
    let cfg = grid.config();
    let mut out = format!(
        "{SCAN_MAGIC} {} {} {} {}\n",
        cfg.rings(),
        cfg.azimuth_steps(),
        cfg.r_min(),
        cfg.r_max()
    );
    out.push_str(&join_row(cfg.ring_elevations(), |e| {
        format!("{}", e.to_degrees())
    }));
    out.push('\n');
    let steps = grid.steps();
    for ring in grid.ranges().chunks(steps) {
        out.push_str(&join_row(ring, |r| fmt_range(*r)));
        out.push('\n');
    }
    if let Some(labels) = grid.truth_labels() {
        out.push_str("LABELS\n");
        for ring in labels.chunks(steps) {
            out.push_str(&join_row(ring, |l| l.to_string()));
            out.push('\n');
        }
    }
    out
}

fn label_rows_to_string(out: &mut String, labels: &LabelMap) {
    for ring in 0..labels.rings() {
        out.push_str(&join_row(labels.ring(ring), |l| l.to_string()));
        out.push('\n');
    }
}

pub fn labels_to_string(labels: &LabelMap) -> String {
    let mut out = format!("{LABEL_MAGIC} {} {}\n", labels.rings(), labels.steps());
    label_rows_to_string(&mut out, labels);
    out
}

struct Lines<'a> {
    path: &'a Path,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(path: &'a Path, text: &'a str) -> Self {
        Self {
            path,
            inner: text.lines().enumerate(),
            line: 0,
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_owned(),
            line: self.line,
            msg: msg.into(),
        }
    }

    fn next_line(&mut self) -> Result<&'a str> {
        loop {
            match self.inner.next() {
                Some((k, l)) => {
                    self.line = k + 1;
                    if !l.trim().is_empty() {
                        return Ok(l);
                    }
                }
                None => return Err(self.err("unexpected end of file")),
            }
        }
    }

    fn next_nonempty(&mut self) -> Option<&'a str> {
        for (k, l) in self.inner.by_ref() {
            self.line = k + 1;
            if !l.trim().is_empty() {
                return Some(l);
            }
        }
        None
    }

    fn row<T>(&mut self, expected: usize, parse: impl Fn(&str) -> Option<T>) -> Result<Vec<T>> {
        let line = self.next_line()?;
        let values = line
            .split_whitespace()
            .map(|tok| parse(tok).ok_or_else(|| self.err(format!("bad value `{tok}`"))))
            .collect::<Result<Vec<T>>>()?;
        if values.len() != expected {
            return Err(self.err(format!("expected {expected} values, got {}", values.len())));
        }
        Ok(values)
    }
}

fn parse_f64(tok: &str) -> Option<f64> {
    if tok.eq_ignore_ascii_case("nan") {
        Some(f64::NAN)
    } else {
        tok.parse().ok()
    }
}

fn parse_header<'a>(lines: &mut Lines<'a>, magic: &str, extra: usize) -> Result<Vec<&'a str>> {
    let header = lines.next_line()?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.first() != Some(&magic) {
        return Err(lines.err(format!("missing `{magic}` magic token")));
    }
    if fields.len() != 3 + extra {
        return Err(lines.err(format!("`{magic}` header needs {} fields", 2 + extra)));
    }
    Ok(fields)
}

fn parse_dims(lines: &Lines<'_>, fields: &[&str]) -> Result<(usize, usize)> {
    let rings = fields[1].parse().map_err(|_| lines.err("bad ring count"))?;
    let steps = fields[2].parse().map_err(|_| lines.err("bad step count"))?;
    Ok((rings, steps))
}

fn read_label_rows(lines: &mut Lines<'_>, rings: usize, steps: usize) -> Result<Vec<u32>> {
    let mut labels = Vec::with_capacity(rings * steps);
    for _ in 0..rings {
        labels.extend(lines.row(steps, |t| t.parse::<u32>().ok())?);
    }
    Ok(labels)
}

pub fn parse_scan(path: &Path, text: &str) -> Result<ScanGrid> {
    let mut lines = Lines::new(path, text);
    let fields = parse_header(&mut lines, SCAN_MAGIC, 2)?;
    let (rings, steps) = parse_dims(&lines, &fields)?;
    let r_min = parse_f64(fields[3]).ok_or_else(|| lines.err("bad r_min"))?;
    let r_max = parse_f64(fields[4]).ok_or_else(|| lines.err("bad r_max"))?;
    let elevations = lines.row(rings, parse_f64)?;
    let config = SensorConfig::new(
        elevations.iter().map(|d| d.to_radians()).collect(),
        steps,
        r_min,
        r_max,
        0.0,
    )
    .map_err(|e| lines.err(e.to_string()))?;
    let mut ranges = Vec::with_capacity(rings * steps);
    for _ in 0..rings {
        ranges.extend(lines.row(steps, parse_f64)?);
    }
    let truth = match lines.next_nonempty() {
        None => None,
        Some(l) if l.trim() == "LABELS" => Some(read_label_rows(&mut lines, rings, steps)?),
        Some(_) => return Err(lines.err("expected `LABELS` block or end of file")),
    };
    if lines.next_nonempty().is_some() {
        return Err(lines.err("trailing content"));
    }
    ScanGrid::from_ranges(config, ranges, truth)
}

pub fn parse_labels(path: &Path, text: &str) -> Result<LabelMap> {
    let mut lines = Lines::new(path, text);
    let fields = parse_header(&mut lines, LABEL_MAGIC, 0)?;
    let (rings, steps) = parse_dims(&lines, &fields)?;
    let labels = read_label_rows(&mut lines, rings, steps)?;
    if lines.next_nonempty().is_some() {
        return Err(lines.err("trailing content"));
    }
    LabelMap::from_labels(rings, steps, labels)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn read_scan(path: &Path) -> Result<ScanGrid> {
    parse_scan(path, &read_text(path)?)
}

/// Reads a label grid, or the truth block of a scan file.
pub fn read_label_source(path: &Path) -> Result<LabelMap> {
    let text = read_text(path)?;
    let magic = text.split_whitespace().next().unwrap_or("");
    match magic {
        LABEL_MAGIC => parse_labels(path, &text),
        SCAN_MAGIC => {
            let scan = parse_scan(path, &text)?;
            LabelMap::from_truth(&scan).ok_or_else(|| Error::Parse {
                path: path.to_owned(),
                line: 0,
                msg: "scan file has no LABELS block".into(),
            })
        }
        _ => Err(Error::Parse {
            path: path.to_owned(),
            line: 1,
            msg: format!("expected `{LABEL_MAGIC}` or `{SCAN_MAGIC}` magic token"),
        }),
    }
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_owned(),
        source,
    };
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::param(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    fs::write(&tmp, contents).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(e)
    })
}

pub fn write_scan(path: &Path, grid: &ScanGrid) -> Result<()> {
    write_atomic(path, &scan_to_string(grid))
}

pub fn write_labels(path: &Path, labels: &LabelMap) -> Result<()> {
    write_atomic(path, &labels_to_string(labels))
}

/// Deterministic label color; label 0 is gray.
pub fn label_color(label: u32) -> [u8; 3] {
    if label == 0 {
        return [128, 128, 128];
    }
    // Golden-angle hue walk, full saturation, alternating brightness.
    let hue = (label as f64 * 0.618_033_988_749_895).fract() * 6.0;
    let value = if label.is_multiple_of(2) { 0.75 } else { 1.0 };
    let sector = hue.floor() as u32;
    let f = hue - hue.floor();
    let (q, t) = (1.0 - f, f);
    let (r, g, b) = match sector {
        0 => (1.0, t, 0.0),
        1 => (q, 1.0, 0.0),
        2 => (0.0, 1.0, t),
        3 => (0.0, q, 1.0),
        4 => (t, 0.0, 1.0),
        _ => (1.0, 0.0, q),
    };
    [r, g, b].map(|c: f64| (c * value * 255.0).round() as u8)
}

fn ply_header(vertices: usize, properties: &[&str], faces: Option<usize>) -> String {
    let mut out = String::from("ply\nformat ascii 1.0\ncomment lidarseg\n");
    let _ = writeln!(out, "element vertex {vertices}");
    for p in properties {
        let _ = writeln!(out, "property {p}");
    }
    if let Some(f) = faces {
        let _ = writeln!(
            out,
            "element face {f}\nproperty list uchar int vertex_indices"
        );
    }
    out.push_str("end_header\n");
    out
}

/// Valid cells as an ASCII PLY with per-point label and palette color.
pub fn labeled_cloud_ply(grid: &ScanGrid, labels: &LabelMap) -> String {
    let (points, cells) = grid.valid_points();
    let mut out = ply_header(
        points.len(),
        &[
            "float x",
            "float y",
            "float z",
            "uint label",
            "uchar red",
            "uchar green",
            "uchar blue",
        ],
        None,
    );
    for (p, idx) in points.iter().zip(&cells) {
        let l = labels.get(*idx);
        let [r, g, b] = label_color(l);
        let _ = writeln!(
            out,
            "{} {} {} {l} {r} {g} {b}",
            p.x as f32, p.y as f32, p.z as f32
        );
    }
    out
}

/// `i j x y z label` per valid cell.
pub fn labeled_cloud_text(grid: &ScanGrid, labels: &LabelMap) -> String {
    let (points, cells) = grid.valid_points();
    let mut out = String::new();
    for (p, idx) in points.iter().zip(&cells) {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {}",
            idx.ring,
            idx.step,
            p.x,
            p.y,
            p.z,
            labels.get(*idx)
        );
    }
    out
}

/// Mesh nodes and triangles as ASCII PLY, with normals when given (zero for
/// nodes without one).
pub fn mesh_ply(grid: &ScanGrid, mesh: &Mesh, normals: Option<&NormalMap>) -> String {
    let nodes: Vec<GridIndex> = mesh.nodes().collect();
    let mut vertex_of = std::collections::HashMap::with_capacity(nodes.len());
    for (k, n) in nodes.iter().enumerate() {
        vertex_of.insert(*n, k);
    }
    let tris = mesh.triangles();
    let mut props = vec!["float x", "float y", "float z"];
    if normals.is_some() {
        props.extend(["float nx", "float ny", "float nz"]);
    }
    let mut out = ply_header(nodes.len(), &props, Some(tris.len()));
    for idx in &nodes {
        let p = grid.point(*idx).expect("mesh nodes are valid");
        let _ = write!(out, "{} {} {}", p.x as f32, p.y as f32, p.z as f32);
        if let Some(map) = normals {
            let n = map.get(*idx).unwrap_or_default();
            let _ = write!(out, " {} {} {}", n.x as f32, n.y as f32, n.z as f32);
        }
        out.push('\n');
    }
    for t in &tris {
        let _ = writeln!(
            out,
            "3 {} {} {}",
            vertex_of[&t[0]], vertex_of[&t[1]], vertex_of[&t[2]]
        );
    }
    out
}
