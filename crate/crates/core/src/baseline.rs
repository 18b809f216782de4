//! Classical region-growing segmentation on unorganized points, used as the
//! comparison method: k-nearest-neighbor graph, PCA normals and curvature,
//! growth from the flattest unvisited seed while neighbor normals stay within
//! an angle of the point being expanded.

use std::collections::VecDeque;
use std::num::NonZeroUsize;
use std::time::Instant;

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{elapsed_ms, StageSample};
use crate::scan::{Point3, ScanGrid};
use crate::segmenter::LabelMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Neighborhood size, the query point included.
    pub k_neighbors: usize,
    /// Radians.
    pub angle_threshold: f64,
    /// Points above this curvature join regions but do not expand them.
    pub curvature_threshold: f64,
    pub min_cluster_size: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 30,
            angle_threshold: 3f64.to_radians(),
            curvature_threshold: 0.05,
            min_cluster_size: 50,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors < 3 {
            return Err(Error::param("k_neighbors must be at least 3"));
        }
        if !(self.angle_threshold > 0.0 && self.angle_threshold < std::f64::consts::FRAC_PI_2) {
            return Err(Error::param("angle_threshold must lie in (0, pi/2)"));
        }
        if self.curvature_threshold.is_nan() || self.curvature_threshold < 0.0 {
            return Err(Error::param("curvature_threshold must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BaselineTimings {
    pub knn: f64,
    pub normals: f64,
    pub grow: f64,
    pub total: f64,
}

impl StageSample for BaselineTimings {
    fn stages(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("knn", self.knn),
            ("normals", self.normals),
            ("grow", self.grow),
            ("total", self.total),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOutput {
    /// Per input point, 0 for points in rejected clusters.
    pub labels: Vec<u32>,
    pub normals: Vec<Vector3<f64>>,
    pub curvature: Vec<f64>,
    pub timings: BaselineTimings,
}

/// Smallest-eigenvalue eigenvector of the neighborhood covariance and the
/// surface variation `lambda_min / sum(lambda)`.
pub fn pca_normal(
    points: &[Point3],
    neighborhood: impl IntoIterator<Item = usize> + Clone,
) -> (Vector3<f64>, f64) {
    let mut mean = Vector3::zeros();
    let mut count = 0usize;
    for i in neighborhood.clone() {
        mean += points[i];
        count += 1;
    }
    mean /= count as f64;
    let mut cov = Matrix3::zeros();
    for i in neighborhood {
        let d = points[i] - mean;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let mut min_k = 0;
    for k in 1..3 {
        if eig.eigenvalues[k] < eig.eigenvalues[min_k] {
            min_k = k;
        }
    }
    let sum: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0)).sum();
    let curvature = if sum > 0.0 {
        eig.eigenvalues[min_k].max(0.0) / sum
    } else {
        0.0
    };
    (eig.eigenvectors.column(min_k).into_owned(), curvature)
}

pub fn baseline_segment(points: &[Point3], cfg: &BaselineConfig) -> Result<BaselineOutput> {
    cfg.validate()?;
    let k = cfg.k_neighbors;
    if points.len() < k + 1 {
        return Err(Error::param(format!(
            "region growing needs at least {} points, got {}",
            k + 1,
            points.len()
        )));
    }
    let start = Instant::now();
    let coords: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
    let tree: ImmutableKdTree<f64, 3> = ImmutableKdTree::new_from_slice(&coords);
    let k_nz = NonZeroUsize::new(k).expect("k >= 3");
    let mut neighbors = Vec::with_capacity(points.len() * k);
    for q in &coords {
        let found = tree.nearest_n::<SquaredEuclidean>(q, k_nz);
        neighbors.extend(found.iter().map(|n| n.item as u32));
    }
    let knn_ms = elapsed_ms(start);

    let t = Instant::now();
    let hood = |i: usize| &neighbors[i * k..(i + 1) * k];
    let (normals, curvature): (Vec<_>, Vec<_>) = (0..points.len())
        .map(|i| pca_normal(points, hood(i).iter().map(|j| *j as usize)))
        .unzip();
    let normals_ms = elapsed_ms(t);

    let t = Instant::now();
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|a, b| curvature[*a].total_cmp(&curvature[*b]).then(a.cmp(b)));
    let cos_threshold = cfg.angle_threshold.cos();
    let mut region = vec![u32::MAX; points.len()];
    let mut sizes: Vec<usize> = Vec::new();
    let mut queue = VecDeque::new();
    for &seed in &order {
        if region[seed] != u32::MAX {
            continue;
        }
        let id = sizes.len() as u32;
        sizes.push(1);
        region[seed] = id;
        queue.push_back(seed);
        while let Some(cur) = queue.pop_front() {
            for &nb in hood(cur) {
                let nb = nb as usize;
                if region[nb] != u32::MAX {
                    continue;
                }
                if normals[cur].dot(&normals[nb]).abs() < cos_threshold {
                    continue;
                }
                region[nb] = id;
                sizes[id as usize] += 1;
                if curvature[nb] < cfg.curvature_threshold {
                    queue.push_back(nb);
                }
            }
        }
    }
    let mut remap = vec![0u32; sizes.len()];
    let mut next = 0;
    for (id, size) in sizes.iter().enumerate() {
        if *size >= cfg.min_cluster_size {
            next += 1;
            remap[id] = next;
        }
    }
    let labels = region.iter().map(|r| remap[*r as usize]).collect();
    let grow_ms = elapsed_ms(t);

    Ok(BaselineOutput {
        labels,
        normals,
        curvature,
        timings: BaselineTimings {
            knn: knn_ms,
            normals: normals_ms,
            grow: grow_ms,
            total: elapsed_ms(start),
        },
    })
}

/// Runs the baseline on the valid cells of a scan and writes its labels back
/// onto the grid.
pub fn baseline_label_map(
    grid: &ScanGrid,
    cfg: &BaselineConfig,
) -> Result<(LabelMap, BaselineOutput)> {
    let (points, cells) = grid.valid_points();
    let out = baseline_segment(&points, cfg)?;
    let mut map = LabelMap::new(grid.rings(), grid.steps());
    for (cell, label) in cells.iter().zip(&out.labels) {
        map.set(*cell, *label);
    }
    Ok((map, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plane_grid(nx: usize, ny: usize, spacing: f64, z: f64) -> Vec<Point3> {
        let mut pts = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                pts.push(Vector3::new(i as f64 * spacing, j as f64 * spacing, z));
            }
        }
        pts
    }

    #[test]
    fn pca_normal_on_exact_plane() {
        let n = Vector3::new(1.0, 2.0, 2.0).normalize();
        let u = n.cross(&Vector3::x()).normalize();
        let v = n.cross(&u);
        let pts: Vec<Point3> = (0..25)
            .map(|k| u * (k % 5) as f64 * 0.3 + v * (k / 5) as f64 * 0.2 + n * 4.0)
            .collect();
        let (normal, curvature) = pca_normal(&pts, 0..pts.len());
        assert!(normal.dot(&n).abs() > 1.0 - 1e-6);
        assert!(curvature < 1e-9);
    }

    #[test]
    fn single_plane_is_one_cluster() {
        let pts = plane_grid(20, 20, 0.1, 0.0);
        let out = baseline_segment(&pts, &BaselineConfig::default()).unwrap();
        assert!(out.labels.iter().all(|l| *l == 1));
        assert!(out.timings.total >= out.timings.knn);
    }

    #[test]
    fn separated_parallel_planes_are_two_clusters() {
        let mut pts = plane_grid(15, 15, 0.1, 0.0);
        pts.extend(plane_grid(15, 15, 0.1, 5.0));
        let cfg = BaselineConfig::default();
        // k-NN oracle: no point's neighborhood reaches the other plane.
        let out = baseline_segment(&pts, &cfg).unwrap();
        let (a, b) = out.labels.split_at(225);
        assert!(a.iter().all(|l| *l == a[0]) && a[0] != 0);
        assert!(b.iter().all(|l| *l == b[0]) && b[0] != 0);
        assert_ne!(a[0], b[0]);
    }

    #[test]
    fn random_cloud_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Point3> = (0..10)
            .map(|_| Vector3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let cfg = BaselineConfig {
            k_neighbors: 9,
            min_cluster_size: 1,
            ..Default::default()
        };
        let a = baseline_segment(&pts, &cfg).unwrap();
        let b = baseline_segment(&pts, &cfg).unwrap();
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn too_few_points() {
        let pts = plane_grid(3, 3, 0.1, 0.0);
        assert!(matches!(
            baseline_segment(&pts, &BaselineConfig::default()),
            Err(Error::Parameter(_))
        ));
        let cfg = BaselineConfig {
            k_neighbors: 2,
            ..Default::default()
        };
        assert!(baseline_segment(&plane_grid(10, 10, 0.1, 0.0), &cfg).is_err());
    }
}
