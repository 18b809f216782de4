//! Ray-casting scanner over scenes of geometric primitives.
//!
//! Every beam of the sensor is traced from the origin, the nearest hit is
//! kept, and zero-mean Gaussian noise is added to the range along the beam.
//! Each face of each primitive carries its own ground-truth surface id.

mod generator;
mod scene_file;

pub use generator::{generate_scene, GeneratorParams};
pub use scene_file::{read_scene, scene_from_toml, scene_to_toml, write_scene};

use std::collections::HashSet;

use nalgebra::{Rotation3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::scan::{GridIndex, Point3, ScanGrid, SensorConfig, INVALID};

/// Hits closer than this to the ray origin are ignored (self-intersection guard).
const T_EPSILON: f64 = 1e-9;
const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Infinite plane, or a disc of `radius` around `point` when set.
    Plane {
        point: Point3,
        normal: Vector3<f64>,
        radius: Option<f64>,
    },
    Sphere {
        center: Point3,
        radius: f64,
    },
    /// Solid capped cylinder from `base` to `base + height * axis`.
    Cylinder {
        base: Point3,
        axis: Vector3<f64>,
        radius: f64,
        height: f64,
    },
    /// Oriented box; `euler` is (roll, pitch, yaw) in radians.
    Cuboid {
        center: Point3,
        half_extents: Vector3<f64>,
        euler: [f64; 3],
        rotation: Rotation3<f64>,
    },
    /// Solid cone, `axis` points from the apex toward the base cap.
    Cone {
        apex: Point3,
        axis: Vector3<f64>,
        half_angle: f64,
        height: f64,
    },
}

impl Shape {
    pub fn cuboid(center: Point3, half_extents: Vector3<f64>, euler: [f64; 3]) -> Self {
        Shape::Cuboid {
            center,
            half_extents,
            euler,
            rotation: Rotation3::from_euler_angles(euler[0], euler[1], euler[2]),
        }
    }

    /// Number of faces that receive distinct surface ids.
    pub fn face_count(&self) -> usize {
        match self {
            Shape::Plane { .. } | Shape::Sphere { .. } => 1,
            Shape::Cylinder { .. } => 3,
            Shape::Cuboid { .. } => 6,
            Shape::Cone { .. } => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Shape::Plane { .. } => "plane",
            Shape::Sphere { .. } => "sphere",
            Shape::Cylinder { .. } => "cylinder",
            Shape::Cuboid { .. } => "box",
            Shape::Cone { .. } => "cone",
        }
    }
}

/// Face order of `surface_ids`:
/// plane/sphere `[surface]`, cylinder `[side, base cap, top cap]`,
/// box `[-x, +x, -y, +y, -z, +z]` in the box frame, cone `[lateral, base cap]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    shape: Shape,
    surface_ids: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub surface_id: u32,
    /// Outward unit surface normal at the hit point.
    pub normal: Vector3<f64>,
}

fn is_unit(v: &Vector3<f64>) -> bool {
    (v.norm() - 1.0).abs() <= UNIT_TOLERANCE
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must be positive, got {v}")))
    }
}

impl Primitive {
    pub fn new(shape: Shape, surface_ids: Vec<u32>) -> Result<Self> {
        if surface_ids.len() != shape.face_count() {
            return Err(Error::param(format!(
                "{} needs {} surface ids, got {}",
                shape.kind(),
                shape.face_count(),
                surface_ids.len()
            )));
        }
        if surface_ids.contains(&0) {
            return Err(Error::param("surface id 0 is reserved for no return"));
        }
        match &shape {
            Shape::Plane { normal, radius, .. } => {
                if !is_unit(normal) {
                    return Err(Error::param("plane normal must be unit length"));
                }
                if let Some(r) = radius {
                    positive("plane radius", *r)?;
                }
            }
            Shape::Sphere { radius, .. } => positive("sphere radius", *radius)?,
            Shape::Cylinder {
                axis,
                radius,
                height,
                ..
            } => {
                if !is_unit(axis) {
                    return Err(Error::param("cylinder axis must be unit length"));
                }
                positive("cylinder radius", *radius)?;
                positive("cylinder height", *height)?;
            }
            Shape::Cuboid { half_extents, .. } => {
                for h in half_extents.iter() {
                    positive("box half extent", *h)?;
                }
            }
            Shape::Cone {
                axis,
                half_angle,
                height,
                ..
            } => {
                if !is_unit(axis) {
                    return Err(Error::param("cone axis must be unit length"));
                }
                positive("cone half angle", *half_angle)?;
                if *half_angle >= std::f64::consts::FRAC_PI_2 {
                    return Err(Error::param("cone half angle must be below 90 degrees"));
                }
                positive("cone height", *height)?;
            }
        }
        Ok(Self { shape, surface_ids })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn surface_ids(&self) -> &[u32] {
        &self.surface_ids
    }

    fn hit(&self, t: f64, face: usize, normal: Vector3<f64>) -> Hit {
        Hit {
            t,
            surface_id: self.surface_ids[face],
            normal,
        }
    }

    /// Nearest intersection with `t > 0`; `dir` must be unit length.
    fn intersect_unchecked(&self, origin: &Point3, dir: &Vector3<f64>) -> Option<Hit> {
        match &self.shape {
            Shape::Plane {
                point,
                normal,
                radius,
            } => {
                let t = plane_t(point, normal, origin, dir)?;
                if let Some(r) = radius {
                    if (origin + dir * t - point).norm() > *r {
                        return None;
                    }
                }
                Some(self.hit(t, 0, *normal))
            }
            Shape::Sphere { center, radius } => {
                let oc = origin - center;
                let b = oc.dot(dir);
                let c = oc.norm_squared() - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let t = [-b - sq, -b + sq].into_iter().find(|t| *t > T_EPSILON)?;
                Some(self.hit(t, 0, (origin + dir * t - center) / *radius))
            }
            Shape::Cylinder {
                base,
                axis,
                radius,
                height,
            } => intersect_cylinder(origin, dir, base, axis, *radius, *height)
                .map(|(t, face, n)| self.hit(t, face, n)),
            Shape::Cuboid {
                center,
                half_extents,
                rotation,
                ..
            } => intersect_box(origin, dir, center, half_extents, rotation)
                .map(|(t, face, n)| self.hit(t, face, n)),
            Shape::Cone {
                apex,
                axis,
                half_angle,
                height,
            } => intersect_cone(origin, dir, apex, axis, *half_angle, *height)
                .map(|(t, face, n)| self.hit(t, face, n)),
        }
    }
}

fn plane_t(
    point: &Point3,
    normal: &Vector3<f64>,
    origin: &Point3,
    dir: &Vector3<f64>,
) -> Option<f64> {
    let denom = normal.dot(dir);
    if denom.abs() < 1e-15 {
        return None;
    }
    let t = normal.dot(&(point - origin)) / denom;
    (t > T_EPSILON).then_some(t)
}

fn nearest(
    candidates: impl IntoIterator<Item = (f64, usize, Vector3<f64>)>,
) -> Option<(f64, usize, Vector3<f64>)> {
    candidates
        .into_iter()
        .filter(|c| c.0 > T_EPSILON)
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a.abs() < 1e-14 {
        if b.abs() < 1e-14 {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    // Numerically stable pair.
    let q = -0.5 * (b + b.signum() * sq);
    let mut roots = vec![q / a];
    if q != 0.0 {
        roots.push(c / q);
    }
    roots
}

fn intersect_cylinder(
    origin: &Point3,
    dir: &Vector3<f64>,
    base: &Point3,
    axis: &Vector3<f64>,
    radius: f64,
    height: f64,
) -> Option<(f64, usize, Vector3<f64>)> {
    let rel = origin - base;
    let o_ax = rel.dot(axis);
    let d_ax = dir.dot(axis);
    let o_perp = rel - axis * o_ax;
    let d_perp = dir - axis * d_ax;
    let mut candidates = Vec::with_capacity(4);
    let roots = quadratic_roots(
        d_perp.norm_squared(),
        2.0 * o_perp.dot(&d_perp),
        o_perp.norm_squared() - radius * radius,
    );
    for t in roots {
        let h = o_ax + t * d_ax;
        if (0.0..=height).contains(&h) {
            candidates.push((t, 0, (o_perp + d_perp * t) / radius));
        }
    }
    if d_ax.abs() > 1e-15 {
        for (face, h, n) in [(1, 0.0, -axis), (2, height, *axis)] {
            let t = (h - o_ax) / d_ax;
            if (o_perp + d_perp * t).norm() <= radius {
                candidates.push((t, face, n));
            }
        }
    }
    nearest(candidates)
}

fn intersect_box(
    origin: &Point3,
    dir: &Vector3<f64>,
    center: &Point3,
    half: &Vector3<f64>,
    rotation: &Rotation3<f64>,
) -> Option<(f64, usize, Vector3<f64>)> {
    let o = rotation.inverse_transform_vector(&(origin - center));
    let d = rotation.inverse_transform_vector(dir);
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    let mut near_face = 0;
    let mut far_face = 0;
    for axis in 0..3 {
        if d[axis].abs() < 1e-15 {
            if o[axis].abs() > half[axis] {
                return None;
            }
            continue;
        }
        let t1 = (-half[axis] - o[axis]) / d[axis];
        let t2 = (half[axis] - o[axis]) / d[axis];
        // Entering through the -face when travelling along +axis.
        let (t_in, in_face, t_out, out_face) = if d[axis] > 0.0 {
            (t1, 2 * axis, t2, 2 * axis + 1)
        } else {
            (t2, 2 * axis + 1, t1, 2 * axis)
        };
        if t_in > t_near {
            t_near = t_in;
            near_face = in_face;
        }
        if t_out < t_far {
            t_far = t_out;
            far_face = out_face;
        }
    }
    if t_near > t_far || t_far <= T_EPSILON {
        return None;
    }
    let (t, face) = if t_near > T_EPSILON {
        (t_near, near_face)
    } else {
        (t_far, far_face)
    };
    let mut local = Vector3::zeros();
    local[face / 2] = if face % 2 == 0 { -1.0 } else { 1.0 };
    Some((t, face, rotation * local))
}

fn intersect_cone(
    origin: &Point3,
    dir: &Vector3<f64>,
    apex: &Point3,
    axis: &Vector3<f64>,
    half_angle: f64,
    height: f64,
) -> Option<(f64, usize, Vector3<f64>)> {
    let co = origin - apex;
    let cos2 = half_angle.cos().powi(2);
    let dv = dir.dot(axis);
    let cv = co.dot(axis);
    let mut candidates = Vec::with_capacity(3);
    let roots = quadratic_roots(
        dv * dv - cos2 * dir.norm_squared(),
        2.0 * (dv * cv - cos2 * dir.dot(&co)),
        cv * cv - cos2 * co.norm_squared(),
    );
    for t in roots {
        let h = cv + t * dv;
        if (0.0..=height).contains(&h) {
            let x = co + dir * t;
            let n = x * cos2 - axis * h;
            if n.norm() > 0.0 {
                candidates.push((t, 0, n.normalize()));
            }
        }
    }
    if dv.abs() > 1e-15 {
        let t = (height - cv) / dv;
        let x = co + dir * t;
        let base_radius = height * half_angle.tan();
        if (x - axis * height).norm() <= base_radius {
            candidates.push((t, 1, *axis));
        }
    }
    nearest(candidates)
}

/// Smallest positive hit of a ray with one primitive.
pub fn ray_intersect(prim: &Primitive, origin: &Point3, dir: &Vector3<f64>) -> Result<Option<Hit>> {
    if !is_unit(dir) {
        return Err(Error::contract(format!(
            "ray direction must be unit length, |dir| = {}",
            dir.norm()
        )));
    }
    Ok(prim.intersect_unchecked(origin, dir))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    primitives: Vec<Primitive>,
    seed: u64,
}

impl Scene {
    pub fn new(primitives: Vec<Primitive>, seed: u64) -> Result<Self> {
        let mut seen = HashSet::new();
        for id in primitives.iter().flat_map(|p| p.surface_ids()) {
            if !seen.insert(*id) {
                return Err(Error::param(format!("surface id {id} used more than once")));
            }
        }
        Ok(Self { primitives, seed })
    }

    pub fn empty(seed: u64) -> Self {
        Self {
            primitives: Vec::new(),
            seed,
        }
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Appends a primitive, keeping ids unique.
    pub fn push(&mut self, prim: Primitive) -> Result<()> {
        let mut all = std::mem::take(&mut self.primitives);
        all.push(prim);
        *self = Scene::new(all, self.seed)?;
        Ok(())
    }

    /// Nearest hit over all primitives; the first primitive wins exact ties.
    pub fn trace(&self, origin: &Point3, dir: &Vector3<f64>) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for prim in &self.primitives {
            if let Some(hit) = prim.intersect_unchecked(origin, dir) {
                if best.is_none_or(|b| hit.t < b.t) {
                    best = Some(hit);
                }
            }
        }
        best
    }
}

/// Scans `scene` with `config`. Noise is drawn once per cell in ring-major
/// order from a ChaCha8 stream seeded by the scene, so equal inputs give
/// bit-identical grids.
pub fn scan_scene(scene: &Scene, config: &SensorConfig) -> ScanGrid {
    let rings = config.rings();
    let steps = config.azimuth_steps();
    let mut ranges = vec![INVALID; rings * steps];
    let mut labels = vec![0u32; rings * steps];
    let sigma = config.noise_sigma();
    let noise = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma"));
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed());
    let origin = Point3::zeros();
    for ring in 0..rings {
        for step in 0..steps {
            let idx = GridIndex::new(ring, step);
            let offset = ring * steps + step;
            let perturbation = noise.as_ref().map_or(0.0, |n| n.sample(&mut rng));
            if let Some(hit) = scene.trace(&origin, &config.direction(idx)) {
                let r = hit.t + perturbation;
                if config.in_range(r) {
                    ranges[offset] = r;
                    labels[offset] = hit.surface_id;
                }
            }
        }
    }
    ScanGrid::from_ranges(config.clone(), ranges, Some(labels)).expect("dimensions match config")
}
