//! TOML scene documents.
//!
//! ```toml
//! seed = 7
//!
//! [[primitive]]
//! kind = "plane"
//! point = [0.0, 0.0, -1.8]
//! normal = [0.0, 0.0, 1.0]
//! ids = [1]
//! # radius = 30.0        optional, bounds the plane to a disc
//!
//! [[primitive]]
//! kind = "box"
//! center = [6.0, 1.0, -1.2]
//! half_extents = [0.8, 0.5, 0.6]
//! rotation_deg = [0.0, 0.0, 30.0]   # roll, pitch, yaw
//! ids = [2, 3, 4, 5, 6, 7]          # -x, +x, -y, +y, -z, +z
//! ```
//!
//! Other kinds: `sphere` (`center`, `radius`, 1 id), `cylinder` (`base`,
//! `axis`, `radius`, `height`, ids side/base/top), `cone` (`apex`, `axis`
//! pointing apex to base, `half_angle_deg`, `height`, ids lateral/base).
//! Direction vectors are normalized on load.

use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{Primitive, Scene, Shape};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct SceneDoc {
    seed: u64,
    #[serde(default, rename = "primitive")]
    primitives: Vec<PrimitiveDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum PrimitiveDoc {
    Plane {
        point: [f64; 3],
        normal: [f64; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
        ids: Vec<u32>,
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
        ids: Vec<u32>,
    },
    Cylinder {
        base: [f64; 3],
        axis: [f64; 3],
        radius: f64,
        height: f64,
        ids: Vec<u32>,
    },
    #[serde(rename = "box")]
    Cuboid {
        center: [f64; 3],
        half_extents: [f64; 3],
        #[serde(default)]
        rotation_deg: [f64; 3],
        ids: Vec<u32>,
    },
    Cone {
        apex: [f64; 3],
        axis: [f64; 3],
        half_angle_deg: f64,
        height: f64,
        ids: Vec<u32>,
    },
}

fn vec3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::from(a)
}

fn unit(a: [f64; 3], what: &str) -> Result<Vector3<f64>> {
    let v = vec3(a);
    let n = v.norm();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::param(format!("{what} must be a nonzero vector")));
    }
    Ok(v / n)
}

fn arr(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

impl PrimitiveDoc {
    fn into_primitive(self) -> Result<Primitive> {
        let (shape, ids) = match self {
            PrimitiveDoc::Plane {
                point,
                normal,
                radius,
                ids,
            } => (
                Shape::Plane {
                    point: vec3(point),
                    normal: unit(normal, "plane normal")?,
                    radius,
                },
                ids,
            ),
            PrimitiveDoc::Sphere {
                center,
                radius,
                ids,
            } => (
                Shape::Sphere {
                    center: vec3(center),
                    radius,
                },
                ids,
            ),
            PrimitiveDoc::Cylinder {
                base,
                axis,
                radius,
                height,
                ids,
            } => (
                Shape::Cylinder {
                    base: vec3(base),
                    axis: unit(axis, "cylinder axis")?,
                    radius,
                    height,
                },
                ids,
            ),
            PrimitiveDoc::Cuboid {
                center,
                half_extents,
                rotation_deg,
                ids,
            } => (
                Shape::cuboid(
                    vec3(center),
                    vec3(half_extents),
                    rotation_deg.map(f64::to_radians),
                ),
                ids,
            ),
            PrimitiveDoc::Cone {
                apex,
                axis,
                half_angle_deg,
                height,
                ids,
            } => (
                Shape::Cone {
                    apex: vec3(apex),
                    axis: unit(axis, "cone axis")?,
                    half_angle: half_angle_deg.to_radians(),
                    height,
                },
                ids,
            ),
        };
        Primitive::new(shape, ids)
    }

    fn from_primitive(p: &Primitive) -> Self {
        let ids = p.surface_ids().to_vec();
        match p.shape() {
            Shape::Plane {
                point,
                normal,
                radius,
            } => PrimitiveDoc::Plane {
                point: arr(point),
                normal: arr(normal),
                radius: *radius,
                ids,
            },
            Shape::Sphere { center, radius } => PrimitiveDoc::Sphere {
                center: arr(center),
                radius: *radius,
                ids,
            },
            Shape::Cylinder {
                base,
                axis,
                radius,
                height,
            } => PrimitiveDoc::Cylinder {
                base: arr(base),
                axis: arr(axis),
                radius: *radius,
                height: *height,
                ids,
            },
            Shape::Cuboid {
                center,
                half_extents,
                euler,
                ..
            } => PrimitiveDoc::Cuboid {
                center: arr(center),
                half_extents: arr(half_extents),
                rotation_deg: euler.map(f64::to_degrees),
                ids,
            },
            Shape::Cone {
                apex,
                axis,
                half_angle,
                height,
            } => PrimitiveDoc::Cone {
                apex: arr(apex),
                axis: arr(axis),
                half_angle_deg: half_angle.to_degrees(),
                height: *height,
                ids,
            },
        }
    }
}

pub fn scene_from_toml(text: &str) -> Result<Scene> {
    let doc: SceneDoc = toml::from_str(text).map_err(|e| Error::param(format!("scene: {e}")))?;
    let prims = doc
        .primitives
        .into_iter()
        .map(PrimitiveDoc::into_primitive)
        .collect::<Result<Vec<_>>>()?;
    Scene::new(prims, doc.seed)
}

pub fn scene_to_toml(scene: &Scene) -> String {
    let doc = SceneDoc {
        seed: scene.seed(),
        primitives: scene
            .primitives()
            .iter()
            .map(PrimitiveDoc::from_primitive)
            .collect(),
    };
    toml::to_string(&doc).expect("scene documents always serialize")
}

pub fn read_scene(path: &Path) -> Result<Scene> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    scene_from_toml(&text).map_err(|e| match e {
        Error::Parameter(msg) => Error::Parse {
            path: path.to_owned(),
            line: 0,
            msg,
        },
        other => other,
    })
}

pub fn write_scene(path: &Path, scene: &Scene) -> Result<()> {
    fs::write(path, scene_to_toml(scene)).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}
