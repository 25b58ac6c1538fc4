//! Mesh ingestion, ray casting acceleration and the 5-DoF camera pose model.
//!
//! World frame: +z is up, meters throughout. A camera's local frame is
//! forward-left-up (x forward, y left, z up); yaw turns about world +z and
//! pitch tilts the forward axis toward +z, with the camera-right axis kept
//! horizontal.

mod bvh;
mod io;
mod mesh;
mod pose;

use nalgebra::{Point3, Unit, Vector3};
use thiserror::Error;

pub use bvh::{Bvh, Hit, INTERSECT_EPSILON};
pub use io::{load_mesh, parse_obj, parse_ply, write_obj};
pub use mesh::{box_mesh, TriangleMesh};
pub use pose::{ActionBox, CameraFrame, CameraIntrinsics, Pose5D};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("vertex {vertex} has a non-finite coordinate")]
    NonFinite { vertex: usize },
    #[error("triangle {triangle} references vertex {index} but the mesh has {vertex_count} vertices")]
    IndexOutOfRange {
        triangle: usize,
        index: usize,
        vertex_count: usize,
    },
    #[error("expected {expected} face normals, found {found}")]
    NormalCount { expected: usize, found: usize },
    #[error("degenerate bounding box {min:?}..{max:?}")]
    DegenerateBounds { min: [f64; 3], max: [f64; 3] },
    #[error("target extent must be positive, got {0:?}")]
    InvalidTarget([f64; 3]),
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid ray: {0}")]
    InvalidRay(String),
}

/// Half-line `origin + t * direction`, `t >= 0`, with a unit direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Point3<f64>,
    pub direction: Unit<Vector3<f64>>,
}

impl Ray {
    /// Normalizes `direction`; fails on zero or non-finite input.
    pub fn new(origin: Point3<f64>, direction: Vector3<f64>) -> Result<Self, GeometryError> {
        if !origin.coords.iter().chain(direction.iter()).all(|c| c.is_finite()) {
            return Err(GeometryError::InvalidRay("non-finite component".into()));
        }
        let direction = Unit::try_new(direction, 1e-300)
            .ok_or_else(|| GeometryError::InvalidRay("zero direction".into()))?;
        Ok(Self { origin, direction })
    }

    pub fn at(&self, t: f64) -> Point3<f64> {
        self.origin + self.direction.as_ref() * t
    }
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn new(min: Point3<f64>, max: Point3<f64>) -> Self {
        Self { min, max }
    }

    pub fn from_points(points: impl IntoIterator<Item = Point3<f64>>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(&p);
        }
        b
    }

    pub fn grow(&mut self, p: &Point3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn corners(&self) -> [Point3<f64>; 8] {
        let (a, b) = (self.min, self.max);
        [
            Point3::new(a.x, a.y, a.z),
            Point3::new(b.x, a.y, a.z),
            Point3::new(a.x, b.y, a.z),
            Point3::new(b.x, b.y, a.z),
            Point3::new(a.x, a.y, b.z),
            Point3::new(b.x, a.y, b.z),
            Point3::new(a.x, b.y, b.z),
            Point3::new(b.x, b.y, b.z),
        ]
    }

    /// Squared distance from `p` to the box (zero inside).
    pub fn distance_squared(&self, p: &Point3<f64>) -> f64 {
        (0..3)
            .map(|k| {
                let d = (self.min[k] - p[k]).max(0.0).max(p[k] - self.max[k]);
                d * d
            })
            .sum()
    }

    /// Slab test against `origin + t * dir` for `t` in `[t_min, t_max]`,
    /// given the precomputed reciprocal direction. Returns the entry/exit
    /// parameters of the overlap.
    #[inline]
    pub fn ray_interval(
        &self,
        origin: &Point3<f64>,
        inv_dir: &Vector3<f64>,
        t_min: f64,
        t_max: f64,
    ) -> Option<(f64, f64)> {
        let mut lo = t_min;
        let mut hi = t_max;
        for k in 0..3 {
            if inv_dir[k].is_infinite() {
                if origin[k] < self.min[k] || origin[k] > self.max[k] {
                    return None;
                }
                continue;
            }
            let t0 = (self.min[k] - origin[k]) * inv_dir[k];
            let t1 = (self.max[k] - origin[k]) * inv_dir[k];
            let (near, far) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
            lo = lo.max(near);
            hi = hi.min(far);
            if lo > hi {
                return None;
            }
        }
        Some((lo, hi))
    }
}
