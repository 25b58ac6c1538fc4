use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use super::{Aabb, GeometryError};

/// Indexed triangle mesh in meters.
///
/// Construction checks index bounds and finiteness. Ingestion
/// ([`super::load_mesh`]) and [`TriangleMesh::normalize`] additionally require
/// a bounding box of strictly positive volume; flat meshes (single walls,
/// single triangles) are accepted by [`TriangleMesh::new`] so that analytic
/// test scenes can be built directly.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[u32; 3]>,
    normals: Option<Vec<Vector3<f64>>>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self, GeometryError> {
        if vertices.is_empty() || triangles.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        if let Some(v) = vertices.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(GeometryError::NonFinite { vertex: v });
        }
        let n = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i as usize >= n) {
                return Err(GeometryError::IndexOutOfRange {
                    triangle: t,
                    index: bad as usize,
                    vertex_count: n,
                });
            }
        }
        Ok(Self {
            vertices,
            triangles,
            normals: None,
        })
    }

    /// Attaches per-face normals (one per triangle).
    pub fn with_face_normals(mut self, normals: Vec<Vector3<f64>>) -> Result<Self, GeometryError> {
        if normals.len() != self.triangles.len() {
            return Err(GeometryError::NormalCount {
                expected: self.triangles.len(),
                found: normals.len(),
            });
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn face_normals(&self) -> Option<&[Vector3<f64>]> {
        self.normals.as_deref()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Same surface with every triangle's winding reversed.
    pub fn flipped(&self) -> TriangleMesh {
        let mut out = self.clone();
        for t in &mut out.triangles {
            t.swap(1, 2);
        }
        if let Some(n) = &mut out.normals {
            n.iter_mut().for_each(|v| *v = -*v);
        }
        out
    }

    pub fn triangle(&self, i: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[i];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Counter-clockwise winding normal, unit length (zero for degenerate faces).
    pub fn winding_normal(&self, i: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangle(i);
        (b - a).cross(&(c - a)).try_normalize(0.0).unwrap_or_else(Vector3::zeros)
    }

    pub fn triangle_area(&self, i: usize) -> f64 {
        let [a, b, c] = self.triangle(i);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter().copied())
    }

    /// Rejects meshes whose bounding box is flat along any axis.
    pub fn require_volume(&self) -> Result<(), GeometryError> {
        let b = self.bounds();
        let e = b.extent();
        if e.iter().all(|&x| x > 0.0) {
            Ok(())
        } else {
            Err(GeometryError::DegenerateBounds {
                min: b.min.coords.into(),
                max: b.max.coords.into(),
            })
        }
    }

    /// Recenters the mesh so its bounding-box bottom-center sits at the
    /// origin and scales it uniformly until the largest extent/target ratio
    /// equals one.
    pub fn normalize(&self, target_extent: Vector3<f64>) -> Result<TriangleMesh, GeometryError> {
        if !target_extent.iter().all(|&x| x.is_finite() && x > 0.0) {
            return Err(GeometryError::InvalidTarget(target_extent.into()));
        }
        self.require_volume()?;
        let b = self.bounds();
        let extent = b.extent();
        let scale = (0..3)
            .map(|k| target_extent[k] / extent[k])
            .fold(f64::INFINITY, f64::min);
        let anchor = Vector3::new(
            0.5 * (b.min.x + b.max.x),
            0.5 * (b.min.y + b.max.y),
            b.min.z,
        );
        let vertices = self
            .vertices
            .iter()
            .map(|p| Point3::from((p.coords - anchor) * scale))
            .collect();
        Ok(TriangleMesh {
            vertices,
            triangles: self.triangles.clone(),
            normals: self.normals.clone(),
        })
    }

    /// Appends another mesh, offsetting its indices.
    pub fn append(&mut self, other: &TriangleMesh) {
        let offset = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]));
        self.normals = match (self.normals.take(), &other.normals) {
            (Some(mut a), Some(b)) => {
                a.extend_from_slice(b);
                Some(a)
            }
            _ => None,
        };
    }

    /// True if every undirected edge is shared by exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        let mut edges: HashMap<(u32, u32), u32> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges.values().all(|&c| c == 2)
    }
}

/// Closed axis-aligned box `[min, max]` as a 12-triangle mesh with outward winding.
pub fn box_mesh(min: Point3<f64>, max: Point3<f64>) -> TriangleMesh {
    let v = |x: bool, y: bool, z: bool| {
        Point3::new(
            if x { max.x } else { min.x },
            if y { max.y } else { min.y },
            if z { max.z } else { min.z },
        )
    };
    let vertices = vec![
        v(false, false, false),
        v(true, false, false),
        v(true, true, false),
        v(false, true, false),
        v(false, false, true),
        v(true, false, true),
        v(true, true, true),
        v(false, true, true),
    ];
    let triangles = vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 0, 4],
        [3, 4, 7],
    ];
    TriangleMesh::new(vertices, triangles).expect("box mesh is well formed")
}
