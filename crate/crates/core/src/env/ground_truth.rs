use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EnvError;
use crate::geometry::TriangleMesh;
use crate::mapping::{GridConfig, PointCloud, VoxelIndex};

/// Surface samples are voxelized this far inside the surface (against the
/// outward winding normal), matching how depth endpoints are biased past
/// the surface along the viewing ray.
pub const SURFACE_INSET: f64 = 1e-4;

/// Tolerance for treating a triangle as lying on the ground plane.
const GROUND_TOLERANCE: f64 = 1e-9;

/// Reference surface of a scene: the voxels a perfect scan marks Occupied,
/// and the surface samples used for Chamfer accuracy.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    /// Sorted, deduplicated surface voxel indices.
    pub voxels: Vec<VoxelIndex>,
    pub points: PointCloud,
    pub mesh_id: String,
}

impl GroundTruth {
    pub fn voxel_count(&self) -> usize {
        self.voxels.len()
    }
}

/// Samples `n_samples` points uniformly by area over the mesh surface and
/// voxelizes them.
///
/// Faces lying flat on the grid floor and facing down (the footprint a
/// building rests on) can never be observed and are left out.
pub fn build_ground_truth(
    mesh: &TriangleMesh,
    mesh_id: &str,
    grid: &GridConfig,
    n_samples: usize,
    seed: u64,
) -> Result<GroundTruth, EnvError> {
    if n_samples == 0 {
        return Err(EnvError::InvalidConfig("ground-truth sample count must be positive".into()));
    }
    let bounds = grid.bounds();
    let mb = mesh.bounds();
    for corner in mb.corners() {
        if !bounds.contains(&corner) {
            return Err(EnvError::MeshOutsideGrid {
                mesh: mesh_id.to_string(),
                corner: corner.coords.into(),
            });
        }
    }

    let ground = grid.origin().z + GROUND_TOLERANCE;
    let mut tris = Vec::new();
    let mut cdf = Vec::new();
    let mut total = 0.0;
    for i in 0..mesh.triangle_count() {
        let [a, b, c] = mesh.triangle(i);
        let on_ground = a.z <= ground && b.z <= ground && c.z <= ground;
        if on_ground && mesh.winding_normal(i).z <= 0.0 {
            continue;
        }
        let area = mesh.triangle_area(i);
        if area <= 0.0 {
            continue;
        }
        total += area;
        tris.push(i);
        cdf.push(total);
    }
    if tris.is_empty() {
        return Err(EnvError::EmptyGroundTruth(mesh_id.to_string()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n_samples);
    let mut voxels = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let r = rng.random::<f64>() * total;
        let k = cdf.partition_point(|&c| c <= r).min(tris.len() - 1);
        let t = tris[k];
        let [a, b, c] = mesh.triangle(t);
        let (mut u, mut v) = (rng.random::<f64>(), rng.random::<f64>());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        let p: Point3<f64> = a + (b - a) * u + (c - a) * v;
        let normal = mesh.winding_normal(t);
        let inset = p - normal * SURFACE_INSET;
        if let Some(idx) = grid.voxel_of(&inset).or_else(|| grid.voxel_of(&p)) {
            voxels.push(idx);
        }
        points.push(p);
    }
    voxels.sort_unstable();
    voxels.dedup();
    if voxels.is_empty() {
        return Err(EnvError::EmptyGroundTruth(mesh_id.to_string()));
    }
    Ok(GroundTruth {
        voxels,
        points: PointCloud::new(points),
        mesh_id: mesh_id.to_string(),
    })
}
