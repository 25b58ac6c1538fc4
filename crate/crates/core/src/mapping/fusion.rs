use std::ops::ControlFlow;

use nalgebra::Point3;

use super::grid::OccupancyGrid;
use super::traverse::visit_voxels;
use super::MappingError;
use crate::exec::Execution;
use crate::render::{pixel_ray_direction, DepthMap};

/// Distance past the measured surface at which a ray's endpoint is placed.
///
/// A surface lying exactly on a voxel face would otherwise put the endpoint
/// on the boundary, where the owning voxel depends on rounding. Nudging it
/// along the ray assigns the hit to the voxel just behind the surface.
pub const ENDPOINT_BIAS: f64 = 1e-4;

/// Rows traversed per parallel batch.
const ROW_BATCH: usize = 16;

/// Back-projected points in the world frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Counters from one [`integrate_depth`] call.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    /// Pixels whose ray intersected the grid.
    pub rays_cast: usize,
    /// Rays whose measured endpoint fell inside the grid.
    pub endpoint_hits: usize,
    /// Voxels that received the hit increment.
    pub voxels_hit: usize,
    /// Voxels that received the free-space increment.
    pub voxels_freed: usize,
}

/// One point per finite-depth pixel at `origin + depth * direction`.
pub fn backproject(depth: &DepthMap) -> PointCloud {
    let frame = depth.pose.frame();
    let origin = frame.origin();
    let w = depth.width();
    let points = depth
        .depths
        .iter()
        .enumerate()
        .filter(|(_, d)| d.is_finite())
        .map(|(i, &d)| origin + pixel_ray_direction(&frame, &depth.intrinsics, i / w, i % w) * d)
        .collect();
    PointCloud { points }
}

/// Per-voxel event counts from one frame.
#[derive(Clone)]
struct FrameCounts {
    hits: Vec<u32>,
    misses: Vec<u32>,
    stats: IntegrationStats,
}

impl FrameCounts {
    fn new(n: usize) -> Self {
        Self {
            hits: vec![0; n],
            misses: vec![0; n],
            stats: IntegrationStats::default(),
        }
    }

    fn merge(mut self, other: &FrameCounts) -> Self {
        for (a, b) in self.hits.iter_mut().zip(&other.hits) {
            *a += b;
        }
        for (a, b) in self.misses.iter_mut().zip(&other.misses) {
            *a += b;
        }
        self.stats.rays_cast += other.stats.rays_cast;
        self.stats.endpoint_hits += other.stats.endpoint_hits;
        self
    }
}

/// Fuses one depth map into the grid.
///
/// Every pixel ray is traced from the camera to its measured endpoint;
/// rays without a return, and rays whose endpoint lies outside the grid,
/// only carve free space along their (clipped) segment. Per voxel, the
/// frame then contributes:
///
/// - `h * C1` if `h >= 1` ray endpoints fall inside it (endpoint updates
///   dominate: pass-throughs in the same frame are ignored),
/// - otherwise `C2` once if any ray passes through it,
///
/// followed by clamping. A view's free-space evidence is counted once
/// because neighbouring rays of one frame are strongly correlated; counting
/// each grazing ray through a voxel that holds a surface would let a
/// single view erase surfaces seen earlier. Counting also keeps the result
/// independent of ray order and of `exec`.
pub fn integrate_depth_with(
    grid: &mut OccupancyGrid,
    depth: &DepthMap,
    exec: Execution,
) -> Result<IntegrationStats, MappingError> {
    let intr = depth.intrinsics;
    if depth.depths.len() != intr.pixel_count() {
        return Err(MappingError::DepthSize {
            expected: intr.pixel_count(),
            found: depth.depths.len(),
        });
    }
    let frame = depth.pose.frame();
    let origin = frame.origin();
    let bounds = grid.config().bounds();
    let gap = bounds.distance_squared(&origin).sqrt();
    if !gap.is_finite() || gap > intr.max_range() {
        return Err(MappingError::FrameMismatch(format!(
            "camera at {:?} is {gap:.3} m from the grid, beyond the {} m sensor range",
            origin.coords.as_slice(),
            intr.max_range()
        )));
    }

    let config = grid.config().clone();
    let n = config.voxel_count();
    let (w, h) = (intr.width(), intr.height());
    let batches = h.div_ceil(ROW_BATCH);
    let partial = exec.map_indexed(batches, |b| {
        let mut c = FrameCounts::new(n);
        for row in b * ROW_BATCH..((b + 1) * ROW_BATCH).min(h) {
            for col in 0..w {
                let dir = pixel_ray_direction(&frame, &intr, row, col);
                let d = depth.depths[row * w + col];
                let (end, measured) = if d.is_finite() {
                    (origin + dir * (d + ENDPOINT_BIAS), true)
                } else {
                    (origin + dir * intr.max_range(), false)
                };
                let hit = measured && bounds.contains(&end);
                let mut last = None;
                visit_voxels(&config, &origin, &end, |v| {
                    if let Some(prev) = last.replace(config.linear(v)) {
                        c.misses[prev] += 1;
                    }
                    ControlFlow::Continue(())
                });
                let Some(last) = last else { continue };
                c.stats.rays_cast += 1;
                if hit {
                    c.stats.endpoint_hits += 1;
                    c.hits[last] += 1;
                } else {
                    c.misses[last] += 1;
                }
            }
        }
        c
    });
    let total = partial.iter().fold(FrameCounts::new(n), FrameCounts::merge);
    let (c1, c2) = (config.log_odds_hit(), config.log_odds_miss());
    let mut stats = total.stats;
    for i in 0..n {
        if total.hits[i] > 0 {
            stats.voxels_hit += 1;
            grid.add_linear(i, total.hits[i] as f64 * c1);
        } else if total.misses[i] > 0 {
            stats.voxels_freed += 1;
            grid.add_linear(i, c2);
        }
    }
    Ok(stats)
}

pub fn integrate_depth(grid: &mut OccupancyGrid, depth: &DepthMap) -> Result<IntegrationStats, MappingError> {
    integrate_depth_with(grid, depth, Execution::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Bvh, CameraIntrinsics, Pose5D, TriangleMesh};
    use crate::mapping::{GridConfig, VoxelState};
    use crate::render::render_depth;
    use std::f64::consts::FRAC_PI_2;

    fn wall_bvh(x: f64) -> Bvh {
        let m = TriangleMesh::new(
            vec![
                Point3::new(x, -50.0, -50.0),
                Point3::new(x, 50.0, -50.0),
                Point3::new(x, 50.0, 50.0),
                Point3::new(x, -50.0, 50.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        Bvh::build(&m)
    }

    fn grid() -> OccupancyGrid {
        OccupancyGrid::new(GridConfig::new(Point3::new(-0.5, -4.0, -4.0), 1.0, [10, 8, 8]).unwrap())
    }

    fn depth_at(pose: Pose5D, intr: CameraIntrinsics, d: f64) -> DepthMap {
        DepthMap {
            depths: vec![d; intr.pixel_count()],
            pose,
            intrinsics: intr,
        }
    }

    #[test]
    fn backproject_identity_and_sentinel() {
        let intr = CameraIntrinsics::new(1, 1, FRAC_PI_2, 40.0).unwrap();
        let pose = Pose5D::new(Point3::origin(), 0.0, 0.0).unwrap();
        let cloud = backproject(&depth_at(pose, intr, 5.0));
        assert!((cloud.points[0] - Point3::new(5.0, 0.0, 0.0)).norm() < 1e-12);
        assert!(backproject(&depth_at(pose, intr, f64::INFINITY)).is_empty());
    }

    #[test]
    fn backproject_yaw_rotates_cloud() {
        let intr = CameraIntrinsics::new(7, 5, 1.1, 40.0).unwrap();
        let mut a = depth_at(Pose5D::new(Point3::origin(), 0.2, 0.0).unwrap(), intr, 3.0);
        for (i, d) in a.depths.iter_mut().enumerate() {
            *d += i as f64 * 0.01;
        }
        let mut b = a.clone();
        b.pose = Pose5D::new(Point3::origin(), 0.2, FRAC_PI_2).unwrap();
        let (ca, cb) = (backproject(&a), backproject(&b));
        for (p, q) in ca.points.iter().zip(&cb.points) {
            assert!((Point3::new(-p.y, p.x, p.z) - q).norm() < 1e-12);
        }
    }

    #[test]
    fn single_ray_hit_marks_occupied() {
        let intr = CameraIntrinsics::new(1, 1, FRAC_PI_2, 40.0).unwrap();
        let pose = Pose5D::new(Point3::new(0.0, 0.0, 0.0), 0.0, 0.0).unwrap();
        let mut g = grid();
        let stats = integrate_depth(&mut g, &depth_at(pose, intr, 5.2)).unwrap();
        assert_eq!(stats.endpoint_hits, 1);
        assert_eq!((stats.voxels_hit, stats.voxels_freed), (1, 5));
        let end = g.config().voxel_of(&Point3::new(5.2, 0.0, 0.0)).unwrap();
        assert_eq!(g.get(end), 2.0);
        assert_eq!(g.state(end), VoxelState::Occupied);
        for i in 0..5 {
            assert!((g.get([i, 4, 4]) + 0.1).abs() < 1e-15);
        }
        let changed = g.values().iter().filter(|v| **v != 0.0).count();
        assert_eq!(changed, 6);
    }

    #[test]
    fn repeated_hits_saturate() {
        let intr = CameraIntrinsics::new(1, 1, FRAC_PI_2, 40.0).unwrap();
        let pose = Pose5D::new(Point3::origin(), 0.0, 0.0).unwrap();
        let mut g = grid();
        let d = depth_at(pose, intr, 5.2);
        for n in 1..=7 {
            integrate_depth(&mut g, &d).unwrap();
            assert_eq!(g.get([5, 4, 4]), (n as f64 * 2.0).min(10.0));
        }
    }

    #[test]
    fn hits_add_per_ray_and_dominate_pass_throughs() {
        // Two nearly parallel rays along +x: one ends in voxel 5, the other
        // passes through it and ends in voxel 7.
        let intr = CameraIntrinsics::new(2, 1, 1e-4, 40.0).unwrap();
        let pose = Pose5D::new(Point3::new(0.0, 0.5, 0.5), 0.0, 0.0).unwrap();
        let mut d = depth_at(pose, intr, 5.2);
        d.depths[1] = 7.2;
        let mut g = grid();
        let s = integrate_depth(&mut g, &d).unwrap();
        assert_eq!(s.endpoint_hits, 2);
        assert_eq!(g.get([5, 4, 4]), 2.0);
        assert_eq!(g.get([7, 4, 4]), 2.0);
        assert_eq!(g.get([6, 4, 4]), -0.1);
        // Free-space evidence counts once per frame.
        for i in 0..5 {
            assert_eq!(g.get([i, 4, 4]), -0.1);
        }
        // Three rays ending in one voxel add three hit increments.
        let intr = CameraIntrinsics::new(3, 1, 1e-4, 40.0).unwrap();
        let mut g = grid();
        integrate_depth(&mut g, &depth_at(pose, intr, 5.2)).unwrap();
        assert_eq!(g.get([5, 4, 4]), 6.0);
    }

    #[test]
    fn no_return_carves_free_space_only() {
        let intr = CameraIntrinsics::new(3, 3, 0.5, 40.0).unwrap();
        let pose = Pose5D::new(Point3::origin(), 0.0, 0.0).unwrap();
        let mut g = grid();
        let s = integrate_depth(&mut g, &depth_at(pose, intr, f64::INFINITY)).unwrap();
        assert_eq!(s.endpoint_hits, 0);
        assert_eq!(s.rays_cast, 9);
        assert!(g.values().iter().all(|v| *v <= 0.0));
    }

    #[test]
    fn hit_outside_grid_is_free_space_only() {
        let intr = CameraIntrinsics::new(1, 1, 0.5, 40.0).unwrap();
        let pose = Pose5D::new(Point3::origin(), 0.0, 0.0).unwrap();
        let mut g = grid();
        let s = integrate_depth(&mut g, &depth_at(pose, intr, 30.0)).unwrap();
        assert_eq!(s.endpoint_hits, 0);
        assert!(g.values().iter().all(|v| *v <= 0.0));
    }

    #[test]
    fn rejects_far_camera_and_bad_size() {
        let intr = CameraIntrinsics::new(2, 2, 0.5, 10.0).unwrap();
        let far = Pose5D::new(Point3::new(100.0, 0.0, 0.0), 0.0, 0.0).unwrap();
        let mut g = grid();
        assert!(matches!(
            integrate_depth(&mut g, &depth_at(far, intr, 1.0)),
            Err(MappingError::FrameMismatch(_))
        ));
        let mut d = depth_at(Pose5D::new(Point3::origin(), 0.0, 0.0).unwrap(), intr, 1.0);
        d.depths.pop();
        assert!(matches!(integrate_depth(&mut g, &d), Err(MappingError::DepthSize { .. })));
    }

    #[test]
    fn wall_frame_occupies_wall_voxels_only() {
        let bvh = wall_bvh(6.3);
        let intr = CameraIntrinsics::new(64, 64, FRAC_PI_2, 40.0).unwrap();
        let pose = Pose5D::new(Point3::origin(), 0.0, 0.0).unwrap();
        let depth = render_depth(&bvh, &pose, &intr);
        let mut g = grid();
        integrate_depth(&mut g, &depth).unwrap();
        let (states, _) = g.classify();
        let cfg = g.config();
        for (i, s) in states.iter().enumerate() {
            let v = cfg.unlinear(i);
            let b = cfg.voxel_bounds(v);
            if *s == VoxelState::Occupied {
                assert!(b.min.x <= 6.3 && 6.3 < b.max.x, "occupied voxel {v:?} off the wall");
            }
            if b.max.x < 6.3 - 1e-9 && *s == VoxelState::Occupied {
                panic!("voxel {v:?} between camera and wall is occupied");
            }
        }
        // Pixel footprint on the wall (~0.2 m) is finer than a voxel and the
        // frustum covers the whole grid cross-section.
        for y in 0..8 {
            for z in 0..8 {
                assert_eq!(g.state([6, y, z]), VoxelState::Occupied);
            }
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let bvh = wall_bvh(5.7);
        let intr = CameraIntrinsics::new(40, 37, 1.4, 40.0).unwrap();
        let pose = Pose5D::new(Point3::new(0.1, 0.3, -0.2), 0.15, -0.1).unwrap();
        let depth = render_depth(&bvh, &pose, &intr);
        let mut a = grid();
        let mut b = grid();
        let sa = integrate_depth_with(&mut a, &depth, Execution::Sequential).unwrap();
        let sb = integrate_depth_with(&mut b, &depth, Execution::Parallel).unwrap();
        assert_eq!(sa, sb);
        assert_eq!(a, b);
    }
}
