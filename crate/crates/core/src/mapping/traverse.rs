use std::ops::ControlFlow;

use nalgebra::{Point3, Vector3};

use super::grid::{GridConfig, VoxelIndex};

/// Visits, in order, every voxel the segment `start -> end` passes through
/// after clipping it to the grid. Consecutive voxels share a face.
///
/// Exact voxel walk in the style of Amanatides and Woo: the next boundary
/// crossing on each axis is recomputed from the segment parameters at each
/// step instead of being accumulated, so long rays do not drift. A segment
/// that ends exactly on a voxel face does not enter the voxel beyond it.
pub fn visit_voxels<F>(config: &GridConfig, start: &Point3<f64>, end: &Point3<f64>, mut f: F)
where
    F: FnMut(VoxelIndex) -> ControlFlow<()>,
{
    let inv_voxel = 1.0 / config.voxel_size();
    let origin = config.origin();
    let dims = config.dims();
    // Grid coordinates: voxel i spans [i, i + 1) on each axis.
    let s: Vector3<f64> = (start - origin) * inv_voxel;
    let d: Vector3<f64> = (end - start) * inv_voxel;

    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for k in 0..3 {
        let hi = dims[k] as f64;
        if d[k] == 0.0 {
            if s[k] < 0.0 || s[k] > hi {
                return;
            }
            continue;
        }
        let a = (0.0 - s[k]) / d[k];
        let b = (hi - s[k]) / d[k];
        let (near, far) = if a <= b { (a, b) } else { (b, a) };
        t0 = t0.max(near);
        t1 = t1.min(far);
        if t0 > t1 {
            return;
        }
    }

    let entry = s + d * t0;
    let mut cell = [0i64; 3];
    for k in 0..3 {
        let c = entry[k].floor() as i64;
        cell[k] = c.clamp(0, dims[k] as i64 - 1);
    }
    let step: [i64; 3] = [sign(d[0]), sign(d[1]), sign(d[2])];
    let inv_d: [f64; 3] = [1.0 / d[0], 1.0 / d[1], 1.0 / d[2]];
    let boundary_t = |k: usize, c: i64| {
        let boundary = if step[k] > 0 { c + 1 } else { c } as f64;
        (boundary - s[k]) * inv_d[k]
    };
    let mut next_t = [f64::INFINITY; 3];
    for k in 0..3 {
        if step[k] != 0 {
            next_t[k] = boundary_t(k, cell[k]);
        }
    }

    loop {
        if f([cell[0] as usize, cell[1] as usize, cell[2] as usize]).is_break() {
            return;
        }
        let mut axis = 0;
        if next_t[1] < next_t[axis] {
            axis = 1;
        }
        if next_t[2] < next_t[axis] {
            axis = 2;
        }
        if next_t[axis] >= t1 {
            return;
        }
        cell[axis] += step[axis];
        if cell[axis] < 0 || cell[axis] >= dims[axis] as i64 {
            return;
        }
        next_t[axis] = boundary_t(axis, cell[axis]);
    }
}

#[inline]
fn sign(v: f64) -> i64 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Ordered voxel list for the segment `start -> end`; empty if the segment
/// misses the grid.
pub fn traverse_ray(config: &GridConfig, start: &Point3<f64>, end: &Point3<f64>) -> Vec<VoxelIndex> {
    let mut out = Vec::new();
    visit_voxels(config, start, end, |v| {
        out.push(v);
        ControlFlow::Continue(())
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> GridConfig {
        GridConfig::new(Point3::origin(), 1.0, [8, 8, 8]).unwrap()
    }

    #[test]
    fn axis_aligned() {
        let v = traverse_ray(&cfg(), &Point3::new(0.5, 0.5, 0.5), &Point3::new(3.5, 0.5, 0.5));
        assert_eq!(v, vec![[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]]);
    }

    #[test]
    fn degenerate_segment() {
        let p = Point3::new(2.3, 4.1, 7.9);
        assert_eq!(traverse_ray(&cfg(), &p, &p), vec![[2, 4, 7]]);
    }

    #[test]
    fn outside_grid_is_empty() {
        let v = traverse_ray(&cfg(), &Point3::new(-3.0, -1.0, 0.5), &Point3::new(-1.0, 20.0, 0.5));
        assert!(v.is_empty());
    }

    #[test]
    fn clipped_from_outside() {
        let v = traverse_ray(&cfg(), &Point3::new(-5.0, 0.5, 0.5), &Point3::new(1.5, 0.5, 0.5));
        assert_eq!(v, vec![[0, 0, 0], [1, 0, 0]]);
        let v = traverse_ray(&cfg(), &Point3::new(6.5, 0.5, 0.5), &Point3::new(20.0, 0.5, 0.5));
        assert_eq!(v, vec![[6, 0, 0], [7, 0, 0]]);
    }

    #[test]
    fn negative_direction_and_face_end() {
        let v = traverse_ray(&cfg(), &Point3::new(3.5, 2.5, 1.5), &Point3::new(1.0, 2.5, 1.5));
        assert_eq!(v, vec![[3, 2, 1], [2, 2, 1], [1, 2, 1]]);
        let v = traverse_ray(&cfg(), &Point3::new(0.5, 0.5, 0.5), &Point3::new(2.0, 0.5, 0.5));
        assert_eq!(v, vec![[0, 0, 0], [1, 0, 0]]);
    }

    #[test]
    fn early_exit() {
        let mut n = 0;
        visit_voxels(&cfg(), &Point3::new(0.5, 0.5, 0.5), &Point3::new(7.5, 0.5, 0.5), |_| {
            n += 1;
            if n == 3 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        });
        assert_eq!(n, 3);
    }

    proptest! {
        #[test]
        fn face_connected_without_duplicates(
            a in prop::array::uniform3(-2.0f64..10.0),
            b in prop::array::uniform3(-2.0f64..10.0),
        ) {
            let v = traverse_ray(&cfg(), &Point3::from(a), &Point3::from(b));
            for w in v.windows(2) {
                let manhattan: i64 = (0..3).map(|k| (w[0][k] as i64 - w[1][k] as i64).abs()).sum();
                prop_assert_eq!(manhattan, 1);
            }
            let mut sorted = v.clone();
            sorted.sort();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), v.len());
        }
    }
}
