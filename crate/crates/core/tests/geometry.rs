mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Point3, Vector3};
use nbv_core::geometry::{
    box_mesh, load_mesh, write_obj, Bvh, CameraIntrinsics, Pose5D, Ray, TriangleMesh, INTERSECT_EPSILON,
};
use nbv_core::render::{render_view, Light};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_vector(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn point_in(rng: &mut impl Rng, lo: f64, hi: f64) -> Point3<f64> {
    Point3::new(rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(lo..hi))
}

/// Compares BVH hits against the brute-force oracle; returns how many rays hit.
fn check_against_brute_force(mesh: &TriangleMesh, rays: &[Ray]) -> usize {
    let bvh = Bvh::build(mesh);
    let mut hits = 0;
    for (i, ray) in rays.iter().enumerate() {
        let dir = ray.direction.into_inner();
        let expected = common::brute_force_hit(mesh, &ray.origin, &dir, INTERSECT_EPSILON);
        let got = bvh.intersect(ray).map(|h| h.distance);
        match (got, expected) {
            (Some(a), Some(b)) => {
                assert!((a - b).abs() <= 1e-9 * b.max(1.0), "ray {i}: bvh {a} vs brute force {b}");
                hits += 1;
            }
            (None, None) => {}
            other => panic!("ray {i}: bvh and brute force disagree: {other:?}"),
        }
    }
    hits
}

#[test]
fn cube_hits_match_brute_force_for_1000_rays() {
    let mesh = box_mesh(Point3::new(-1.0, -2.0, 0.0), Point3::new(3.0, 1.0, 2.5));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rays: Vec<Ray> = (0..1000)
        .map(|k| {
            let origin = point_in(&mut rng, -6.0, 6.0);
            // Half the rays aim near the box so both outcomes are exercised.
            let dir = if k % 2 == 0 {
                point_in(&mut rng, -1.0, 2.0) - origin
            } else {
                unit_vector(&mut rng)
            };
            Ray::new(origin, dir).unwrap()
        })
        .collect();
    let hits = check_against_brute_force(&mesh, &rays);
    assert!(hits > 300, "only {hits} hits");
}

#[test]
fn triangle_soup_hits_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for t in 0..10_000u32 {
        let c = point_in(&mut rng, -10.0, 10.0);
        for _ in 0..3 {
            vertices.push(c + unit_vector(&mut rng) * rng.random_range(0.1..0.6));
        }
        triangles.push([3 * t, 3 * t + 1, 3 * t + 2]);
    }
    let mesh = TriangleMesh::new(vertices, triangles).unwrap();
    assert_eq!(mesh.triangle_count(), 10_000);
    let rays: Vec<Ray> = (0..1000)
        .map(|_| {
            let origin = point_in(&mut rng, -14.0, 14.0);
            Ray::new(origin, point_in(&mut rng, -8.0, 8.0) - origin).unwrap()
        })
        .collect();
    let hits = check_against_brute_force(&mesh, &rays);
    assert!(hits > 500, "only {hits} hits");
}

#[test]
fn obj_file_round_trip_through_loader() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cube.obj");
    let mesh = box_mesh(Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 2.0, 3.0));
    write_obj(&mesh, std::fs::File::create(&path).unwrap()).unwrap();
    let back = load_mesh(&path).unwrap();
    assert_eq!(back.vertices(), mesh.vertices());
    assert_eq!(back.triangles(), mesh.triangles());
    assert!(load_mesh(dir.path().join("missing.obj")).is_err());
}

fn uv_sphere(radius: f64, rings: usize, segments: usize) -> TriangleMesh {
    let mut vertices = vec![Point3::new(0.0, 0.0, radius)];
    for r in 1..rings {
        let theta = PI * r as f64 / rings as f64;
        for s in 0..segments {
            let phi = 2.0 * PI * s as f64 / segments as f64;
            vertices.push(Point3::new(
                radius * theta.sin() * phi.cos(),
                radius * theta.sin() * phi.sin(),
                radius * theta.cos(),
            ));
        }
    }
    vertices.push(Point3::new(0.0, 0.0, -radius));
    let south = (vertices.len() - 1) as u32;
    let at = |r: usize, s: usize| (1 + (r - 1) * segments + s % segments) as u32;
    let mut triangles = Vec::new();
    for s in 0..segments {
        triangles.push([0, at(1, s), at(1, s + 1)]);
        triangles.push([south, at(rings - 1, s + 1), at(rings - 1, s)]);
    }
    for r in 1..rings - 1 {
        for s in 0..segments {
            triangles.push([at(r, s), at(r + 1, s), at(r + 1, s + 1)]);
            triangles.push([at(r, s), at(r + 1, s + 1), at(r, s + 1)]);
        }
    }
    TriangleMesh::new(vertices, triangles).unwrap()
}

#[test]
fn sphere_shading_falls_with_angle_to_light() {
    let mesh = uv_sphere(2.0, 24, 48);
    assert!(mesh.is_watertight());
    let bvh = Bvh::build(&mesh);
    let light = Light::default();
    let intr = CameraIntrinsics::new(64, 64, FRAC_PI_2, 40.0).unwrap();
    let pose = Pose5D::look_at(Point3::new(4.0, 0.0, 2.0), Point3::origin()).unwrap();
    let (depth, gray) = render_view(&bvh, &pose, &intr, &light);
    let frame = pose.frame();
    let to_light = -light.direction.into_inner();
    let mut samples = Vec::new();
    for row in 0..64 {
        for col in 0..64 {
            let i = row * 64 + col;
            if !depth.depths[i].is_finite() {
                continue;
            }
            let dir = nbv_core::render::pixel_ray_direction(&frame, &intr, row, col);
            let hit = bvh.intersect(&Ray::new(frame.origin(), dir).unwrap()).unwrap();
            let n = mesh.winding_normal(hit.triangle as usize);
            let angle = n.dot(&to_light).clamp(-1.0, 1.0).acos();
            samples.push((angle, gray.intensities[i] as f64));
        }
    }
    assert!(samples.len() > 500);
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in samples.windows(2) {
        // Equal normals give equal intensity; allow f32 rounding.
        assert!(w[1].1 <= w[0].1 + 1e-6, "intensity rose from {:?} to {:?}", w[0], w[1]);
    }
    let lit: Vec<_> = samples.iter().filter(|s| s.0 < FRAC_PI_2).collect();
    let dark: Vec<_> = samples.iter().filter(|s| s.0 > FRAC_PI_2).collect();
    assert!(!lit.is_empty() && !dark.is_empty());
    assert!(dark.iter().all(|s| (s.1 - light.ambient).abs() < 1e-6));
}

proptest! {
    #[test]
    fn poses_are_orthonormal_and_roll_free(
        x in -10.0..10.0f64, y in -10.0..10.0f64, z in 0.0..10.0f64,
        pitch in -FRAC_PI_2..=FRAC_PI_2, yaw in -10.0..10.0f64,
    ) {
        let p = Pose5D::new(Point3::new(x, y, z), pitch, yaw).unwrap();
        prop_assert!(p.yaw >= -PI && p.yaw < PI);
        let f = p.frame();
        let (fw, left, up) = (f.forward(), f.left(), f.up());
        for v in [fw, left, up] {
            prop_assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        prop_assert!(fw.dot(&left).abs() < 1e-12 && fw.dot(&up).abs() < 1e-12 && left.dot(&up).abs() < 1e-12);
        // No roll: the left axis stays horizontal.
        prop_assert!(left.z.abs() < 1e-12);
        prop_assert!((fw.cross(&left) - up).norm() < 1e-12);
        let back = Pose5D::from_array(p.to_array()).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn look_at_aims_forward_axis(
        a in prop::array::uniform3(-8.0..8.0f64),
        b in prop::array::uniform3(-8.0..8.0f64),
    ) {
        let (from, to) = (Point3::from(a), Point3::from(b));
        prop_assume!((to - from).norm() > 1e-3);
        let p = Pose5D::look_at(from, to).unwrap();
        let want = (to - from).normalize();
        prop_assert!((p.frame().forward() - want).norm() < 1e-9);
    }
}
