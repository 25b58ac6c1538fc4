//! Scenes and oracles shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{Point3, Vector3};
use nbv_core::env::{EnvConfig, Scene};
use nbv_core::geometry::{box_mesh, TriangleMesh};
use nbv_core::mapping::{GridConfig, VoxelIndex};
use nbv_core::procgen::generate_house;

/// Defaults with a lighter ground-truth sampling budget.
pub fn config() -> Arc<EnvConfig> {
    Arc::new(EnvConfig {
        gt_samples: 20_000,
        ..EnvConfig::default()
    })
}

/// 4 m cube on the ground whose faces lie on 1 m voxel boundaries.
pub fn aligned_cube() -> TriangleMesh {
    box_mesh(Point3::new(-2.0, -2.0, 0.0), Point3::new(2.0, 2.0, 4.0))
}

pub fn cube_scene(config: &EnvConfig) -> Arc<Scene> {
    Arc::new(Scene::with_config("cube", aligned_cube(), config).unwrap())
}

pub fn house_scenes(count: u64, config: &EnvConfig) -> Vec<Arc<Scene>> {
    (0..count)
        .map(|i| Arc::new(Scene::with_config(format!("house_{i:03}"), generate_house(i), config).unwrap()))
        .collect()
}

/// Plane intersection followed by an inside test on the three edge
/// half-planes; deliberately a different formulation from the library's.
pub fn ray_triangle(origin: &Point3<f64>, dir: &Vector3<f64>, tri: [Point3<f64>; 3], eps: f64) -> Option<f64> {
    let [a, b, c] = tri;
    let n = (b - a).cross(&(c - a));
    let denom = n.dot(dir);
    if denom.abs() < 1e-14 * n.norm() {
        return None;
    }
    let t = n.dot(&(a - origin)) / denom;
    if t <= eps {
        return None;
    }
    let p = origin + dir * t;
    let inside = [(a, b), (b, c), (c, a)]
        .iter()
        .all(|(u, v)| (v - u).cross(&(p - u)).dot(&n) >= 0.0);
    inside.then_some(t)
}

/// Nearest hit distance over every triangle.
pub fn brute_force_hit(mesh: &TriangleMesh, origin: &Point3<f64>, dir: &Vector3<f64>, eps: f64) -> Option<f64> {
    (0..mesh.triangle_count())
        .filter_map(|i| ray_triangle(origin, dir, mesh.triangle(i), eps))
        .fold(None, |best: Option<f64>, t| Some(best.map_or(t, |b| b.min(t))))
}

/// Length of the part of segment `a -> b` inside `[lo, hi]` (closed box),
/// or `None` if they do not meet.
pub fn clip_length(a: &Point3<f64>, b: &Point3<f64>, lo: &Point3<f64>, hi: &Point3<f64>) -> Option<f64> {
    clip_params(a, b, lo, hi).map(|(t0, t1)| (t1 - t0) * (b - a).norm())
}

/// Voxels containing sample points spaced at most `step` apart along the
/// segment, endpoints included, in order of first visit.
pub fn sampled_voxels(config: &GridConfig, a: &Point3<f64>, b: &Point3<f64>, step: f64) -> Vec<VoxelIndex> {
    let bounds = config.bounds();
    let mut out: Vec<VoxelIndex> = Vec::new();
    let Some((t0, t1)) = clip_params(a, b, &bounds.min, &bounds.max) else {
        return out;
    };
    let len = (b - a).norm();
    let n = ((t1 - t0) * len / step).ceil().max(1.0) as usize;
    for k in 0..=n {
        let t = t0 + (t1 - t0) * k as f64 / n as f64;
        if let Some(v) = config.voxel_of(&(a + (b - a) * t)) {
            if out.last() != Some(&v) && !out.contains(&v) {
                out.push(v);
            }
        }
    }
    out
}

fn clip_params(a: &Point3<f64>, b: &Point3<f64>, lo: &Point3<f64>, hi: &Point3<f64>) -> Option<(f64, f64)> {
    let d = b - a;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for k in 0..3 {
        if d[k] == 0.0 {
            if a[k] < lo[k] || a[k] > hi[k] {
                return None;
            }
            continue;
        }
        let (u, v) = ((lo[k] - a[k]) / d[k], (hi[k] - a[k]) / d[k]);
        t0 = t0.max(u.min(v));
        t1 = t1.min(u.max(v));
    }
    (t0 <= t1).then_some((t0, t1))
}

/// In-grid voxels the segment meets for less than `min_len`: the cells a
/// sampling oracle may legitimately disagree on. Candidates are the
/// 26-neighbourhoods of `visited`.
pub fn grazed_voxels(
    config: &GridConfig,
    a: &Point3<f64>,
    b: &Point3<f64>,
    visited: &[VoxelIndex],
    min_len: f64,
) -> Vec<VoxelIndex> {
    let dims = config.dims();
    let mut out = Vec::new();
    for v in visited {
        for dx in -1i64..=1 {
            for dy in -1i64..=1 {
                for dz in -1i64..=1 {
                    let c = [v[0] as i64 + dx, v[1] as i64 + dy, v[2] as i64 + dz];
                    if (0..3).any(|k| c[k] < 0 || c[k] >= dims[k] as i64) {
                        continue;
                    }
                    let c = [c[0] as usize, c[1] as usize, c[2] as usize];
                    let vb = config.voxel_bounds(c);
                    if let Some(l) = clip_length(a, b, &vb.min, &vb.max) {
                        if l < min_len && !out.contains(&c) {
                            out.push(c);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Voxels on which `traverse_ray` and the sampling oracle disagree although
/// the segment runs through them for at least `2 * step` (should be none).
pub fn traversal_misses(config: &GridConfig, a: &Point3<f64>, b: &Point3<f64>, step: f64) -> Vec<VoxelIndex> {
    let walked = nbv_core::mapping::traverse_ray(config, a, b);
    let sampled = sampled_voxels(config, a, b, step);
    walked
        .iter()
        .filter(|v| !sampled.contains(v))
        .chain(sampled.iter().filter(|v| !walked.contains(v)))
        .filter(|v| {
            let vb = config.voxel_bounds(**v);
            clip_length(a, b, &vb.min, &vb.max).is_some_and(|l| l >= 2.0 * step)
        })
        .copied()
        .collect()
}

/// Starts a TCP server on an ephemeral port in a background thread.
pub fn spawn_server(
    config: Arc<EnvConfig>,
    scenes: Vec<Arc<Scene>>,
) -> (
    std::net::SocketAddr,
    Arc<std::sync::atomic::AtomicBool>,
    std::thread::JoinHandle<std::io::Result<()>>,
) {
    let server = nbv_core::protocol::Server::bind(
        "127.0.0.1:0",
        config,
        scenes.into(),
        nbv_core::Execution::Parallel,
    )
    .unwrap();
    let addr = server.local_addr().unwrap();
    let stop = server.shutdown_handle();
    (addr, stop, std::thread::spawn(move || server.run()))
}

/// Coverage curve and rewards of a scripted session driven over the wire.
pub fn wire_session(addr: std::net::SocketAddr, scene: &str, actions: &[[f64; 5]]) -> (Vec<f64>, Vec<f64>) {
    use nbv_core::protocol::{Client, Reply};
    let mut client = Client::connect(addr).unwrap();
    assert!(matches!(client.hello(false).unwrap(), Reply::Hello { .. }));
    let Reply::ResetOk { obs } = client.reset(Some(scene), Some(0)).unwrap() else {
        panic!("reset failed")
    };
    let mut coverage = vec![obs.coverage];
    let mut rewards = Vec::new();
    for a in actions {
        match client.step(*a).unwrap() {
            Reply::StepResult { obs, reward, info, .. } => {
                assert_eq!(obs.coverage, info.cr);
                coverage.push(obs.coverage);
                rewards.push(reward);
            }
            other => panic!("unexpected reply {other:?}"),
        }
    }
    assert_eq!(client.close().unwrap(), Reply::Close);
    (coverage, rewards)
}

/// The same script run in process.
pub fn in_process_session(config: &Arc<EnvConfig>, scene: &Arc<Scene>, actions: &[[f64; 5]]) -> (Vec<f64>, Vec<f64>) {
    let mut env = nbv_core::env::Environment::reset(config.clone(), scene.clone(), None).unwrap();
    let rewards = actions.iter().map(|a| env.step_array(*a).unwrap().reward).collect();
    (env.state().coverage.clone(), rewards)
}

/// `n` collision-free actions aimed at the scene center.
pub fn scripted_actions(config: &EnvConfig, scene: &Scene, n: usize, seed: u64) -> Vec<[f64; 5]> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < n {
        let p = nbv_core::policy::random_pose(&mut rng, &config.action_box);
        if nbv_core::env::check_collision(scene.bvh(), &p.position, config.collision_radius) {
            continue;
        }
        let aimed = nbv_core::geometry::Pose5D::look_at(p.position, scene.center()).unwrap_or(p);
        out.push(aimed.to_array());
    }
    out
}

/// `n` collision-free actions that keep their random heading, so coverage
/// grows slowly and scripted episodes rarely end early.
pub fn wandering_actions(config: &EnvConfig, scene: &Scene, n: usize, seed: u64) -> Vec<[f64; 5]> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < n {
        let p = nbv_core::policy::random_pose(&mut rng, &config.action_box);
        if !nbv_core::env::check_collision(scene.bvh(), &p.position, config.collision_radius) {
            out.push(p.to_array());
        }
    }
    out
}

pub fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

/// O(n*m) symmetric Chamfer distance in centimeters.
pub fn brute_force_chamfer(a: &[Point3<f64>], b: &[Point3<f64>]) -> f64 {
    let directed = |from: &[Point3<f64>], to: &[Point3<f64>]| {
        from.iter()
            .map(|p| to.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / from.len() as f64
    };
    0.5 * (directed(a, b) + directed(b, a)) * 100.0
}

pub fn random_cloud(n: usize, seed: u64) -> Vec<Point3<f64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Point3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(0.0..4.0)))
        .collect()
}
