use std::ops::ControlFlow;

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::hemisphere::{HemisphereMode, HemisphereSpec};
use super::{hemisphere_poses, Policy, PolicyError, PolicyObservation, RandomPolicy};
use crate::exec::Execution;
use crate::geometry::{CameraIntrinsics, Pose5D};
use crate::mapping::{visit_voxels, OccupancyGrid, VoxelState};

pub const DEFAULT_CANDIDATES: usize = 64;

/// True if `p` lies inside the camera's pinhole frustum and within range.
pub fn frustum_contains(pose: &Pose5D, intr: &CameraIntrinsics, p: &Point3<f64>) -> bool {
    let local = pose.frame().to_local(p);
    local.x > 0.0
        && local.norm() <= intr.max_range()
        && local.y.abs() <= local.x * intr.tan_half_horizontal()
        && local.z.abs() <= local.x * intr.tan_half_vertical()
}

/// Number of Unknown voxels whose centers lie in the frustum of `pose` and
/// can be reached from the camera without crossing an Occupied voxel.
pub fn info_gain(grid: &OccupancyGrid, pose: &Pose5D, intr: &CameraIntrinsics) -> usize {
    let config = grid.config();
    let frame = pose.frame();
    let origin = frame.origin();
    let (tan_h, tan_v, range) = (intr.tan_half_horizontal(), intr.tan_half_vertical(), intr.max_range());
    let mut gain = 0;
    for i in 0..config.voxel_count() {
        if grid.state_linear(i) != VoxelState::Unknown {
            continue;
        }
        let target = config.unlinear(i);
        let c = config.voxel_center(target);
        let local = frame.to_local(&c);
        if !(local.x > 0.0 && local.y.abs() <= local.x * tan_h && local.z.abs() <= local.x * tan_v) {
            continue;
        }
        if local.norm() > range {
            continue;
        }
        let mut visible = false;
        visit_voxels(config, &origin, &c, |v| {
            if v == target {
                visible = true;
                return ControlFlow::Break(());
            }
            if grid.state(v) == VoxelState::Occupied {
                return ControlFlow::Break(());
            }
            ControlFlow::Continue(())
        });
        if visible {
            gain += 1;
        }
    }
    gain
}

/// Picks the candidate with the highest information gain, scoring
/// candidates that fail the collision test as zero and preferring the lowest
/// index on ties. Returns `None` if every score is zero.
pub(crate) fn best_candidate(
    grid: &OccupancyGrid,
    candidates: &[Pose5D],
    free: &[bool],
    intr: &CameraIntrinsics,
    exec: Execution,
) -> Option<(usize, usize)> {
    let scores = exec.map_indexed(candidates.len(), |i| {
        if free[i] {
            info_gain(grid, &candidates[i], intr)
        } else {
            0
        }
    });
    let mut best: Option<(usize, usize)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s > 0 && best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best
}

/// Greedy next-best-view on the occupancy grid: samples candidate views,
/// half uniformly in the action box and half on a hemisphere around the
/// scene, all aimed at the scene center, and takes the one that would see
/// the most Unknown voxels. Falls back to a random free pose when no
/// candidate sees anything new.
#[derive(Clone, Debug)]
pub struct GreedyInfoGainPolicy {
    rng: ChaCha8Rng,
    fallback: RandomPolicy,
    candidates: usize,
    exec: Execution,
}

impl GreedyInfoGainPolicy {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            fallback: RandomPolicy::new(seed ^ 0x9e37_79b9_7f4a_7c15),
            candidates: DEFAULT_CANDIDATES,
            exec: Execution::default(),
        }
    }

    pub fn with_candidates(mut self, n: usize) -> Self {
        self.candidates = n.max(1);
        self
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    fn sample_candidates(&mut self, obs: &PolicyObservation<'_>) -> Vec<Pose5D> {
        let target = obs.scene_bounds.center();
        let half = self.candidates / 2;
        let b = obs.action_box;
        let mut out = Vec::with_capacity(self.candidates);
        while out.len() < half {
            let p = Point3::new(
                self.rng.random_range(b.min.x..=b.max.x),
                self.rng.random_range(b.min.y..=b.max.y),
                self.rng.random_range(b.min.z..=b.max.z),
            );
            if let Ok(pose) = Pose5D::look_at(p, target) {
                out.push(pose);
            }
        }
        let shell = HemisphereSpec::enclosing(&obs.scene_bounds, 1, self.candidates - half);
        if let Ok(spec) = shell {
            let seed = self.rng.random::<u64>();
            for pose in hemisphere_poses(&spec, HemisphereMode::Random, seed) {
                let (p, _) = b.clamp(&pose.position);
                out.push(Pose5D::look_at(p, spec.center).unwrap_or(pose));
            }
        }
        out
    }
}

impl Policy for GreedyInfoGainPolicy {
    fn name(&self) -> &str {
        "greedy"
    }

    fn act(&mut self, obs: &PolicyObservation<'_>) -> Result<Pose5D, PolicyError> {
        let candidates = self.sample_candidates(obs);
        let free: Vec<bool> = candidates.iter().map(|c| !obs.collision.collides(&c.position)).collect();
        match best_candidate(obs.grid, &candidates, &free, &obs.intrinsics, self.exec) {
            Some((i, _)) => Ok(candidates[i]),
            None => {
                let checker = obs.collision;
                self.fallback.sample(&obs.action_box, |p| checker.collides(p))
            }
        }
    }
}
