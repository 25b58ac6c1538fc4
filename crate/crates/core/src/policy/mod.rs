//! View-planning policies: the interface the environment pulls actions
//! from, heuristic baselines, and a greedy information-gain planner.

mod fixed;
mod greedy;
mod hemisphere;
mod random;

use std::str::FromStr;

use nalgebra::Point3;
use thiserror::Error;

use crate::geometry::{Aabb, ActionBox, Bvh, CameraIntrinsics, Pose5D};
use crate::mapping::OccupancyGrid;
use crate::render::FrameStack;

pub use fixed::{load_pose_sequence, FixedSequencePolicy};
pub use greedy::{frustum_contains, info_gain, GreedyInfoGainPolicy, DEFAULT_CANDIDATES};
pub use hemisphere::{hemisphere_poses, HemisphereMode, HemisphereSpec, HemispherePolicy};
pub use random::{random_pose, RandomPolicy, MAX_RESAMPLES};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("pose sequence exhausted")]
    Exhausted,
    #[error("no collision-free pose after {0} samples")]
    NoFreePose(usize),
    #[error("invalid hemisphere: {0}")]
    InvalidHemisphere(String),
    #[error("unknown policy {0:?}")]
    UnknownPolicy(String),
    #[error("cannot load poses from {path}: {message}")]
    Load { path: String, message: String },
}

/// Collision query against the scene, without exposing its geometry.
#[derive(Clone, Copy, Debug)]
pub struct CollisionChecker<'a> {
    bvh: &'a Bvh,
    radius: f64,
}

impl<'a> CollisionChecker<'a> {
    pub fn new(bvh: &'a Bvh, radius: f64) -> Self {
        Self { bvh, radius }
    }

    pub fn collides(&self, p: &Point3<f64>) -> bool {
        crate::env::check_collision(self.bvh, p, self.radius)
    }
}

/// What a policy may look at when choosing the next view.
#[derive(Clone, Copy, Debug)]
pub struct PolicyObservation<'a> {
    pub step: usize,
    /// Reset pose followed by all applied actions.
    pub poses: &'a [Pose5D],
    pub grid: &'a OccupancyGrid,
    /// Current coverage, percent.
    pub coverage: f64,
    pub frames: &'a FrameStack,
    /// Bounding box of the scene being scanned.
    pub scene_bounds: Aabb,
    pub action_box: ActionBox,
    pub intrinsics: CameraIntrinsics,
    pub collision: CollisionChecker<'a>,
}

/// Chooses the next viewpoint. One instance drives one episode.
pub trait Policy: Send {
    fn name(&self) -> &str;

    fn act(&mut self, obs: &PolicyObservation<'_>) -> Result<Pose5D, PolicyError>;
}

/// Built-in policy selector, parsed from names like `uniform-hemisphere`
/// or `fixed:path/to/poses.json`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PolicyKind {
    Random,
    RandomHemisphere,
    UniformHemisphere,
    Greedy,
    Fixed(String),
}

impl PolicyKind {
    pub fn name(&self) -> String {
        match self {
            Self::Random => "random".into(),
            Self::RandomHemisphere => "random-hemisphere".into(),
            Self::UniformHemisphere => "uniform-hemisphere".into(),
            Self::Greedy => "greedy".into(),
            Self::Fixed(p) => format!("fixed:{p}"),
        }
    }

    /// Whether the policy's output depends on its seed.
    pub fn is_stochastic(&self) -> bool {
        matches!(self, Self::Random | Self::RandomHemisphere | Self::Greedy)
    }

    /// Policy instance for one episode on a scene with the given bounds.
    ///
    /// Hemisphere layouts follow the view budget: 5 rings of 6 for 30
    /// views, 4 rings of 5 for 20, otherwise the smallest near-square
    /// layout with at least `view_budget` poses.
    pub fn build(&self, scene_bounds: &Aabb, view_budget: usize, seed: u64) -> Result<Box<dyn Policy>, PolicyError> {
        let (n_heights, n_azimuths) = hemisphere_layout(view_budget);
        let spec = |mode| -> Result<HemispherePolicy, PolicyError> {
            let s = HemisphereSpec::enclosing(scene_bounds, n_heights, n_azimuths)?;
            HemispherePolicy::new(s, mode, seed)
        };
        Ok(match self {
            Self::Random => Box::new(RandomPolicy::new(seed)),
            Self::RandomHemisphere => Box::new(spec(HemisphereMode::Random)?),
            Self::UniformHemisphere => Box::new(spec(HemisphereMode::Uniform)?),
            Self::Greedy => Box::new(GreedyInfoGainPolicy::new(seed)),
            Self::Fixed(path) => Box::new(FixedSequencePolicy::new(load_pose_sequence(path)?).named(self.name())),
        })
    }
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "random" => Self::Random,
            "random-hemisphere" => Self::RandomHemisphere,
            "uniform-hemisphere" => Self::UniformHemisphere,
            "greedy" => Self::Greedy,
            _ => match s.strip_prefix("fixed:") {
                Some(p) if !p.is_empty() => Self::Fixed(p.to_string()),
                _ => return Err(PolicyError::UnknownPolicy(s.to_string())),
            },
        })
    }
}

/// `(rings, poses per ring)` for a view budget.
pub fn hemisphere_layout(view_budget: usize) -> (usize, usize) {
    match view_budget {
        30 => (5, 6),
        20 => (4, 5),
        n => {
            let n = n.max(1);
            let h = (n as f64).sqrt().floor().max(1.0) as usize;
            (h, n.div_ceil(h))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names() {
        for n in ["random", "random-hemisphere", "uniform-hemisphere", "greedy", "fixed:a.json"] {
            assert_eq!(n.parse::<PolicyKind>().unwrap().name(), n);
        }
        assert!("fixed:".parse::<PolicyKind>().is_err());
        assert!("scan-rl".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn layouts() {
        assert_eq!(hemisphere_layout(30), (5, 6));
        assert_eq!(hemisphere_layout(20), (4, 5));
        assert_eq!(hemisphere_layout(5), (2, 3));
        assert_eq!(hemisphere_layout(1), (1, 1));
        for n in 1..60 {
            let (h, a) = hemisphere_layout(n);
            assert!(h * a >= n);
        }
    }
}
