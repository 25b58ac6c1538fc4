use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Policy, PolicyError, PolicyObservation};
use crate::geometry::{ActionBox, Pose5D};

/// Samples per action before giving up on finding a collision-free pose.
pub const MAX_RESAMPLES: usize = 100;

/// Uniform position in the box, pitch in `[-pi/2, pi/2]`, yaw in `[-pi, pi)`.
pub fn random_pose(rng: &mut impl Rng, action_box: &ActionBox) -> Pose5D {
    let (lo, hi) = (action_box.min, action_box.max);
    let position = Point3::new(
        rng.random_range(lo.x..=hi.x),
        rng.random_range(lo.y..=hi.y),
        rng.random_range(lo.z..=hi.z),
    );
    let pitch = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
    let yaw = rng.random_range(-PI..PI);
    Pose5D::new(position, pitch, yaw).expect("sampled pose is valid")
}

/// Random free-space baseline: any collision-free pose in the action box.
#[derive(Clone, Debug)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Next collision-free sample, using `collides` as the test.
    pub fn sample(
        &mut self,
        action_box: &ActionBox,
        mut collides: impl FnMut(&Point3<f64>) -> bool,
    ) -> Result<Pose5D, PolicyError> {
        for _ in 0..MAX_RESAMPLES {
            let p = random_pose(&mut self.rng, action_box);
            if !collides(&p.position) {
                return Ok(p);
            }
        }
        Err(PolicyError::NoFreePose(MAX_RESAMPLES))
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn act(&mut self, obs: &PolicyObservation<'_>) -> Result<Pose5D, PolicyError> {
        let checker = obs.collision;
        self.sample(&obs.action_box, |p| checker.collides(p))
    }
}
