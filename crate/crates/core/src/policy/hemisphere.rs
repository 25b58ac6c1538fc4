use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Policy, PolicyError, PolicyObservation, MAX_RESAMPLES};
use crate::geometry::{Aabb, ActionBox, Pose5D};

/// Smallest hemisphere radius used around a scene, meters.
pub const MIN_RADIUS: f64 = 9.0;
/// Clearance between the scene's farthest point and the hemisphere.
pub const RADIUS_MARGIN: f64 = 1.0;

/// Camera positions on a hemisphere above `center` (the upper half, polar
/// angle in `(0, pi/2]`), all looking at the center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HemisphereSpec {
    pub center: Point3<f64>,
    pub radius: f64,
    pub n_heights: usize,
    pub n_azimuths: usize,
}

impl HemisphereSpec {
    pub fn new(center: Point3<f64>, radius: f64, n_heights: usize, n_azimuths: usize) -> Result<Self, PolicyError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(PolicyError::InvalidHemisphere(format!("radius {radius} must be positive")));
        }
        if !center.coords.iter().all(|c| c.is_finite()) {
            return Err(PolicyError::InvalidHemisphere("center must be finite".into()));
        }
        if center.z < 0.0 {
            return Err(PolicyError::InvalidHemisphere(format!(
                "center height {} puts the lowest ring below the ground",
                center.z
            )));
        }
        if n_heights == 0 || n_azimuths == 0 {
            return Err(PolicyError::InvalidHemisphere("ring counts must be positive".into()));
        }
        Ok(Self {
            center,
            radius,
            n_heights,
            n_azimuths,
        })
    }

    /// Hemisphere centered on the footprint center of `bounds`, with a
    /// radius that clears every corner of the box.
    pub fn enclosing(bounds: &Aabb, n_heights: usize, n_azimuths: usize) -> Result<Self, PolicyError> {
        let c = bounds.center();
        let center = Point3::new(c.x, c.y, bounds.min.z.max(0.0));
        let reach = bounds
            .corners()
            .iter()
            .map(|p| (p - center).norm())
            .fold(0.0, f64::max);
        Self::new(center, MIN_RADIUS.max(reach + RADIUS_MARGIN), n_heights, n_azimuths)
    }

    pub fn pose_count(&self) -> usize {
        self.n_heights * self.n_azimuths
    }

    /// Pose at polar angle `theta` (from straight up) and azimuth `phi`.
    pub fn pose_at(&self, theta: f64, phi: f64) -> Pose5D {
        let dir = Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
        Pose5D::look_at(self.center + dir * self.radius, self.center).expect("radius is positive")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HemisphereMode {
    /// Independent area-uniform samples over the hemisphere.
    Random,
    /// Rings at equal polar-angle steps, evenly spaced azimuths.
    Uniform,
}

/// `n_heights * n_azimuths` poses. Uniform mode orders them ring by ring
/// from the top: ring `k` (1-based) sits at polar angle `k * (pi/2) /
/// n_heights` and holds azimuths `2 pi j / n_azimuths`. Random mode draws
/// `cos(polar)` uniformly from `(0, 1]` and the azimuth from `[0, 2 pi)`.
pub fn hemisphere_poses(spec: &HemisphereSpec, mode: HemisphereMode, seed: u64) -> Vec<Pose5D> {
    let n = spec.pose_count();
    match mode {
        HemisphereMode::Uniform => {
            let mut out = Vec::with_capacity(n);
            for k in 1..=spec.n_heights {
                let theta = k as f64 * FRAC_PI_2 / spec.n_heights as f64;
                for j in 0..spec.n_azimuths {
                    let phi = TAU * j as f64 / spec.n_azimuths as f64;
                    out.push(spec.pose_at(theta, phi));
                }
            }
            out
        }
        HemisphereMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| random_hemisphere_pose(spec, &mut rng)).collect()
        }
    }
}

fn random_hemisphere_pose(spec: &HemisphereSpec, rng: &mut impl Rng) -> Pose5D {
    let cos_theta = 1.0 - rng.random::<f64>();
    let phi = rng.random_range(0.0..TAU);
    spec.pose_at(cos_theta.acos(), phi)
}

/// Moves a hemisphere pose into the action box, re-aiming at the center if
/// it had to move.
fn fit_to_box(pose: Pose5D, center: &Point3<f64>, action_box: &ActionBox) -> Pose5D {
    let (p, moved) = action_box.clamp(&pose.position);
    if !moved {
        return pose;
    }
    Pose5D::look_at(p, *center).unwrap_or(Pose5D { position: p, ..pose })
}

/// Hemisphere baselines. Poses that fall outside the action box are
/// pulled onto its boundary and re-aimed at the center.
#[derive(Clone, Debug)]
pub struct HemispherePolicy {
    spec: HemisphereSpec,
    mode: HemisphereMode,
    sequence: Vec<Pose5D>,
    next: usize,
    rng: ChaCha8Rng,
}

impl HemispherePolicy {
    pub fn new(spec: HemisphereSpec, mode: HemisphereMode, seed: u64) -> Result<Self, PolicyError> {
        let sequence = match mode {
            HemisphereMode::Uniform => hemisphere_poses(&spec, mode, seed),
            HemisphereMode::Random => Vec::new(),
        };
        Ok(Self {
            spec,
            mode,
            sequence,
            next: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn spec(&self) -> &HemisphereSpec {
        &self.spec
    }
}

impl Policy for HemispherePolicy {
    fn name(&self) -> &str {
        match self.mode {
            HemisphereMode::Random => "random-hemisphere",
            HemisphereMode::Uniform => "uniform-hemisphere",
        }
    }

    fn act(&mut self, obs: &PolicyObservation<'_>) -> Result<Pose5D, PolicyError> {
        match self.mode {
            HemisphereMode::Uniform => {
                let pose = *self.sequence.get(self.next).ok_or(PolicyError::Exhausted)?;
                self.next += 1;
                Ok(fit_to_box(pose, &self.spec.center, &obs.action_box))
            }
            HemisphereMode::Random => {
                for _ in 0..MAX_RESAMPLES {
                    let pose = random_hemisphere_pose(&self.spec, &mut self.rng);
                    let pose = fit_to_box(pose, &self.spec.center, &obs.action_box);
                    if !obs.collision.collides(&pose.position) {
                        return Ok(pose);
                    }
                }
                Err(PolicyError::NoFreePose(MAX_RESAMPLES))
            }
        }
    }
}
