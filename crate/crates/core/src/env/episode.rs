use std::io::Write;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::collision::check_collision;
use super::{EnvConfig, EnvError, Scene};
use crate::exec::Execution;
use crate::geometry::Pose5D;
use crate::mapping::{backproject, coverage_ratio, integrate_depth_with, OccupancyGrid, PointCloud};
use crate::metrics::ScanAccumulator;
use crate::policy::{CollisionChecker, Policy, PolicyError, PolicyObservation};
use crate::render::{render_view_with, FrameStack};

/// Why an episode stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    /// Coverage reached the configured threshold.
    Coverage,
    /// The requested pose collided with the scene.
    Collision,
    /// The environment's step limit was reached.
    MaxSteps,
    /// The benchmark's view budget was used up.
    ViewBudget,
    /// A fixed-sequence policy ran out of poses.
    PolicyExhausted,
    /// Stopped from outside (e.g. connection closed or interrupt).
    Aborted,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Coverage => "coverage",
            Self::Collision => "collision",
            Self::MaxSteps => "max_steps",
            Self::ViewBudget => "view_budget",
            Self::PolicyExhausted => "policy_exhausted",
            Self::Aborted => "aborted",
        }
    }
}

impl std::fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TerminationReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            Self::Coverage,
            Self::Collision,
            Self::MaxSteps,
            Self::ViewBudget,
            Self::PolicyExhausted,
            Self::Aborted,
        ]
        .into_iter()
        .find(|r| r.as_str() == s)
        .ok_or_else(|| format!("unknown termination reason {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EpisodeStatus {
    Running,
    Done(TerminationReason),
}

/// Diagnostics attached to a step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub cr_before: f64,
    pub cr_after: f64,
    pub collision: bool,
    /// The action was moved into the action box or its pitch clamped.
    pub clamped: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    /// Coverage reward minus penalties.
    pub reward: f64,
    /// `(CR_after - CR_before) / 100`; zero on a collision.
    pub coverage_reward: f64,
    pub terminated: bool,
    pub reason: Option<TerminationReason>,
    pub info: StepInfo,
    /// The pose actually applied (after clamping).
    pub pose: Pose5D,
}

/// One line of a trajectory export. Step 0 is the reset view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub pose: Pose5D,
    pub reward: f64,
    pub coverage_reward: f64,
    pub cr: f64,
    #[serde(default)]
    pub collision: bool,
    #[serde(default)]
    pub clamped: bool,
}

/// Everything that evolves during an episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeState {
    pub step: usize,
    /// Reset pose followed by every applied action.
    pub poses: Vec<Pose5D>,
    pub frames: FrameStack,
    pub grid: OccupancyGrid,
    /// `CR_0..CR_step`, percent.
    pub coverage: Vec<f64>,
    pub cumulative_reward: f64,
    pub status: EpisodeStatus,
    pub trajectory: Vec<StepRecord>,
    scan: ScanAccumulator,
}

impl EpisodeState {
    pub fn is_running(&self) -> bool {
        self.status == EpisodeStatus::Running
    }

    pub fn current_coverage(&self) -> f64 {
        *self.coverage.last().expect("coverage history starts at reset")
    }

    pub fn reason(&self) -> Option<TerminationReason> {
        match self.status {
            EpisodeStatus::Running => None,
            EpisodeStatus::Done(r) => Some(r),
        }
    }

    /// Union of all back-projected depth points, downsampled at grid
    /// resolution.
    pub fn scanned_cloud(&self) -> PointCloud {
        self.scan.cloud()
    }
}

/// One scan of one scene: applies actions, renders and fuses views, and
/// scores coverage.
#[derive(Clone, Debug)]
pub struct Environment {
    config: Arc<EnvConfig>,
    scene: Arc<Scene>,
    state: EpisodeState,
    exec: Execution,
}

impl Environment {
    /// Starts an episode: fresh grid, first view captured and fused.
    ///
    /// Without `start`, the camera starts at the top `(min x, min y)`
    /// corner of the action box looking at the scene center.
    pub fn reset(config: Arc<EnvConfig>, scene: Arc<Scene>, start: Option<Pose5D>) -> Result<Self, EnvError> {
        Self::reset_with(config, scene, start, Execution::default())
    }

    pub fn reset_with(
        config: Arc<EnvConfig>,
        scene: Arc<Scene>,
        start: Option<Pose5D>,
        exec: Execution,
    ) -> Result<Self, EnvError> {
        config.validate()?;
        let pose = match start {
            Some(p) => {
                if !config.action_box.contains(&p.position) {
                    return Err(EnvError::InvalidAction(format!(
                        "start position {:?} outside the action box",
                        p.position.coords.as_slice()
                    )));
                }
                p
            }
            None => default_start(&config, &scene)?,
        };
        if check_collision(scene.bvh(), &pose.position, config.collision_radius) {
            return Err(EnvError::StartCollision(pose.to_array()));
        }
        let grid_config = scene.grid().with_fusion_of(&config.grid);
        let state = EpisodeState {
            step: 0,
            poses: vec![pose],
            frames: FrameStack::new(config.frame_stack_k),
            grid: OccupancyGrid::new(grid_config.clone()),
            coverage: Vec::with_capacity(config.max_steps + 1),
            cumulative_reward: 0.0,
            status: EpisodeStatus::Running,
            trajectory: Vec::with_capacity(config.max_steps + 1),
            scan: ScanAccumulator::new(grid_config.origin(), grid_config.voxel_size()),
        };
        let mut env = Self {
            config,
            scene,
            state,
            exec,
        };
        let cr0 = env.capture(&pose)?;
        env.state.coverage.push(cr0);
        env.state.trajectory.push(StepRecord {
            step: 0,
            pose,
            reward: 0.0,
            coverage_reward: 0.0,
            cr: cr0,
            collision: false,
            clamped: false,
        });
        if cr0 >= env.config.coverage_done_threshold {
            env.state.status = EpisodeStatus::Done(TerminationReason::Coverage);
        }
        Ok(env)
    }

    /// Renders at `pose`, fuses the depth and returns the new coverage.
    fn capture(&mut self, pose: &Pose5D) -> Result<f64, EnvError> {
        let (depth, gray) = render_view_with(
            self.scene.bvh(),
            pose,
            &self.config.intrinsics,
            &self.config.light,
            self.exec,
        );
        integrate_depth_with(&mut self.state.grid, &depth, self.exec)?;
        self.state.scan.add(&backproject(&depth));
        self.state.frames.push(gray);
        Ok(coverage_ratio(&self.state.grid, &self.scene.ground_truth().voxels)?)
    }

    /// Applies an action given as `[x, y, z, pitch, yaw]`. Positions outside
    /// the action box and out-of-range pitches are clamped and flagged.
    pub fn step_array(&mut self, action: [f64; 5]) -> Result<StepOutcome, EnvError> {
        if !self.state.is_running() {
            return Err(EnvError::EpisodeDone(self.state.reason().expect("finished")));
        }
        let lenient = Pose5D::from_array_lenient(action).map_err(|e| EnvError::InvalidAction(e.to_string()))?;
        let (position, moved) = self.config.action_box.clamp(&lenient.position);
        let clamped = moved || lenient.pitch != action[3];
        let pose = Pose5D::new(position, lenient.pitch, lenient.yaw).expect("clamped pose is valid");
        self.apply(pose, clamped)
    }

    pub fn step(&mut self, action: &Pose5D) -> Result<StepOutcome, EnvError> {
        self.step_array(action.to_array())
    }

    fn apply(&mut self, pose: Pose5D, clamped: bool) -> Result<StepOutcome, EnvError> {
        let cr_before = self.state.current_coverage();
        let next = self.state.step + 1;
        let collision = check_collision(self.scene.bvh(), &pose.position, self.config.collision_radius);
        let (reward, coverage_reward, cr_after, status) = if collision {
            (
                -self.config.collision_penalty,
                0.0,
                cr_before,
                EpisodeStatus::Done(TerminationReason::Collision),
            )
        } else {
            let cr_after = self.capture(&pose)?;
            let coverage_reward = (cr_after - cr_before) / 100.0;
            let penalty = if next > self.config.keyframe_budget {
                self.config.budget_penalty
            } else {
                0.0
            };
            let status = if cr_after >= self.config.coverage_done_threshold {
                EpisodeStatus::Done(TerminationReason::Coverage)
            } else if next >= self.config.max_steps {
                EpisodeStatus::Done(TerminationReason::MaxSteps)
            } else {
                EpisodeStatus::Running
            };
            (coverage_reward - penalty, coverage_reward, cr_after, status)
        };
        let s = &mut self.state;
        s.step = next;
        s.poses.push(pose);
        s.coverage.push(cr_after);
        s.cumulative_reward += reward;
        s.status = status;
        s.trajectory.push(StepRecord {
            step: next,
            pose,
            reward,
            coverage_reward,
            cr: cr_after,
            collision,
            clamped,
        });
        let reason = s.reason();
        Ok(StepOutcome {
            reward,
            coverage_reward,
            terminated: reason.is_some(),
            reason,
            info: StepInfo {
                cr_before,
                cr_after,
                collision,
                clamped,
            },
            pose,
        })
    }

    /// Ends a running episode with `reason`; no effect once finished.
    pub fn finish(&mut self, reason: TerminationReason) {
        if self.state.is_running() {
            self.state.status = EpisodeStatus::Done(reason);
        }
    }

    pub fn abort(&mut self) {
        self.finish(TerminationReason::Aborted);
    }

    pub fn state(&self) -> &EpisodeState {
        &self.state
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn scene(&self) -> &Arc<Scene> {
        &self.scene
    }

    /// Read-only view handed to policies.
    pub fn observation(&self) -> PolicyObservation<'_> {
        PolicyObservation {
            step: self.state.step,
            poses: &self.state.poses,
            grid: &self.state.grid,
            coverage: self.state.current_coverage(),
            frames: &self.state.frames,
            scene_bounds: self.scene.bounds(),
            action_box: self.config.action_box,
            intrinsics: self.config.intrinsics,
            collision: CollisionChecker::new(self.scene.bvh(), self.config.collision_radius),
        }
    }

    /// Trajectory as JSON lines, one [`StepRecord`] per line.
    pub fn write_trajectory(&self, mut out: impl Write) -> std::io::Result<()> {
        for r in &self.state.trajectory {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn default_start(config: &EnvConfig, scene: &Scene) -> Result<Pose5D, EnvError> {
    let b = &config.action_box;
    let corner = Point3::new(b.min.x, b.min.y, b.max.z);
    Pose5D::look_at(corner, scene.center()).map_err(|e| EnvError::InvalidAction(e.to_string()))
}

/// Runs `policy` from reset until the episode terminates or `view_budget`
/// views after the reset view have been captured.
pub fn run_episode(
    config: Arc<EnvConfig>,
    scene: Arc<Scene>,
    policy: &mut dyn Policy,
    view_budget: usize,
) -> Result<Environment, EnvError> {
    run_episode_with(config, scene, policy, view_budget, None, Execution::default())
}

pub fn run_episode_with(
    config: Arc<EnvConfig>,
    scene: Arc<Scene>,
    policy: &mut dyn Policy,
    view_budget: usize,
    start: Option<Pose5D>,
    exec: Execution,
) -> Result<Environment, EnvError> {
    run_episode_until(config, scene, policy, view_budget, start, exec, &AtomicBool::new(false))
}

/// Like [`run_episode_with`], but checks `cancel` before every step and
/// ends the episode as aborted once it is set.
pub fn run_episode_until(
    config: Arc<EnvConfig>,
    scene: Arc<Scene>,
    policy: &mut dyn Policy,
    view_budget: usize,
    start: Option<Pose5D>,
    exec: Execution,
    cancel: &AtomicBool,
) -> Result<Environment, EnvError> {
    if view_budget == 0 || view_budget > config.max_steps {
        return Err(EnvError::InvalidConfig(format!(
            "view budget {view_budget} must lie in 1..={}",
            config.max_steps
        )));
    }
    let mut env = Environment::reset_with(config, scene, start, exec)?;
    while env.state.is_running() {
        if cancel.load(Ordering::Relaxed) {
            env.abort();
            break;
        }
        if env.state.step >= view_budget {
            env.finish(TerminationReason::ViewBudget);
            break;
        }
        let action = match policy.act(&env.observation()) {
            Ok(a) => a,
            Err(PolicyError::Exhausted) => {
                env.finish(TerminationReason::PolicyExhausted);
                break;
            }
            Err(e) => return Err(EnvError::Policy(e)),
        };
        env.step(&action)?;
    }
    Ok(env)
}
