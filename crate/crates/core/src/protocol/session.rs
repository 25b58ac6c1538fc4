use std::sync::Arc;

use base64::Engine;
use serde::Deserialize;
use serde_json::Value;

use super::{codes, ObservationPayload, Reply, StepInfoPayload, PROTOCOL_VERSION};
use crate::env::{EnvConfig, EnvError, Environment, Scene};
use crate::exec::Execution;
use crate::geometry::Pose5D;
use crate::mapping::downsample_grid;

/// Whether the connection should stay open after a reply.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Close,
}

#[derive(Deserialize)]
struct HelloRequest {
    #[serde(default)]
    want_frames: bool,
    /// Optional max-pooled grid size for observations.
    #[serde(default)]
    pool_dims: Option<[usize; 3]>,
}

#[derive(Deserialize)]
struct ResetRequest {
    #[serde(default)]
    scene: Option<String>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    start: Option<[f64; 5]>,
}

/// Protocol state of one connection: at most one episode at a time.
pub struct Session {
    config: Arc<EnvConfig>,
    scenes: Arc<[Arc<Scene>]>,
    exec: Execution,
    want_frames: bool,
    pool_dims: Option<[usize; 3]>,
    env: Option<Environment>,
}

impl Session {
    pub fn new(config: Arc<EnvConfig>, scenes: Arc<[Arc<Scene>]>, exec: Execution) -> Self {
        Self {
            config,
            scenes,
            exec,
            want_frames: false,
            pool_dims: None,
            env: None,
        }
    }

    pub fn environment(&self) -> Option<&Environment> {
        self.env.as_ref()
    }

    /// Marks a running episode as aborted, e.g. on disconnect or shutdown.
    /// Returns true if there was one.
    pub fn abort(&mut self) -> bool {
        match &mut self.env {
            Some(env) if env.state().is_running() => {
                env.abort();
                log::info!(
                    "episode on {} aborted at step {} (CR {:.2}%)",
                    env.scene().id(),
                    env.state().step,
                    env.state().current_coverage()
                );
                true
            }
            _ => false,
        }
    }

    /// Handles one request line (without its newline).
    pub fn handle(&mut self, line: &[u8]) -> (Reply, Control) {
        let text = match std::str::from_utf8(line) {
            Ok(t) => t,
            Err(e) => return (Reply::error(codes::BAD_JSON, format!("invalid UTF-8: {e}")), Control::Continue),
        };
        let value: Value = match serde_json::from_str(text) {
            Ok(v) => v,
            Err(e) => return (Reply::error(codes::BAD_JSON, e.to_string()), Control::Continue),
        };
        let Some(kind) = value.get("type").and_then(Value::as_str) else {
            return (
                Reply::error(codes::BAD_REQUEST, "request must be an object with a string \"type\""),
                Control::Continue,
            );
        };
        match kind {
            "hello" => (self.hello(&value), Control::Continue),
            "reset" => (self.reset(&value), Control::Continue),
            "step" => (self.step(&value), Control::Continue),
            "close" => {
                self.abort();
                (Reply::Close, Control::Close)
            }
            other => (
                Reply::error(codes::UNKNOWN_TYPE, format!("unknown message type {other:?}")),
                Control::Continue,
            ),
        }
    }

    fn hello(&mut self, value: &Value) -> Reply {
        let req: HelloRequest = match HelloRequest::deserialize(value) {
            Ok(r) => r,
            Err(e) => return Reply::error(codes::BAD_REQUEST, e.to_string()),
        };
        let dims = self.config.grid.dims();
        if let Some(p) = req.pool_dims {
            if (0..3).any(|k| p[k] == 0 || !dims[k].is_multiple_of(p[k])) {
                return Reply::error(
                    codes::BAD_REQUEST,
                    format!("pool_dims {p:?} must divide the grid dims {dims:?}"),
                );
            }
        }
        self.want_frames = req.want_frames;
        self.pool_dims = req.pool_dims;
        let b = &self.config.action_box;
        Reply::Hello {
            version: PROTOCOL_VERSION.into(),
            grid_dims: req.pool_dims.unwrap_or(dims),
            action_box: [b.min.into(), b.max.into()],
        }
    }

    fn reset(&mut self, value: &Value) -> Reply {
        let req: ResetRequest = match ResetRequest::deserialize(value) {
            Ok(r) => r,
            Err(e) => return Reply::error(codes::BAD_REQUEST, e.to_string()),
        };
        // Without an explicit scene the seed picks one, so a trainer can
        // cycle through scenes by seed alone.
        let scene = match &req.scene {
            Some(id) => match self.scenes.iter().find(|s| s.id() == id) {
                Some(s) => s.clone(),
                None => return Reply::error(codes::UNKNOWN_SCENE, format!("no scene with id {id:?}")),
            },
            None => {
                let i = (req.seed.unwrap_or(0) % self.scenes.len() as u64) as usize;
                self.scenes[i].clone()
            }
        };
        let start = match req.start.map(Pose5D::from_array).transpose() {
            Ok(s) => s,
            Err(e) => return Reply::error(codes::BAD_ACTION, format!("start pose: {e}")),
        };
        self.abort();
        self.env = None;
        match Environment::reset_with(self.config.clone(), scene, start, self.exec) {
            Ok(env) => {
                let obs = self.observation(&env);
                self.env = Some(env);
                Reply::ResetOk { obs }
            }
            Err(e @ (EnvError::InvalidAction(_) | EnvError::StartCollision(_))) => {
                Reply::error(codes::BAD_ACTION, e.to_string())
            }
            Err(e) => Reply::error(codes::RESET_FAILED, e.to_string()),
        }
    }

    fn step(&mut self, value: &Value) -> Reply {
        let action = match parse_action(value.get("action")) {
            Ok(a) => a,
            Err(m) => return Reply::error(codes::BAD_ACTION, m),
        };
        let Some(env) = self.env.as_mut() else {
            return Reply::error(codes::NO_EPISODE, "send reset before step");
        };
        let outcome = match env.step_array(action) {
            Ok(o) => o,
            Err(EnvError::EpisodeDone(r)) => {
                return Reply::error(codes::EPISODE_DONE, format!("episode already ended ({r}); send reset"))
            }
            Err(EnvError::InvalidAction(m)) => return Reply::error(codes::BAD_ACTION, m),
            Err(e) => return Reply::error(codes::BAD_REQUEST, e.to_string()),
        };
        if let Some(r) = outcome.reason {
            log::info!(
                "episode on {} ended at step {}: {r}, CR {:.2}%",
                env.scene().id(),
                env.state().step,
                outcome.info.cr_after
            );
        }
        let env = self.env.as_ref().expect("episode present");
        Reply::StepResult {
            obs: self.observation(env),
            reward: outcome.reward,
            terminated: outcome.terminated,
            reason: outcome.reason.map(|r| r.to_string()),
            info: StepInfoPayload {
                cr: outcome.info.cr_after,
                collision: outcome.info.collision,
                clamped: outcome.info.clamped,
            },
        }
    }

    fn observation(&self, env: &Environment) -> ObservationPayload {
        let state = env.state();
        let grid = &state.grid;
        let (grid_dims, grid_logodds, grid_states) = match self.pool_dims {
            Some(p) if p != grid.config().dims() => match downsample_grid(grid, p) {
                Ok(pooled) => (
                    pooled.dims,
                    pooled.log_odds,
                    pooled.states.iter().map(|s| s.code()).collect(),
                ),
                // Scene lattice overrides may not divide; send it unpooled.
                Err(_) => full_grid(grid),
            },
            _ => full_grid(grid),
        };
        let (frames, frame_size) = if self.want_frames {
            let engine = base64::engine::general_purpose::STANDARD;
            let frames: Vec<String> = state.frames.iter().map(|f| engine.encode(f.to_bytes())).collect();
            let size = state.frames.latest().map(|f| [f.width, f.height]);
            (Some(frames), size)
        } else {
            (None, None)
        };
        ObservationPayload {
            step: state.step,
            pose_history: state.poses.iter().map(|p| p.to_array()).collect(),
            grid_dims,
            grid_logodds,
            grid_states,
            coverage: state.current_coverage(),
            frames,
            frame_size,
        }
    }
}

fn full_grid(grid: &crate::mapping::OccupancyGrid) -> ([usize; 3], Vec<f64>, Vec<u8>) {
    let config = grid.config();
    let states = (0..config.voxel_count()).map(|i| grid.state_linear(i).code()).collect();
    (config.dims(), grid.values().to_vec(), states)
}

fn parse_action(v: Option<&Value>) -> Result<[f64; 5], String> {
    let arr = v
        .and_then(Value::as_array)
        .ok_or("\"action\" must be an array [x, y, z, pitch, yaw]")?;
    if arr.len() != 5 {
        return Err(format!("action needs 5 numbers, got {}", arr.len()));
    }
    let mut out = [0.0; 5];
    for (o, x) in out.iter_mut().zip(arr) {
        *o = x.as_f64().ok_or_else(|| format!("action entry {x} is not a number"))?;
    }
    Ok(out)
}
