use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::geometry::{ActionBox, CameraIntrinsics};
use crate::mapping::GridConfig;
use crate::render::Light;

/// Episode rules, sensor and map settings. Every field has a default, so a
/// JSON config only needs the fields it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub action_box: ActionBox,
    pub max_steps: usize,
    /// Coverage (percent) at which an episode ends successfully.
    pub coverage_done_threshold: f64,
    /// Views after which each further step pays `budget_penalty`.
    pub keyframe_budget: usize,
    /// Magnitude of the (negative) collision reward.
    pub collision_penalty: f64,
    pub budget_penalty: f64,
    pub collision_radius: f64,
    pub intrinsics: CameraIntrinsics,
    /// Default lattice and the fusion constants used by every episode.
    pub grid: GridConfig,
    /// Preceding grayscale frames kept alongside the current one.
    pub frame_stack_k: usize,
    pub light: Light,
    pub gt_samples: usize,
    pub gt_seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            action_box: ActionBox::default(),
            max_steps: 100,
            coverage_done_threshold: 99.0,
            keyframe_budget: 30,
            collision_penalty: 10.0,
            budget_penalty: 0.01,
            collision_radius: 0.3,
            intrinsics: CameraIntrinsics::default(),
            grid: GridConfig::default(),
            frame_stack_k: 4,
            light: Light::default(),
            gt_samples: 100_000,
            gt_seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::InvalidConfig(m.to_string()));
        let b = &self.action_box;
        if !(0..3).all(|k| b.max[k] > b.min[k]) {
            return bad("action box must have positive volume");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1");
        }
        if !(self.coverage_done_threshold > 0.0 && self.coverage_done_threshold <= 100.0) {
            return bad("coverage_done_threshold must lie in (0, 100]");
        }
        if !(self.collision_penalty >= 0.0 && self.budget_penalty >= 0.0) {
            return bad("penalties are magnitudes and must be non-negative");
        }
        if !(self.collision_radius >= 0.0 && self.collision_radius.is_finite()) {
            return bad("collision_radius must be non-negative");
        }
        if self.gt_samples == 0 {
            return bad("gt_samples must be positive");
        }
        Ok(())
    }

    /// Reads and validates a JSON config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, EnvError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| EnvError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let config: EnvConfig = serde_json::from_str(&text).map_err(|e| EnvError::ConfigParse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }
}
