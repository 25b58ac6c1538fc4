//! The scanning episode: scenes and their ground truth, collision checks,
//! reward and termination rules.

mod collision;
mod config;
mod episode;
mod ground_truth;
mod scene;

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::mapping::MappingError;
use crate::policy::PolicyError;

pub use collision::{check_collision, is_inside};
pub use config::EnvConfig;
pub use episode::{
    run_episode, run_episode_until, run_episode_with, EpisodeState, EpisodeStatus, Environment, StepInfo, StepOutcome, StepRecord,
    TerminationReason,
};
pub use ground_truth::{build_ground_truth, GroundTruth, SURFACE_INSET};
pub use scene::{load_scenes, GridOverride, Scene, SceneEntry, SceneManifest};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error("cannot parse {path}: {message}")]
    ConfigParse { path: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("mesh {mesh} extends outside the grid at corner {corner:?}")]
    MeshOutsideGrid { mesh: String, corner: [f64; 3] },
    #[error("mesh {0} has no observable surface inside the grid")]
    EmptyGroundTruth(String),
    #[error("start pose {0:?} collides with the scene")]
    StartCollision([f64; 5]),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("episode already finished ({0})")]
    EpisodeDone(TerminationReason),
    #[error("policy failed: {0}")]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
}
