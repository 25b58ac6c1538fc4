//! Newline-delimited JSON protocol that lets an external process drive
//! episodes: one request per line, exactly one reply line per request.
//!
//! ```text
//! {"type":"hello","want_frames":false}          -> {"type":"hello","version":"1",..}
//! {"type":"reset","scene":"house_000","seed":0} -> {"type":"reset_ok","obs":{..}}
//! {"type":"step","action":[x,y,z,pitch,yaw]}    -> {"type":"step_result",..}
//! {"type":"close"}                              -> {"type":"close"}
//! ```
//!
//! Protocol violations get `{"type":"error","code":..,"message":..}` and
//! leave the connection usable.

mod client;
mod server;
mod session;

use serde::{Deserialize, Serialize};

pub use client::{Client, ClientError};
pub use server::{serve_stream, Server, BIND_ENV};
pub use session::{Control, Session};

pub const PROTOCOL_VERSION: &str = "1";

/// Error codes carried by `error` replies.
pub mod codes {
    pub const BAD_JSON: &str = "bad_json";
    pub const BAD_REQUEST: &str = "bad_request";
    pub const UNKNOWN_TYPE: &str = "unknown_type";
    pub const NO_EPISODE: &str = "no_episode";
    pub const BAD_ACTION: &str = "bad_action";
    pub const EPISODE_DONE: &str = "episode_done";
    pub const UNKNOWN_SCENE: &str = "unknown_scene";
    pub const RESET_FAILED: &str = "reset_failed";
}

/// Map and history state sent with every `reset_ok` and `step_result`.
///
/// Grid arrays are flattened with x fastest; `grid_states` uses 0, 1, 2
/// for unknown, free, occupied. `frames`, when requested in `hello`, holds
/// the stacked grayscale images oldest first, each base64 of 8-bit rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationPayload {
    pub step: usize,
    pub pose_history: Vec<[f64; 5]>,
    pub grid_dims: [usize; 3],
    pub grid_logodds: Vec<f64>,
    pub grid_states: Vec<u8>,
    pub coverage: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<Vec<String>>,
    /// `[width, height]` of each frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_size: Option<[usize; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepInfoPayload {
    pub cr: f64,
    pub collision: bool,
    #[serde(default)]
    pub clamped: bool,
}

/// Server-to-client messages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Reply {
    Hello {
        version: String,
        grid_dims: [usize; 3],
        action_box: [[f64; 3]; 2],
    },
    ResetOk {
        obs: ObservationPayload,
    },
    StepResult {
        obs: ObservationPayload,
        reward: f64,
        terminated: bool,
        reason: Option<String>,
        info: StepInfoPayload,
    },
    Error {
        code: String,
        message: String,
    },
    Close,
}

impl Reply {
    pub fn error(code: &str, message: impl Into<String>) -> Self {
        Reply::Error {
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("replies serialize");
        s.push('\n');
        s
    }
}
