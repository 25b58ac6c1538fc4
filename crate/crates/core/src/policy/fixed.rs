use std::path::Path;

use serde::Deserialize;

use super::{Policy, PolicyError, PolicyObservation};
use crate::geometry::Pose5D;

/// Replays a fixed list of poses, then reports exhaustion.
#[derive(Clone, Debug)]
pub struct FixedSequencePolicy {
    name: String,
    poses: Vec<Pose5D>,
    next: usize,
}

impl FixedSequencePolicy {
    pub fn new(poses: Vec<Pose5D>) -> Self {
        Self {
            name: "fixed".into(),
            poses,
            next: 0,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn remaining(&self) -> usize {
        self.poses.len() - self.next
    }
}

impl Policy for FixedSequencePolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn act(&mut self, _obs: &PolicyObservation<'_>) -> Result<Pose5D, PolicyError> {
        let p = self.poses.get(self.next).copied().ok_or(PolicyError::Exhausted)?;
        self.next += 1;
        Ok(p)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PoseFile {
    Bare(Vec<[f64; 5]>),
    Wrapped { poses: Vec<[f64; 5]> },
}

/// Reads `[[x, y, z, pitch, yaw], ...]` (or `{"poses": [...]}`) from JSON.
pub fn load_pose_sequence(path: impl AsRef<Path>) -> Result<Vec<Pose5D>, PolicyError> {
    let path = path.as_ref();
    let err = |message: String| PolicyError::Load {
        path: path.display().to_string(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    parse_pose_sequence(&text).map_err(err)
}

pub(crate) fn parse_pose_sequence(text: &str) -> Result<Vec<Pose5D>, String> {
    let file: PoseFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let raw = match file {
        PoseFile::Bare(p) | PoseFile::Wrapped { poses: p } => p,
    };
    raw.into_iter()
        .enumerate()
        .map(|(i, a)| Pose5D::from_array(a).map_err(|e| format!("pose {i}: {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_layouts() {
        let a = parse_pose_sequence("[[0,0,1,0,0],[1,2,3,-0.5,3.0]]").unwrap();
        let b = parse_pose_sequence(r#"{"poses": [[0,0,1,0,0],[1,2,3,-0.5,3.0]]}"#).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert!(parse_pose_sequence("[[0,0,1,0]]").is_err());
        assert!(parse_pose_sequence("[[0,0,1,3.0,0]]").is_err());
    }

    #[test]
    fn exhausts_after_last_pose() {
        let poses = vec![Pose5D::from_array([0.0, 0.0, 1.0, 0.0, 0.0]).unwrap(); 30];
        let mut p = FixedSequencePolicy::new(poses);
        assert_eq!(p.remaining(), 30);
        p.next = 30;
        assert_eq!(p.remaining(), 0);
    }
}
