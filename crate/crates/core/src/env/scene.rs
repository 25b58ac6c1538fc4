use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::ground_truth::{build_ground_truth, GroundTruth};
use super::{EnvConfig, EnvError};
use crate::geometry::{load_mesh, Aabb, Bvh, TriangleMesh};
use crate::mapping::GridConfig;
use crate::metrics::KdTree;

/// A static mesh prepared for scanning: acceleration structure, voxel
/// lattice and ground truth. Immutable and shared between episodes.
#[derive(Debug)]
pub struct Scene {
    id: String,
    mesh: TriangleMesh,
    bvh: Bvh,
    grid: GridConfig,
    ground_truth: GroundTruth,
    gt_index: KdTree,
}

impl Scene {
    pub fn new(
        id: impl Into<String>,
        mesh: TriangleMesh,
        grid: GridConfig,
        gt_samples: usize,
        gt_seed: u64,
    ) -> Result<Self, EnvError> {
        let id = id.into();
        let ground_truth = build_ground_truth(&mesh, &id, &grid, gt_samples, gt_seed)?;
        let gt_index = KdTree::build(&ground_truth.points.points);
        let bvh = Bvh::build(&mesh);
        Ok(Self {
            id,
            mesh,
            bvh,
            grid,
            ground_truth,
            gt_index,
        })
    }

    /// Scene on the config's default lattice with its sampling settings.
    pub fn with_config(id: impl Into<String>, mesh: TriangleMesh, config: &EnvConfig) -> Result<Self, EnvError> {
        Self::new(id, mesh, config.grid.clone(), config.gt_samples, config.gt_seed)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    /// Lattice the ground truth was voxelized on.
    pub fn grid(&self) -> &GridConfig {
        &self.grid
    }

    pub fn ground_truth(&self) -> &GroundTruth {
        &self.ground_truth
    }

    pub fn ground_truth_index(&self) -> &KdTree {
        &self.gt_index
    }

    pub fn bounds(&self) -> Aabb {
        self.mesh.bounds()
    }

    pub fn center(&self) -> Point3<f64> {
        self.bounds().center()
    }
}

/// Per-scene lattice overrides; unset fields keep the config defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voxel_size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<[usize; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneEntry {
    pub id: String,
    /// OBJ or PLY path, relative to the manifest's directory.
    pub mesh: PathBuf,
    /// If set, the mesh is rescaled to this extent and placed on the ground
    /// at the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_extent: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridOverride>,
}

/// JSON list of scenes: `{"scenes": [{"id": .., "mesh": .., ..}, ..]}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub scenes: Vec<SceneEntry>,
}

impl SceneManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, EnvError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| EnvError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| EnvError::ConfigParse {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// Loads, normalizes and prepares every listed scene. Mesh paths are
    /// resolved against `base_dir`.
    pub fn build_scenes(&self, base_dir: &Path, config: &EnvConfig) -> Result<Vec<Arc<Scene>>, EnvError> {
        if self.scenes.is_empty() {
            return Err(EnvError::InvalidConfig("scene manifest lists no scenes".into()));
        }
        let mut out: Vec<Arc<Scene>> = Vec::with_capacity(self.scenes.len());
        for entry in &self.scenes {
            if out.iter().any(|s| s.id() == entry.id) {
                return Err(EnvError::InvalidConfig(format!("duplicate scene id {:?}", entry.id)));
            }
            let path = base_dir.join(&entry.mesh);
            let mut mesh = load_mesh(&path)?;
            if let Some(t) = entry.target_extent {
                mesh = mesh.normalize(Vector3::from(t))?;
            }
            let mut grid = config.grid.clone();
            if let Some(o) = &entry.grid {
                let origin = o.origin.map(Point3::from).unwrap_or(grid.origin());
                let voxel_size = o.voxel_size.unwrap_or(grid.voxel_size());
                let dims = o.dims.unwrap_or(grid.dims());
                grid = grid.with_geometry(origin, voxel_size, dims)?;
            }
            out.push(Arc::new(Scene::new(
                entry.id.clone(),
                mesh,
                grid,
                config.gt_samples,
                config.gt_seed,
            )?));
        }
        Ok(out)
    }
}

/// Reads a manifest and builds its scenes.
pub fn load_scenes(manifest: impl AsRef<Path>, config: &EnvConfig) -> Result<Vec<Arc<Scene>>, EnvError> {
    let manifest = manifest.as_ref();
    let m = SceneManifest::load(manifest)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    m.build_scenes(base, config)
}
