//! Probabilistic occupancy grid: voxel traversal, log-odds fusion of depth
//! maps, three-state classification and surface coverage.

mod export;
mod fusion;
mod grid;
mod pool;
mod traverse;

use thiserror::Error;

pub use export::{read_grid_dump, write_grid_dump, write_occupied_ply, write_point_ply, GridDump, GRID_DUMP_MAGIC};
pub use fusion::{backproject, integrate_depth, integrate_depth_with, IntegrationStats, PointCloud, ENDPOINT_BIAS};
pub use grid::{
    coverage_ratio, GridConfig, OccupancyGrid, StateCounts, VoxelIndex, VoxelState, DEFAULT_LOG_ODDS_HIT,
    DEFAULT_LOG_ODDS_MISS, MAX_DIM,
};
pub use pool::{downsample_grid, PooledGrid};
pub use traverse::{traverse_ray, visit_voxels};

#[derive(Debug, Error)]
pub enum MappingError {
    #[error("invalid grid configuration: {0}")]
    InvalidConfig(String),
    #[error("expected {expected} voxel values, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("ground-truth voxel set is empty")]
    EmptyGroundTruth,
    #[error("voxel {0:?} lies outside the grid")]
    VoxelOutOfRange(VoxelIndex),
    #[error("depth map has {found} pixels but its intrinsics describe {expected}")]
    DepthSize { expected: usize, found: usize },
    #[error("depth frame does not match the grid: {0}")]
    FrameMismatch(String),
    #[error("target dims {target:?} do not divide grid dims {source_dims:?}")]
    NonDivisibleDims { source_dims: [usize; 3], target: [usize; 3] },
    #[error("malformed grid dump: {0}")]
    BadDump(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
