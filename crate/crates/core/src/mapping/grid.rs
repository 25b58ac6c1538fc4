use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::MappingError;
use crate::geometry::Aabb;

/// Integer voxel coordinate `[ix, iy, iz]`.
pub type VoxelIndex = [usize; 3];

/// Largest supported grid edge.
pub const MAX_DIM: usize = 128;

/// Default log-odds increment for the voxel a ray terminates in.
pub const DEFAULT_LOG_ODDS_HIT: f64 = 2.0;
/// Default log-odds increment for voxels a ray passes through.
pub const DEFAULT_LOG_ODDS_MISS: f64 = -0.1;

/// Geometry and fusion constants of an occupancy grid.
///
/// Voxels are cubes of edge `voxel_size`; voxel `[i, j, k]` spans
/// `origin + [i, j, k] * voxel_size` to `origin + [i+1, j+1, k+1] * voxel_size`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridConfigRepr", into = "GridConfigRepr")]
pub struct GridConfig {
    origin: Point3<f64>,
    voxel_size: f64,
    dims: [usize; 3],
    log_odds_hit: f64,
    log_odds_miss: f64,
    occupied_threshold: f64,
    free_threshold: f64,
    clamp_min: f64,
    clamp_max: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridConfigRepr {
    origin: [f64; 3],
    voxel_size: f64,
    dims: [usize; 3],
    #[serde(default = "default_hit")]
    log_odds_hit: f64,
    #[serde(default = "default_miss")]
    log_odds_miss: f64,
    #[serde(default = "default_occ")]
    occupied_threshold: f64,
    #[serde(default = "default_free")]
    free_threshold: f64,
    #[serde(default = "default_cmin")]
    clamp_min: f64,
    #[serde(default = "default_cmax")]
    clamp_max: f64,
}

fn default_hit() -> f64 {
    DEFAULT_LOG_ODDS_HIT
}
fn default_miss() -> f64 {
    DEFAULT_LOG_ODDS_MISS
}
fn default_occ() -> f64 {
    0.5
}
fn default_free() -> f64 {
    -0.5
}
fn default_cmin() -> f64 {
    -10.0
}
fn default_cmax() -> f64 {
    10.0
}

impl TryFrom<GridConfigRepr> for GridConfig {
    type Error = MappingError;

    fn try_from(r: GridConfigRepr) -> Result<Self, Self::Error> {
        let c = GridConfig {
            origin: Point3::from(r.origin),
            voxel_size: r.voxel_size,
            dims: r.dims,
            log_odds_hit: r.log_odds_hit,
            log_odds_miss: r.log_odds_miss,
            occupied_threshold: r.occupied_threshold,
            free_threshold: r.free_threshold,
            clamp_min: r.clamp_min,
            clamp_max: r.clamp_max,
        };
        c.validate()?;
        Ok(c)
    }
}

impl From<GridConfig> for GridConfigRepr {
    fn from(c: GridConfig) -> Self {
        Self {
            origin: c.origin.coords.into(),
            voxel_size: c.voxel_size,
            dims: c.dims,
            log_odds_hit: c.log_odds_hit,
            log_odds_miss: c.log_odds_miss,
            occupied_threshold: c.occupied_threshold,
            free_threshold: c.free_threshold,
            clamp_min: c.clamp_min,
            clamp_max: c.clamp_max,
        }
    }
}

impl Default for GridConfig {
    /// 20 x 20 x 10 one-meter voxels spanning the default action box.
    fn default() -> Self {
        Self::new(Point3::new(-10.0, -10.0, 0.0), 1.0, [20, 20, 10]).expect("default grid is valid")
    }
}

impl GridConfig {
    /// Grid with the default fusion constants (hit +2.0, miss -0.1,
    /// thresholds +-0.5, clamp +-10).
    pub fn new(origin: Point3<f64>, voxel_size: f64, dims: [usize; 3]) -> Result<Self, MappingError> {
        let c = Self {
            origin,
            voxel_size,
            dims,
            log_odds_hit: DEFAULT_LOG_ODDS_HIT,
            log_odds_miss: DEFAULT_LOG_ODDS_MISS,
            occupied_threshold: 0.5,
            free_threshold: -0.5,
            clamp_min: -10.0,
            clamp_max: 10.0,
        };
        c.validate()?;
        Ok(c)
    }

    /// Sets the hit/miss increments explicitly.
    pub fn with_log_odds(mut self, hit: f64, miss: f64) -> Result<Self, MappingError> {
        self.log_odds_hit = hit;
        self.log_odds_miss = miss;
        self.validate()?;
        Ok(self)
    }

    /// Keeps the miss increment and sets the hit increment to
    /// `ratio * |miss|`, so that `|hit / miss| = ratio`.
    pub fn with_ratio(self, ratio: f64) -> Result<Self, MappingError> {
        let miss = self.log_odds_miss;
        self.with_log_odds(ratio * miss.abs(), miss)
    }

    pub fn with_thresholds(mut self, occupied: f64, free: f64) -> Result<Self, MappingError> {
        self.occupied_threshold = occupied;
        self.free_threshold = free;
        self.validate()?;
        Ok(self)
    }

    pub fn with_clamp(mut self, min: f64, max: f64) -> Result<Self, MappingError> {
        self.clamp_min = min;
        self.clamp_max = max;
        self.validate()?;
        Ok(self)
    }

    pub fn with_geometry(mut self, origin: Point3<f64>, voxel_size: f64, dims: [usize; 3]) -> Result<Self, MappingError> {
        self.origin = origin;
        self.voxel_size = voxel_size;
        self.dims = dims;
        self.validate()?;
        Ok(self)
    }

    /// Same geometry, with the fusion constants (increments, thresholds,
    /// clamp range) of `other`.
    pub fn with_fusion_of(&self, other: &GridConfig) -> GridConfig {
        GridConfig {
            origin: self.origin,
            voxel_size: self.voxel_size,
            dims: self.dims,
            ..other.clone()
        }
    }

    /// True if both configs describe the same voxel lattice.
    pub fn same_geometry(&self, other: &GridConfig) -> bool {
        self.origin == other.origin && self.voxel_size == other.voxel_size && self.dims == other.dims
    }

    fn validate(&self) -> Result<(), MappingError> {
        let bad = |m: String| Err(MappingError::InvalidConfig(m));
        if !self.origin.coords.iter().all(|c| c.is_finite()) {
            return bad("origin must be finite".into());
        }
        if !(self.voxel_size > 0.0 && self.voxel_size.is_finite()) {
            return bad(format!("voxel size {} must be positive", self.voxel_size));
        }
        if self.dims.iter().any(|&d| d == 0 || d > MAX_DIM) {
            return bad(format!("dims {:?} must lie in 1..={MAX_DIM}", self.dims));
        }
        if !(self.log_odds_hit > 0.0 && self.log_odds_miss < 0.0) {
            return bad("hit increment must be > 0 and miss increment < 0".into());
        }
        if !(self.free_threshold < 0.0 && 0.0 < self.occupied_threshold) {
            return bad("thresholds must satisfy free < 0 < occupied".into());
        }
        if !(self.clamp_min <= self.free_threshold && self.occupied_threshold <= self.clamp_max) {
            return bad("clamp range must contain both thresholds".into());
        }
        Ok(())
    }

    pub fn origin(&self) -> Point3<f64> {
        self.origin
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn log_odds_hit(&self) -> f64 {
        self.log_odds_hit
    }

    pub fn log_odds_miss(&self) -> f64 {
        self.log_odds_miss
    }

    /// `|hit / miss|`.
    pub fn ratio(&self) -> f64 {
        (self.log_odds_hit / self.log_odds_miss).abs()
    }

    pub fn occupied_threshold(&self) -> f64 {
        self.occupied_threshold
    }

    pub fn free_threshold(&self) -> f64 {
        self.free_threshold
    }

    pub fn clamp_min(&self) -> f64 {
        self.clamp_min
    }

    pub fn clamp_max(&self) -> f64 {
        self.clamp_max
    }

    pub fn voxel_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn bounds(&self) -> Aabb {
        let ext = Vector3::new(
            self.dims[0] as f64,
            self.dims[1] as f64,
            self.dims[2] as f64,
        ) * self.voxel_size;
        Aabb::new(self.origin, self.origin + ext)
    }

    /// Row-major, x fastest.
    #[inline]
    pub fn linear(&self, v: VoxelIndex) -> usize {
        v[0] + self.dims[0] * (v[1] + self.dims[1] * v[2])
    }

    #[inline]
    pub fn unlinear(&self, i: usize) -> VoxelIndex {
        let x = i % self.dims[0];
        let r = i / self.dims[0];
        [x, r % self.dims[1], r / self.dims[1]]
    }

    /// Voxel containing `p`, or `None` outside the grid. Points on the upper
    /// grid faces belong to the last voxel.
    pub fn voxel_of(&self, p: &Point3<f64>) -> Option<VoxelIndex> {
        let mut out = [0usize; 3];
        for k in 0..3 {
            let f = (p[k] - self.origin[k]) / self.voxel_size;
            if !(f >= 0.0 && f <= self.dims[k] as f64) {
                return None;
            }
            out[k] = (f.floor() as usize).min(self.dims[k] - 1);
        }
        Some(out)
    }

    pub fn voxel_center(&self, v: VoxelIndex) -> Point3<f64> {
        self.origin
            + Vector3::new(
                v[0] as f64 + 0.5,
                v[1] as f64 + 0.5,
                v[2] as f64 + 0.5,
            ) * self.voxel_size
    }

    pub fn voxel_bounds(&self, v: VoxelIndex) -> Aabb {
        let min = self.origin + Vector3::new(v[0] as f64, v[1] as f64, v[2] as f64) * self.voxel_size;
        Aabb::new(min, min + Vector3::repeat(self.voxel_size))
    }
}

/// Three-state voxel classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum VoxelState {
    Unknown = 0,
    Free = 1,
    Occupied = 2,
}

impl VoxelState {
    pub fn code(self) -> u8 {
        self as u8
    }
}

/// Per-state voxel counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StateCounts {
    pub unknown: usize,
    pub free: usize,
    pub occupied: usize,
}

impl StateCounts {
    pub fn total(&self) -> usize {
        self.unknown + self.free + self.occupied
    }
}

/// Dense per-voxel log-odds occupancy, initialized to 0 (unknown).
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    config: GridConfig,
    log_odds: Vec<f64>,
}

impl OccupancyGrid {
    pub fn new(config: GridConfig) -> Self {
        let n = config.voxel_count();
        Self {
            config,
            log_odds: vec![0.0; n],
        }
    }

    /// Builds a grid from stored values, clamping each into range.
    pub fn from_values(config: GridConfig, values: Vec<f64>) -> Result<Self, MappingError> {
        if values.len() != config.voxel_count() {
            return Err(MappingError::DimensionMismatch {
                expected: config.voxel_count(),
                found: values.len(),
            });
        }
        let (lo, hi) = (config.clamp_min, config.clamp_max);
        let log_odds = values.into_iter().map(|v| v.clamp(lo, hi)).collect();
        Ok(Self { config, log_odds })
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn values(&self) -> &[f64] {
        &self.log_odds
    }

    pub fn get(&self, v: VoxelIndex) -> f64 {
        self.log_odds[self.config.linear(v)]
    }

    /// Sets a voxel's log-odds, clamped into range.
    pub fn set(&mut self, v: VoxelIndex, value: f64) {
        let i = self.config.linear(v);
        self.log_odds[i] = value.clamp(self.config.clamp_min, self.config.clamp_max);
    }

    /// Adds `delta` to the voxel at linear index `i`, then clamps.
    #[inline]
    pub fn add_linear(&mut self, i: usize, delta: f64) {
        let v = self.log_odds[i] + delta;
        self.log_odds[i] = v.clamp(self.config.clamp_min, self.config.clamp_max);
    }

    #[inline]
    pub fn state_of_value(&self, value: f64) -> VoxelState {
        classify_value(&self.config, value)
    }

    pub fn state(&self, v: VoxelIndex) -> VoxelState {
        self.state_of_value(self.get(v))
    }

    pub fn state_linear(&self, i: usize) -> VoxelState {
        self.state_of_value(self.log_odds[i])
    }

    /// Dense classification plus per-state counts.
    pub fn classify(&self) -> (Vec<VoxelState>, StateCounts) {
        let mut counts = StateCounts::default();
        let states = self
            .log_odds
            .iter()
            .map(|&v| {
                let s = self.state_of_value(v);
                match s {
                    VoxelState::Unknown => counts.unknown += 1,
                    VoxelState::Free => counts.free += 1,
                    VoxelState::Occupied => counts.occupied += 1,
                }
                s
            })
            .collect();
        (states, counts)
    }

    /// Percentage of ground-truth voxels currently classified Occupied.
    pub fn coverage_ratio(&self, ground_truth: &[VoxelIndex]) -> Result<f64, MappingError> {
        coverage_ratio(self, ground_truth)
    }
}

#[inline]
pub(crate) fn classify_value(config: &GridConfig, value: f64) -> VoxelState {
    if value >= config.occupied_threshold {
        VoxelState::Occupied
    } else if value <= config.free_threshold {
        VoxelState::Free
    } else {
        VoxelState::Unknown
    }
}

/// `|{v in gt : Occupied}| / |gt| * 100`.
pub fn coverage_ratio(grid: &OccupancyGrid, ground_truth: &[VoxelIndex]) -> Result<f64, MappingError> {
    if ground_truth.is_empty() {
        return Err(MappingError::EmptyGroundTruth);
    }
    let dims = grid.config.dims;
    let mut occupied = 0usize;
    for v in ground_truth {
        if (0..3).any(|k| v[k] >= dims[k]) {
            return Err(MappingError::VoxelOutOfRange(*v));
        }
        if grid.state(*v) == VoxelState::Occupied {
            occupied += 1;
        }
    }
    Ok(occupied as f64 / ground_truth.len() as f64 * 100.0)
}
