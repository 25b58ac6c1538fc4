use super::grid::{classify_value, OccupancyGrid, VoxelState};
use super::MappingError;

/// Max-pooled copy of a grid's log-odds with states recomputed from the
/// pooled values. Flattened x-fastest like the source grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PooledGrid {
    pub dims: [usize; 3],
    pub log_odds: Vec<f64>,
    pub states: Vec<VoxelState>,
}

/// Reduces the grid to `target` dims by taking the maximum log-odds over
/// each block. Each target dim must divide the corresponding source dim.
pub fn downsample_grid(grid: &OccupancyGrid, target: [usize; 3]) -> Result<PooledGrid, MappingError> {
    let config = grid.config();
    let src = config.dims();
    if (0..3).any(|k| target[k] == 0 || !src[k].is_multiple_of(target[k])) {
        return Err(MappingError::NonDivisibleDims { source_dims: src, target });
    }
    let block = [src[0] / target[0], src[1] / target[1], src[2] / target[2]];
    let mut log_odds = vec![f64::NEG_INFINITY; target[0] * target[1] * target[2]];
    for (i, &v) in grid.values().iter().enumerate() {
        let [x, y, z] = config.unlinear(i);
        let j = x / block[0] + target[0] * (y / block[1] + target[1] * (z / block[2]));
        if v > log_odds[j] {
            log_odds[j] = v;
        }
    }
    let states = log_odds.iter().map(|&v| classify_value(config, v)).collect();
    Ok(PooledGrid {
        dims: target,
        log_odds,
        states,
    })
}
