use std::io::{Read, Write};

use nalgebra::Point3;

use super::grid::{OccupancyGrid, VoxelState};
use super::MappingError;

pub const GRID_DUMP_MAGIC: &[u8; 8] = b"NBVGRID1";

/// ASCII PLY with one vertex per point.
pub fn write_point_ply<'a>(
    points: impl ExactSizeIterator<Item = &'a Point3<f64>>,
    mut out: impl Write,
) -> std::io::Result<()> {
    writeln!(out, "ply")?;
    writeln!(out, "format ascii 1.0")?;
    writeln!(out, "element vertex {}", points.len())?;
    writeln!(out, "property float x")?;
    writeln!(out, "property float y")?;
    writeln!(out, "property float z")?;
    writeln!(out, "end_header")?;
    for p in points {
        writeln!(out, "{} {} {}", p.x, p.y, p.z)?;
    }
    Ok(())
}

/// Centers of all Occupied voxels as an ASCII PLY point cloud.
pub fn write_occupied_ply(grid: &OccupancyGrid, out: impl Write) -> std::io::Result<()> {
    let config = grid.config();
    let centers: Vec<Point3<f64>> = (0..config.voxel_count())
        .filter(|&i| grid.state_linear(i) == VoxelState::Occupied)
        .map(|i| config.voxel_center(config.unlinear(i)))
        .collect();
    write_point_ply(centers.iter(), out)
}

/// Contents of a raw grid dump.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDump {
    pub dims: [usize; 3],
    pub voxel_size: f32,
    pub origin: [f32; 3],
    pub values: Vec<f32>,
}

/// Raw dump: 32-byte header (magic, three u16 dims, u16 padding, f32
/// voxel size, three f32 origin coordinates) followed by one f32 log-odds
/// per voxel, x fastest. All little-endian.
pub fn write_grid_dump(grid: &OccupancyGrid, mut out: impl Write) -> std::io::Result<()> {
    let c = grid.config();
    let mut header = Vec::with_capacity(32);
    header.extend_from_slice(GRID_DUMP_MAGIC);
    for d in c.dims() {
        header.extend_from_slice(&(d as u16).to_le_bytes());
    }
    header.extend_from_slice(&0u16.to_le_bytes());
    header.extend_from_slice(&(c.voxel_size() as f32).to_le_bytes());
    for k in 0..3 {
        header.extend_from_slice(&(c.origin()[k] as f32).to_le_bytes());
    }
    out.write_all(&header)?;
    let mut body = Vec::with_capacity(4 * grid.values().len());
    for &v in grid.values() {
        body.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out.write_all(&body)
}

pub fn read_grid_dump(mut input: impl Read) -> Result<GridDump, MappingError> {
    let mut header = [0u8; 32];
    input.read_exact(&mut header)?;
    if &header[..8] != GRID_DUMP_MAGIC {
        return Err(MappingError::BadDump("bad magic".into()));
    }
    let u16_at = |o: usize| u16::from_le_bytes([header[o], header[o + 1]]) as usize;
    let f32_at = |o: usize| f32::from_le_bytes(header[o..o + 4].try_into().expect("4 bytes"));
    let dims = [u16_at(8), u16_at(10), u16_at(12)];
    let voxel_size = f32_at(16);
    let origin = [f32_at(20), f32_at(24), f32_at(28)];
    let n = dims[0] * dims[1] * dims[2];
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() != 4 * n {
        return Err(MappingError::BadDump(format!(
            "expected {} value bytes, found {}",
            4 * n,
            body.len()
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
        .collect();
    Ok(GridDump {
        dims,
        voxel_size,
        origin,
        values,
    })
}
