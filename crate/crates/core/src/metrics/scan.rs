use std::collections::BTreeMap;

use nalgebra::{Point3, Vector3};

use crate::mapping::PointCloud;

/// Running union of back-projected points, downsampled on a voxel lattice:
/// each occupied cell keeps the point closest to its center.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanAccumulator {
    origin: Point3<f64>,
    cell: f64,
    cells: BTreeMap<[i64; 3], (f64, Point3<f64>)>,
}

impl ScanAccumulator {
    pub fn new(origin: Point3<f64>, cell: f64) -> Self {
        Self {
            origin,
            cell,
            cells: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, cloud: &PointCloud) {
        for p in &cloud.points {
            let g = (p - self.origin) / self.cell;
            let key = [g.x.floor() as i64, g.y.floor() as i64, g.z.floor() as i64];
            let center = self.origin
                + Vector3::new(key[0] as f64 + 0.5, key[1] as f64 + 0.5, key[2] as f64 + 0.5) * self.cell;
            let d = (p - center).norm_squared();
            self.cells
                .entry(key)
                .and_modify(|e| {
                    if d < e.0 {
                        *e = (d, *p);
                    }
                })
                .or_insert((d, *p));
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Downsampled cloud in cell order.
    pub fn cloud(&self) -> PointCloud {
        PointCloud::new(self.cells.values().map(|e| e.1).collect())
    }
}
