use nalgebra::Point3;

const LEAF_SIZE: usize = 8;

/// Static 3-d tree for exact nearest-neighbour queries.
///
/// Points are reordered in place so every subtree is a contiguous range
/// whose median element is the splitting point; the split axis of each
/// range is stored at the median's slot.
#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<Point3<f64>>,
    axes: Vec<u8>,
}

impl KdTree {
    pub fn build(points: &[Point3<f64>]) -> Self {
        let mut pts = points.to_vec();
        let mut axes = vec![0u8; pts.len()];
        build(&mut pts, &mut axes);
        Self { points: pts, axes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Squared distance to the nearest stored point, or `None` if empty.
    pub fn nearest_distance_squared(&self, q: &Point3<f64>) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = f64::INFINITY;
        self.search(q, 0, self.points.len(), &mut best);
        Some(best)
    }

    pub fn nearest_distance(&self, q: &Point3<f64>) -> Option<f64> {
        self.nearest_distance_squared(q).map(f64::sqrt)
    }

    fn search(&self, q: &Point3<f64>, lo: usize, hi: usize, best: &mut f64) {
        if hi - lo <= LEAF_SIZE {
            for p in &self.points[lo..hi] {
                let d = (p - q).norm_squared();
                if d < *best {
                    *best = d;
                }
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let axis = self.axes[mid] as usize;
        let p = &self.points[mid];
        let d = (p - q).norm_squared();
        if d < *best {
            *best = d;
        }
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, best);
        if diff * diff < *best {
            self.search(q, far.0, far.1, best);
        }
    }
}

fn build(pts: &mut [Point3<f64>], axes: &mut [u8]) {
    let n = pts.len();
    if n <= LEAF_SIZE {
        return;
    }
    let mut lo = pts[0];
    let mut hi = pts[0];
    for p in pts.iter() {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let ext = hi - lo;
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = n / 2;
    pts.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
    axes[mid] = axis as u8;
    let (left, rest) = pts.split_at_mut(mid);
    let (left_axes, rest_axes) = axes.split_at_mut(mid);
    build(left, left_axes);
    build(&mut rest[1..], &mut rest_axes[1..]);
}
