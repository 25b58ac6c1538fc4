use nalgebra::{Point3, Vector3};

use super::{Aabb, Ray, TriangleMesh};

/// Hits closer than this (meters) are ignored.
pub const INTERSECT_EPSILON: f64 = 1e-6;

/// Two hits within this distance of each other are a tie, resolved toward
/// the lower triangle id.
const TIE_TOLERANCE: f64 = 1e-9;

const LEAF_SIZE: usize = 4;

/// Nearest ray hit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub distance: f64,
    pub triangle: u32,
    /// Unit geometric normal facing the ray origin.
    pub normal: Vector3<f64>,
}

#[derive(Clone, Copy, Debug)]
struct Node {
    bounds: Aabb,
    /// Leaf: first primitive. Interior: index of the right child (the left
    /// child is stored immediately after its parent).
    offset: u32,
    /// Zero for interior nodes.
    count: u32,
}

#[derive(Clone, Copy, Debug)]
struct Tri {
    v0: Point3<f64>,
    e1: Vector3<f64>,
    e2: Vector3<f64>,
    id: u32,
}

/// Bounding volume hierarchy over a mesh's triangles, built by median
/// splits along the widest centroid axis. Immutable after construction.
#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<Node>,
    tris: Vec<Tri>,
    /// `order[k]` is the mesh triangle id stored at slot `k`.
    order: Vec<u32>,
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Self {
        let n = mesh.triangle_count();
        let boxes: Vec<Aabb> = (0..n).map(|i| Aabb::from_points(mesh.triangle(i))).collect();
        let centroids: Vec<Point3<f64>> = boxes.iter().map(Aabb::center).collect();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut nodes = Vec::with_capacity(2 * n / LEAF_SIZE + 1);
        build_node(&mut nodes, &mut order, 0, &boxes, &centroids);
        let tris = order
            .iter()
            .map(|&id| {
                let [a, b, c] = mesh.triangle(id as usize);
                Tri {
                    v0: a,
                    e1: b - a,
                    e2: c - a,
                    id,
                }
            })
            .collect();
        Self { nodes, tris, order }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.count > 0).count()
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    /// Triangle reorder permutation (slot -> mesh triangle id).
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    /// Nearest hit with distance > [`INTERSECT_EPSILON`].
    pub fn intersect(&self, ray: &Ray) -> Option<Hit> {
        self.intersect_within(ray, f64::INFINITY)
    }

    /// Nearest hit no farther than `max_distance`.
    pub fn intersect_within(&self, ray: &Ray, max_distance: f64) -> Option<Hit> {
        let dir = ray.direction.into_inner();
        let inv = Vector3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best_t = max_distance;
        let mut best: Option<(f64, usize)> = None;
        let mut stack = [0u32; 64];
        let mut sp = 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            let limit = best_t + TIE_TOLERANCE;
            let Some((t_near, _)) = node.bounds.ray_interval(&ray.origin, &inv, 0.0, limit) else {
                continue;
            };
            if t_near > limit {
                continue;
            }
            if node.count > 0 {
                let start = node.offset as usize;
                for slot in start..start + node.count as usize {
                    let tri = &self.tris[slot];
                    let Some(t) = intersect_triangle(tri, &ray.origin, &dir) else {
                        continue;
                    };
                    if t > max_distance {
                        continue;
                    }
                    let better = match best {
                        None => true,
                        Some((bt, bslot)) => {
                            t < bt - TIE_TOLERANCE
                                || ((t - bt).abs() <= TIE_TOLERANCE && tri.id < self.tris[bslot].id)
                        }
                    };
                    if better {
                        best = Some((t, slot));
                        best_t = best_t.min(t);
                    }
                }
            } else {
                // Visit the nearer child first.
                let idx = stack[sp];
                let (left, right) = (idx + 1, node.offset);
                let axis_dir = {
                    let e = node.bounds.extent();
                    let k = if e.x >= e.y && e.x >= e.z { 0 } else if e.y >= e.z { 1 } else { 2 };
                    dir[k]
                };
                let (first, second) = if axis_dir >= 0.0 { (left, right) } else { (right, left) };
                stack[sp] = second;
                stack[sp + 1] = first;
                sp += 2;
            }
        }
        best.map(|(t, slot)| {
            let tri = &self.tris[slot];
            let mut n = tri.e1.cross(&tri.e2).normalize();
            if n.dot(&dir) > 0.0 {
                n = -n;
            }
            Hit {
                distance: t,
                triangle: tri.id,
                normal: n,
            }
        })
    }

    /// Number of triangles crossed by the ray at distance > [`INTERSECT_EPSILON`].
    pub fn count_crossings(&self, ray: &Ray) -> usize {
        let dir = ray.direction.into_inner();
        let inv = Vector3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut stack = vec![0u32];
        let mut count = 0;
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx as usize];
            if node.bounds.ray_interval(&ray.origin, &inv, 0.0, f64::INFINITY).is_none() {
                continue;
            }
            if node.count > 0 {
                let start = node.offset as usize;
                count += self.tris[start..start + node.count as usize]
                    .iter()
                    .filter(|t| intersect_triangle(t, &ray.origin, &dir).is_some())
                    .count();
            } else {
                stack.push(idx + 1);
                stack.push(node.offset);
            }
        }
        count
    }

    /// Distance from `p` to the closest point on the mesh, searching no
    /// farther than `max_distance`.
    pub fn closest_distance(&self, p: &Point3<f64>, max_distance: f64) -> Option<f64> {
        let mut best_sq = max_distance * max_distance;
        let mut found = false;
        let mut stack = vec![0u32];
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx as usize];
            if node.bounds.distance_squared(p) > best_sq {
                continue;
            }
            if node.count > 0 {
                let start = node.offset as usize;
                for tri in &self.tris[start..start + node.count as usize] {
                    let q = closest_point_on_triangle(p, &tri.v0, &(tri.v0 + tri.e1), &(tri.v0 + tri.e2));
                    let d = (q - p).norm_squared();
                    if d <= best_sq {
                        best_sq = d;
                        found = true;
                    }
                }
            } else {
                stack.push(idx + 1);
                stack.push(node.offset);
            }
        }
        found.then(|| best_sq.sqrt())
    }
}

fn build_node(
    nodes: &mut Vec<Node>,
    order: &mut [u32],
    start: usize,
    boxes: &[Aabb],
    centroids: &[Point3<f64>],
) -> usize {
    let bounds = order
        .iter()
        .fold(Aabb::empty(), |b, &i| b.union(&boxes[i as usize]));
    let idx = nodes.len();
    if order.len() <= LEAF_SIZE {
        nodes.push(Node {
            bounds,
            offset: start as u32,
            count: order.len() as u32,
        });
        return idx;
    }
    let cb = Aabb::from_points(order.iter().map(|&i| centroids[i as usize]));
    let e = cb.extent();
    let axis = if e.x >= e.y && e.x >= e.z { 0 } else if e.y >= e.z { 1 } else { 2 };
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis]
            .total_cmp(&centroids[b as usize][axis])
            .then(a.cmp(&b))
    });
    nodes.push(Node {
        bounds,
        offset: 0,
        count: 0,
    });
    let (left, right) = order.split_at_mut(mid);
    build_node(nodes, left, start, boxes, centroids);
    let right_idx = build_node(nodes, right, start + mid, boxes, centroids);
    nodes[idx].offset = right_idx as u32;
    idx
}

/// Möller-Trumbore, two-sided, edges inclusive. Returns `t` if the hit lies
/// beyond [`INTERSECT_EPSILON`].
#[inline]
fn intersect_triangle(tri: &Tri, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<f64> {
    let p = dir.cross(&tri.e2);
    let det = tri.e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = origin - tri.v0;
    let u = s.dot(&p) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&tri.e1);
    let v = dir.dot(&q) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = tri.e2.dot(&q) * inv_det;
    (t > INTERSECT_EPSILON).then_some(t)
}

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
pub(crate) fn closest_point_on_triangle(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> Point3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}
