use nalgebra::{Point3, Unit, Vector3};

use crate::geometry::{Bvh, Ray};

/// Directions for the inside test. Skewed so they are unlikely to graze
/// the edges of axis-aligned geometry.
// Arbitrary values, not approximations of named constants.
#[allow(clippy::approx_constant)]
const PARITY_DIRECTIONS: [[f64; 3]; 3] = [
    [0.5773, 0.3141, 0.7537],
    [-0.6224, 0.7071, -0.3357],
    [0.2718, -0.8660, -0.4195],
];

/// True if `p` is enclosed by the mesh: the majority of several rays from
/// `p` cross the surface an odd number of times.
pub fn is_inside(bvh: &Bvh, p: &Point3<f64>) -> bool {
    let odd = PARITY_DIRECTIONS
        .iter()
        .filter(|d| {
            let ray = Ray {
                origin: *p,
                direction: Unit::new_normalize(Vector3::from(**d)),
            };
            bvh.count_crossings(&ray) % 2 == 1
        })
        .count();
    odd >= 2
}

/// A camera of the given radius at `p` collides if it is closer than
/// `radius` to the surface or sits inside a closed part of the mesh.
pub fn check_collision(bvh: &Bvh, p: &Point3<f64>, radius: f64) -> bool {
    if bvh.closest_distance(p, radius).is_some_and(|d| d < radius) {
        return true;
    }
    is_inside(bvh, p)
}
