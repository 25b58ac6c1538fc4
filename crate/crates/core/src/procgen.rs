//! Procedural building meshes so the benchmark runs without external
//! datasets: a gabled main house plus optional detached annexes and
//! free-standing pillars, each component a closed convex solid.

use std::path::Path;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{SceneEntry, SceneManifest};
use crate::geometry::{box_mesh, write_obj, GeometryError, TriangleMesh};

/// Extent every generated house is scaled to, meters.
pub const HOUSE_EXTENT: [f64; 3] = [15.0, 15.0, 8.0];

/// Closed prism from a star-shaped profile polygon in the `(u, z)` plane,
/// extruded along x over `[x0, x1]`, with `u` mapped to y. The caps are
/// fanned from profile vertex `apex`, which must see every other vertex.
fn extrude(profile: &[(f64, f64)], apex: usize, x0: f64, x1: f64) -> TriangleMesh {
    let n = profile.len() as u32;
    let mut vertices = Vec::with_capacity(2 * profile.len());
    for x in [x0, x1] {
        vertices.extend(profile.iter().map(|&(u, z)| Point3::new(x, u, z)));
    }
    let a = apex as u32;
    let mut triangles = Vec::with_capacity(4 * profile.len());
    for k in 0..n {
        let next = (k + 1) % n;
        if k != a && next != a {
            triangles.push([a, next, k]);
            triangles.push([a + n, k + n, next + n]);
        }
        triangles.push([k, next, next + n]);
        triangles.push([k, next + n, k + n]);
    }
    let mut mesh = TriangleMesh::new(vertices, triangles).expect("profile indices are valid");
    if signed_volume(&mesh) < 0.0 {
        mesh = mesh.flipped();
    }
    mesh
}

/// Volume enclosed by a closed mesh, positive for outward winding.
fn signed_volume(mesh: &TriangleMesh) -> f64 {
    mesh.triangles()
        .iter()
        .map(|t| {
            let [a, b, c] = t.map(|i| mesh.vertices()[i as usize].coords);
            a.dot(&b.cross(&c)) / 6.0
        })
        .sum()
}

/// Gabled block with its ridge along x: footprint `length` (x) by `width`
/// (y) centered on the origin, walls up to `eave`, ridge at `ridge`.
pub fn gabled_prism(width: f64, length: f64, eave: f64, ridge: f64) -> TriangleMesh {
    let h = 0.5 * width;
    let profile = [(-h, 0.0), (h, 0.0), (h, eave), (0.0, ridge), (-h, eave)];
    extrude(&profile, 3, -0.5 * length, 0.5 * length)
}

/// Gabled block whose roof overhangs both long walls by `overhang`, as a
/// single closed solid. The roof slab is `thickness` deep at the eave.
pub fn house_body(width: f64, length: f64, eave: f64, ridge: f64, overhang: f64, thickness: f64) -> TriangleMesh {
    let h = 0.5 * width;
    let o = h + overhang;
    // Roof line through the ridge and the outer top corners.
    let profile = [
        (-h, 0.0),
        (h, 0.0),
        (h, eave),
        (o, eave),
        (o, eave + thickness),
        (0.0, ridge),
        (-o, eave + thickness),
        (-o, eave),
        (-h, eave),
    ];
    extrude(&profile, 5, -0.5 * length, 0.5 * length)
}

/// Flat-roofed block around a closed courtyard: the footprint is
/// `[x0, x1] x [y0, y1]` minus an inner court of `court` meters per side
/// (both centered), extruded to `height`.
pub fn courtyard_block(x0: f64, y0: f64, x1: f64, y1: f64, court: [f64; 2], height: f64) -> TriangleMesh {
    let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
    let (hx, hy) = (0.5 * court[0], 0.5 * court[1]);
    // Both loops counter-clockwise seen from above.
    let outer = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)];
    let inner = [(cx - hx, cy - hy), (cx + hx, cy - hy), (cx + hx, cy + hy), (cx - hx, cy + hy)];
    let mut vertices = Vec::with_capacity(16);
    for z in [0.0, height] {
        vertices.extend(outer.iter().map(|&(x, y)| Point3::new(x, y, z)));
        vertices.extend(inner.iter().map(|&(x, y)| Point3::new(x, y, z)));
    }
    // Index of outer/inner corner k at the bottom (b) or top (t).
    let ob = |k: u32| k % 4;
    let ib = |k: u32| 4 + k % 4;
    let ot = |k: u32| 8 + k % 4;
    let it = |k: u32| 12 + k % 4;
    let mut triangles = Vec::with_capacity(32);
    for k in 0..4 {
        let n = k + 1;
        triangles.extend([[ot(k), ot(n), it(n)], [ot(k), it(n), it(k)]]);
        triangles.extend([[ob(k), ib(n), ob(n)], [ob(k), ib(k), ib(n)]]);
        triangles.extend([[ob(k), ob(n), ot(n)], [ob(k), ot(n), ot(k)]]);
        triangles.extend([[ib(n), ib(k), it(k)], [ib(n), it(k), it(n)]]);
    }
    TriangleMesh::new(vertices, triangles).expect("courtyard indices are valid")
}

fn translated(mesh: TriangleMesh, offset: Vector3<f64>) -> TriangleMesh {
    let vertices = mesh.vertices().iter().map(|p| p + offset).collect();
    TriangleMesh::new(vertices, mesh.triangles().to_vec()).expect("same topology")
}

/// Quarter turn about z; keeps the winding outward.
fn rotated_quarter(mesh: TriangleMesh) -> TriangleMesh {
    let vertices = mesh.vertices().iter().map(|p| Point3::new(-p.y, p.x, p.z)).collect();
    TriangleMesh::new(vertices, mesh.triangles().to_vec()).expect("same topology")
}

/// One house for `seed`, normalized to [`HOUSE_EXTENT`].
///
/// A main body with overhanging eaves, optionally a porch roof on pillars
/// at one gable end and a detached annex a short gap away. Overhang
/// undersides, the porch and the gap are only visible from particular
/// viewpoints.
pub fn generate_house(seed: u64) -> TriangleMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match rng.random_range(0..3u8) {
        0 => return courtyard_house(&mut rng),
        1 => return cluster(&mut rng),
        _ => {}
    }
    let width = rng.random_range(6.0..9.0);
    let length = rng.random_range(9.0..14.0);
    let eave = rng.random_range(3.0..4.5);
    let ridge = eave + rng.random_range(1.5..3.0);
    let overhang = rng.random_range(0.6..1.4);
    let mut mesh = house_body(width, length, eave, ridge, overhang, 0.3);
    // Half extents of the main body including its overhangs.
    let (hx, hy) = (0.5 * length, 0.5 * width + overhang);

    // Sides: 0 = +x, 1 = -x, 2 = +y, 3 = -y. The porch sits on a gable end.
    let porch_side = if rng.random_bool(0.6) {
        Some(rng.random_range(0..2u8))
    } else {
        None
    };
    if let Some(side) = porch_side {
        let depth = rng.random_range(2.0..3.0);
        let span = rng.random_range(0.6..0.9) * width;
        let height = rng.random_range(2.2..2.8);
        let sign = if side == 0 { 1.0 } else { -1.0 };
        let (xa, xb) = (sign * hx, sign * (hx + depth));
        let slab = box_mesh(
            Point3::new(xa.min(xb), -0.5 * span, height),
            Point3::new(xa.max(xb), 0.5 * span, height + 0.25),
        );
        mesh.append(&slab);
        let pillars = rng.random_range(2..=3usize);
        let half = rng.random_range(0.15..0.2);
        let px = sign * (hx + depth - 0.3);
        for i in 0..pillars {
            let py = (i as f64 / (pillars - 1) as f64 - 0.5) * (span - 0.6);
            mesh.append(&box_mesh(
                Point3::new(px - half, py - half, 0.0),
                Point3::new(px + half, py + half, height),
            ));
        }
    }

    if rng.random_bool(0.7) {
        let sides: Vec<u8> = (0..4u8).filter(|s| Some(*s) != porch_side).collect();
        let side = sides[rng.random_range(0..sides.len())];
        let aw = rng.random_range(3.0..5.0);
        let al = rng.random_range(3.5..6.0);
        let ae = rng.random_range(2.0..3.0);
        let ar = ae + rng.random_range(0.8..1.8);
        let ao = rng.random_range(0.3..0.8);
        let gap = rng.random_range(1.2..2.5);
        let mut annex = house_body(aw, al, ae, ar, ao, 0.25);
        let (mut ax, mut ay) = (0.5 * al, 0.5 * aw + ao);
        if rng.random_bool(0.5) {
            annex = rotated_quarter(annex);
            std::mem::swap(&mut ax, &mut ay);
        }
        let shift = rng.random_range(-0.3..0.3);
        let center = match side {
            0 => Vector3::new(hx + gap + ax, shift * hy, 0.0),
            1 => Vector3::new(-(hx + gap + ax), shift * hy, 0.0),
            2 => Vector3::new(shift * hx, hy + gap + ay, 0.0),
            _ => Vector3::new(shift * hx, -(hy + gap + ay), 0.0),
        };
        mesh.append(&translated(annex, center));
    }

    if rng.random_bool(0.5) {
        mesh = rotated_quarter(mesh);
    }
    mesh.normalize(Vector3::from(HOUSE_EXTENT))
        .expect("generated house has positive volume")
}

/// Courtyard building, sometimes with a gabled annex beside it.
fn courtyard_house(rng: &mut ChaCha8Rng) -> TriangleMesh {
    let w = rng.random_range(11.0..15.0);
    let d = rng.random_range(11.0..15.0);
    let wing = rng.random_range(3.0..4.5);
    let height = rng.random_range(4.0..7.0);
    let court = [w - 2.0 * wing, d - 2.0 * wing];
    let mut mesh = courtyard_block(-0.5 * w, -0.5 * d, 0.5 * w, 0.5 * d, court, height);
    if rng.random_bool(0.5) {
        let aw = rng.random_range(3.0..4.5);
        let al = rng.random_range(4.0..7.0);
        let ae = rng.random_range(2.0..3.0);
        let ar = ae + rng.random_range(0.8..1.8);
        let ao = rng.random_range(0.3..0.8);
        let gap = rng.random_range(1.2..2.5);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let annex = rotated_quarter(house_body(aw, al, ae, ar, ao, 0.25));
        let offset = Vector3::new(sign * (0.5 * w + gap + 0.5 * aw + ao), 0.0, 0.0);
        mesh.append(&translated(annex, offset));
    }
    if rng.random_bool(0.5) {
        mesh = rotated_quarter(mesh);
    }
    mesh.normalize(Vector3::from(HOUSE_EXTENT))
        .expect("generated house has positive volume")
}

/// Block of gabled buildings separated by narrow alleys, which their
/// roof overhangs partly close over.
fn cluster(rng: &mut ChaCha8Rng) -> TriangleMesh {
    let cols = rng.random_range(2..=3usize);
    let rows = 2usize;
    let cell = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(4.0..7.0)).collect() };
    let widths = cell(rng, cols);
    let depths = cell(rng, rows);
    let alley_x: Vec<f64> = (1..cols).map(|_| rng.random_range(1.2..2.2)).collect();
    let alley_y: Vec<f64> = (1..rows).map(|_| rng.random_range(1.2..2.2)).collect();
    // Cell origins along one axis: cells separated by their alleys.
    let starts = |sizes: &[f64], alleys: &[f64]| -> Vec<f64> {
        let mut out = Vec::with_capacity(sizes.len());
        let mut at = 0.0;
        for (i, s) in sizes.iter().enumerate() {
            out.push(at);
            at += s + alleys.get(i).copied().unwrap_or(0.0);
        }
        out
    };
    let xs = starts(&widths, &alley_x);
    let ys = starts(&depths, &alley_y);
    let mut mesh: Option<TriangleMesh> = None;
    for (i, (&x0, &w)) in xs.iter().zip(&widths).enumerate() {
        for (j, (&y0, &d)) in ys.iter().zip(&depths).enumerate() {
            let eave = rng.random_range(3.0..6.0);
            let ridge = eave + rng.random_range(1.0..2.5);
            let along_x = rng.random_bool(0.5);
            // Overhang reaches at most 40% into the narrower neighbouring alley.
            let alleys = if along_x {
                [j.checked_sub(1).map(|k| alley_y[k]), alley_y.get(j).copied()]
            } else {
                [i.checked_sub(1).map(|k| alley_x[k]), alley_x.get(i).copied()]
            };
            let room = alleys.iter().flatten().fold(2.0f64, |a, &b| a.min(b));
            let overhang = rng.random_range(0.2..0.4) * room;
            let (span, len) = if along_x { (d, w) } else { (w, d) };
            let mut body = house_body(span, len, eave, ridge, overhang, 0.25);
            if !along_x {
                body = rotated_quarter(body);
            }
            let body = translated(body, Vector3::new(x0 + 0.5 * w, y0 + 0.5 * d, 0.0));
            match &mut mesh {
                Some(m) => m.append(&body),
                None => mesh = Some(body),
            }
        }
    }
    mesh.expect("at least one building")
        .normalize(Vector3::from(HOUSE_EXTENT))
        .expect("generated house has positive volume")
}

/// Writes `count` houses as `house_NNN.obj` plus `scenes.json` into `dir`.
/// House `i` uses seed `seed + i`.
pub fn write_house_set(count: usize, seed: u64, dir: &Path) -> Result<SceneManifest, GeometryError> {
    let io_err = |path: &Path, source| GeometryError::Io {
        path: path.display().to_string(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut manifest = SceneManifest::default();
    for i in 0..count {
        let id = format!("house_{i:03}");
        let file = format!("{id}.obj");
        let path = dir.join(&file);
        let mesh = generate_house(seed.wrapping_add(i as u64));
        let f = std::fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        write_obj(&mesh, std::io::BufWriter::new(f)).map_err(|e| io_err(&path, e))?;
        manifest.scenes.push(SceneEntry {
            id,
            mesh: file.into(),
            target_extent: None,
            grid: None,
        });
    }
    let path = dir.join("scenes.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ActionBox;

    #[test]
    fn prism_is_closed_and_outward() {
        let m = gabled_prism(6.0, 10.0, 3.0, 5.0);
        assert_eq!(m.triangle_count(), 16);
        assert!(m.is_watertight());
        // Divergence theorem: outward winding gives positive signed volume.
        let expected = 10.0 * (6.0 * 3.0 + 0.5 * 6.0 * 2.0);
        assert!((signed_volume(&m) - expected).abs() < 1e-9);
    }

    #[test]
    fn overhanging_body_volume() {
        let (w, l, e, r, o, t) = (6.0, 10.0, 3.0, 5.0, 1.0, 0.3);
        let m = house_body(w, l, e, r, o, t);
        assert!(m.is_watertight());
        // Walls, plus the roof triangle from the slab top line up to the
        // ridge, plus the slab below that line out to the overhang.
        let half = 0.5 * w + o;
        let roof = half * (r - e - t) + 2.0 * half * t;
        let expected = l * (w * e + roof);
        assert!((signed_volume(&m) - expected).abs() < 1e-9, "{}", signed_volume(&m));
        let q = rotated_quarter(m);
        assert!((signed_volume(&q) - expected).abs() < 1e-9);
    }

    #[test]
    fn courtyard_volume() {
        let m = courtyard_block(-6.0, -5.0, 6.0, 5.0, [4.0, 3.0], 5.0);
        assert!(m.is_watertight());
        let expected = (12.0 * 10.0 - 4.0 * 3.0) * 5.0;
        assert!((signed_volume(&m) - expected).abs() < 1e-9);
    }

    #[test]
    fn houses_are_watertight_distinct_and_fit() {
        let b = ActionBox::default();
        let meshes: Vec<TriangleMesh> = (0..10).map(generate_house).collect();
        for m in &meshes {
            assert!(m.is_watertight());
            let bb = m.bounds();
            assert!(b.contains(&bb.min) && b.contains(&bb.max));
            let e = bb.extent();
            let fit = (0..3).map(|k| e[k] / HOUSE_EXTENT[k]).fold(0.0, f64::max);
            assert!((fit - 1.0).abs() < 1e-9);
            assert!(bb.min.z.abs() < 1e-12);
        }
        for i in 0..meshes.len() {
            for j in i + 1..meshes.len() {
                assert_ne!(meshes[i], meshes[j]);
            }
        }
        assert_eq!(generate_house(3), generate_house(3));
    }
}
