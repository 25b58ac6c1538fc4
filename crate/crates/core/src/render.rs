//! Depth and grayscale rendering by per-pixel ray casting.
//!
//! Depth is the Euclidean range along each pixel ray (not z-depth), with
//! `f64::INFINITY` marking pixels that hit nothing within range. Grayscale
//! frames use Lambertian shading under a fixed directional light.

use std::collections::VecDeque;
use std::io::Write;

use nalgebra::{Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::geometry::{Bvh, CameraFrame, CameraIntrinsics, Pose5D, Ray};

/// Per-pixel range image, row-major from the top-left pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    pub depths: Vec<f64>,
    pub pose: Pose5D,
    pub intrinsics: CameraIntrinsics,
}

impl DepthMap {
    pub fn width(&self) -> usize {
        self.intrinsics.width()
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height()
    }

    /// Number of pixels with a finite range.
    pub fn hit_count(&self) -> usize {
        self.depths.iter().filter(|d| d.is_finite()).count()
    }

    /// 16-bit binary PGM in millimeters; no-hit pixels are written as 0.
    pub fn write_pgm(&self, mut out: impl Write) -> std::io::Result<()> {
        write!(out, "P5\n{} {}\n65535\n", self.width(), self.height())?;
        for &d in &self.depths {
            let mm = if d.is_finite() {
                (d * 1000.0).round().clamp(0.0, 65535.0) as u16
            } else {
                0
            };
            out.write_all(&mm.to_be_bytes())?;
        }
        Ok(())
    }
}

/// Shaded intensity image in `[0, 1]`; background pixels are 0.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayFrame {
    pub width: usize,
    pub height: usize,
    pub intensities: Vec<f32>,
    pub pose: Pose5D,
}

impl GrayFrame {
    /// Intensities quantized to 8 bits, row-major.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.intensities
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn write_pgm(&self, mut out: impl Write) -> std::io::Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        out.write_all(&self.to_bytes())
    }
}

/// The `k` preceding frames plus the current one, oldest first.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameStack {
    k: usize,
    frames: VecDeque<GrayFrame>,
}

impl FrameStack {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            frames: VecDeque::with_capacity(k + 1),
        }
    }

    pub fn push(&mut self, frame: GrayFrame) {
        if self.frames.len() == self.k + 1 {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &GrayFrame> {
        self.frames.iter()
    }

    pub fn latest(&self) -> Option<&GrayFrame> {
        self.frames.back()
    }
}

/// Directional light: `direction` is the direction light travels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "LightRepr", into = "LightRepr")]
pub struct Light {
    pub direction: Unit<Vector3<f64>>,
    pub ambient: f64,
}

#[derive(Serialize, Deserialize)]
struct LightRepr {
    direction: [f64; 3],
    ambient: f64,
}

impl From<LightRepr> for Light {
    fn from(r: LightRepr) -> Self {
        Self {
            direction: Unit::new_normalize(Vector3::from(r.direction)),
            ambient: r.ambient,
        }
    }
}

impl From<Light> for LightRepr {
    fn from(l: Light) -> Self {
        Self {
            direction: l.direction.into_inner().into(),
            ambient: l.ambient,
        }
    }
}

impl Default for Light {
    fn default() -> Self {
        Self {
            direction: Unit::new_normalize(Vector3::new(-1.0, -1.0, -2.0)),
            ambient: 0.2,
        }
    }
}

impl Light {
    /// `ambient + (1 - ambient) * max(0, n . -direction)`.
    pub fn shade(&self, normal: &Vector3<f64>) -> f64 {
        let lambert = normal.dot(&-self.direction.into_inner()).max(0.0);
        self.ambient + (1.0 - self.ambient) * lambert
    }
}

/// World-space unit direction through the center of pixel `(row, col)`.
#[inline]
pub fn pixel_ray_direction(frame: &CameraFrame, intr: &CameraIntrinsics, row: usize, col: usize) -> Vector3<f64> {
    (frame.rotation * intr.pixel_direction_local(row, col)).normalize()
}

/// One ray per pixel center, row-major.
pub fn camera_rays(pose: &Pose5D, intr: &CameraIntrinsics) -> Vec<Ray> {
    let frame = pose.frame();
    let origin = frame.origin();
    let mut rays = Vec::with_capacity(intr.pixel_count());
    for row in 0..intr.height() {
        for col in 0..intr.width() {
            rays.push(Ray {
                origin,
                direction: Unit::new_unchecked(pixel_ray_direction(&frame, intr, row, col)),
            });
        }
    }
    rays
}

#[inline]
fn cast_pixel(bvh: &Bvh, frame: &CameraFrame, intr: &CameraIntrinsics, row: usize, col: usize) -> Option<(f64, Vector3<f64>)> {
    let ray = Ray {
        origin: frame.origin(),
        direction: Unit::new_unchecked(pixel_ray_direction(frame, intr, row, col)),
    };
    bvh.intersect(&ray)
        .filter(|h| h.distance <= intr.max_range())
        .map(|h| (h.distance, h.normal))
}

/// Renders range and shading in one pass; rows may be processed in parallel.
pub fn render_view_with(
    bvh: &Bvh,
    pose: &Pose5D,
    intr: &CameraIntrinsics,
    light: &Light,
    exec: Execution,
) -> (DepthMap, GrayFrame) {
    let frame = pose.frame();
    let width = intr.width();
    let rows = exec.map_indexed(intr.height(), |row| {
        let mut depths = Vec::with_capacity(width);
        let mut gray = Vec::with_capacity(width);
        for col in 0..width {
            match cast_pixel(bvh, &frame, intr, row, col) {
                Some((d, n)) => {
                    depths.push(d);
                    gray.push(light.shade(&n) as f32);
                }
                None => {
                    depths.push(f64::INFINITY);
                    gray.push(0.0);
                }
            }
        }
        (depths, gray)
    });
    let mut depths = Vec::with_capacity(intr.pixel_count());
    let mut intensities = Vec::with_capacity(intr.pixel_count());
    for (d, g) in rows {
        depths.extend(d);
        intensities.extend(g);
    }
    (
        DepthMap {
            depths,
            pose: *pose,
            intrinsics: *intr,
        },
        GrayFrame {
            width,
            height: intr.height(),
            intensities,
            pose: *pose,
        },
    )
}

pub fn render_view(bvh: &Bvh, pose: &Pose5D, intr: &CameraIntrinsics, light: &Light) -> (DepthMap, GrayFrame) {
    render_view_with(bvh, pose, intr, light, Execution::default())
}

pub fn render_depth_with(bvh: &Bvh, pose: &Pose5D, intr: &CameraIntrinsics, exec: Execution) -> DepthMap {
    let frame = pose.frame();
    let width = intr.width();
    let depths = exec
        .map_indexed(intr.height(), |row| {
            (0..width)
                .map(|col| cast_pixel(bvh, &frame, intr, row, col).map_or(f64::INFINITY, |(d, _)| d))
                .collect::<Vec<_>>()
        })
        .concat();
    DepthMap {
        depths,
        pose: *pose,
        intrinsics: *intr,
    }
}

pub fn render_depth(bvh: &Bvh, pose: &Pose5D, intr: &CameraIntrinsics) -> DepthMap {
    render_depth_with(bvh, pose, intr, Execution::default())
}

pub fn render_gray(bvh: &Bvh, pose: &Pose5D, intr: &CameraIntrinsics, light: &Light) -> GrayFrame {
    render_view(bvh, pose, intr, light).1
}
