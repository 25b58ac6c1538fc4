use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Camera viewpoint: position plus pitch and yaw. Roll is always zero.
///
/// Serialized as `[x, y, z, pitch, yaw]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 5]", try_from = "[f64; 5]")]
pub struct Pose5D {
    pub position: Point3<f64>,
    pub pitch: f64,
    pub yaw: f64,
}

/// Wraps an angle into `[-pi, pi)`.
pub(crate) fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

impl Pose5D {
    /// Validates pitch and finiteness; yaw is wrapped into `[-pi, pi)`.
    pub fn new(position: Point3<f64>, pitch: f64, yaw: f64) -> Result<Self, GeometryError> {
        if !position.coords.iter().all(|c| c.is_finite()) || !pitch.is_finite() || !yaw.is_finite() {
            return Err(GeometryError::InvalidPose("non-finite component".into()));
        }
        if !(-FRAC_PI_2..=FRAC_PI_2).contains(&pitch) {
            return Err(GeometryError::InvalidPose(format!(
                "pitch {pitch} outside [-pi/2, pi/2]"
            )));
        }
        Ok(Self {
            position,
            pitch,
            yaw: wrap_angle(yaw),
        })
    }

    pub fn from_array(a: [f64; 5]) -> Result<Self, GeometryError> {
        Self::new(Point3::new(a[0], a[1], a[2]), a[3], a[4])
    }

    /// Like [`Pose5D::from_array`] but clamps pitch into range instead of failing.
    pub fn from_array_lenient(a: [f64; 5]) -> Result<Self, GeometryError> {
        Self::new(
            Point3::new(a[0], a[1], a[2]),
            a[3].clamp(-FRAC_PI_2, FRAC_PI_2),
            a[4],
        )
    }

    pub fn to_array(&self) -> [f64; 5] {
        [
            self.position.x,
            self.position.y,
            self.position.z,
            self.pitch,
            self.yaw,
        ]
    }

    /// Pose at `position` whose forward axis points at `target`.
    pub fn look_at(position: Point3<f64>, target: Point3<f64>) -> Result<Self, GeometryError> {
        let d = target - position;
        let horizontal = d.x.hypot(d.y);
        if horizontal == 0.0 && d.z == 0.0 {
            return Err(GeometryError::InvalidPose("look-at target equals position".into()));
        }
        let pitch = d.z.atan2(horizontal);
        let yaw = if horizontal == 0.0 { 0.0 } else { d.y.atan2(d.x) };
        Self::new(position, pitch, yaw)
    }

    /// Rigid camera-to-world transform: yaw about world-up, then pitch
    /// about the camera's right axis.
    pub fn frame(&self) -> CameraFrame {
        let rotation = Rotation3::from_axis_angle(&Vector3::z_axis(), self.yaw)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), -self.pitch);
        CameraFrame {
            rotation,
            translation: self.position.coords,
        }
    }
}

impl From<Pose5D> for [f64; 5] {
    fn from(p: Pose5D) -> Self {
        p.to_array()
    }
}

impl TryFrom<[f64; 5]> for Pose5D {
    type Error = GeometryError;

    fn try_from(a: [f64; 5]) -> Result<Self, Self::Error> {
        Self::from_array(a)
    }
}

/// Camera-to-world rigid transform. Columns of `rotation` are the camera's
/// forward, left and up axes in world coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraFrame {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

impl CameraFrame {
    pub fn origin(&self) -> Point3<f64> {
        Point3::from(self.translation)
    }

    pub fn forward(&self) -> Vector3<f64> {
        self.rotation.matrix().column(0).into()
    }

    pub fn left(&self) -> Vector3<f64> {
        self.rotation.matrix().column(1).into()
    }

    pub fn right(&self) -> Vector3<f64> {
        -self.left()
    }

    pub fn up(&self) -> Vector3<f64> {
        self.rotation.matrix().column(2).into()
    }

    /// Expresses a world point in the camera's forward-left-up frame.
    pub fn to_local(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.rotation.inverse_transform_vector(&(p.coords - self.translation))
    }

    /// Recovers the pose. Yaw is read from the (always horizontal) left
    /// axis, so it survives the pitch = +-pi/2 endpoints.
    pub fn to_pose(&self) -> Pose5D {
        let f = self.forward();
        let l = self.left();
        let pitch = f.z.atan2(f.x.hypot(f.y)).clamp(-FRAC_PI_2, FRAC_PI_2);
        let yaw = (-l.x).atan2(l.y);
        Pose5D {
            position: self.origin(),
            pitch,
            yaw: wrap_angle(yaw),
        }
    }
}

/// Pinhole camera model. The horizontal field of view follows from the
/// vertical one and the aspect ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntrinsicsRepr", into = "IntrinsicsRepr")]
pub struct CameraIntrinsics {
    width: usize,
    height: usize,
    vertical_fov: f64,
    max_range: f64,
}

#[derive(Serialize, Deserialize)]
struct IntrinsicsRepr {
    width: usize,
    height: usize,
    vertical_fov: f64,
    max_range: f64,
}

impl TryFrom<IntrinsicsRepr> for CameraIntrinsics {
    type Error = GeometryError;

    fn try_from(r: IntrinsicsRepr) -> Result<Self, Self::Error> {
        Self::new(r.width, r.height, r.vertical_fov, r.max_range)
    }
}

impl From<CameraIntrinsics> for IntrinsicsRepr {
    fn from(c: CameraIntrinsics) -> Self {
        Self {
            width: c.width,
            height: c.height,
            vertical_fov: c.vertical_fov,
            max_range: c.max_range,
        }
    }
}

impl Default for CameraIntrinsics {
    /// 400x400, 90 degree vertical field of view, 40 m range.
    fn default() -> Self {
        Self {
            width: 400,
            height: 400,
            vertical_fov: FRAC_PI_2,
            max_range: 40.0,
        }
    }
}

impl CameraIntrinsics {
    pub fn new(width: usize, height: usize, vertical_fov: f64, max_range: f64) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidIntrinsics("image must be at least 1x1".into()));
        }
        if !(vertical_fov > 0.0 && vertical_fov < PI) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "vertical fov {vertical_fov} outside (0, pi)"
            )));
        }
        if !(max_range > 0.0 && max_range.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics(format!("max range {max_range}")));
        }
        Ok(Self {
            width,
            height,
            vertical_fov,
            max_range,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn vertical_fov(&self) -> f64 {
        self.vertical_fov
    }

    pub fn max_range(&self) -> f64 {
        self.max_range
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// tan of the vertical half-angle.
    pub fn tan_half_vertical(&self) -> f64 {
        (0.5 * self.vertical_fov).tan()
    }

    /// tan of the horizontal half-angle (aspect-scaled).
    pub fn tan_half_horizontal(&self) -> f64 {
        self.tan_half_vertical() * self.width as f64 / self.height as f64
    }

    /// Camera-local (forward, left, up) direction through the center of
    /// pixel `(row, col)`, not normalized; forward component is 1.
    #[inline]
    pub fn pixel_direction_local(&self, row: usize, col: usize) -> Vector3<f64> {
        let u = (2.0 * (col as f64 + 0.5) / self.width as f64 - 1.0) * self.tan_half_horizontal();
        let v = (1.0 - 2.0 * (row as f64 + 0.5) / self.height as f64) * self.tan_half_vertical();
        // u grows to the right, which is -left.
        Vector3::new(1.0, -u, v)
    }
}

/// Axis-aligned region the camera position must stay inside.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionBox {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Default for ActionBox {
    /// x, y in [-10, 10] m, z in [0, 10] m.
    fn default() -> Self {
        Self {
            min: Point3::new(-10.0, -10.0, 0.0),
            max: Point3::new(10.0, 10.0, 10.0),
        }
    }
}

impl ActionBox {
    pub fn new(min: Point3<f64>, max: Point3<f64>) -> Result<Self, GeometryError> {
        if !(0..3).all(|k| max[k] > min[k] && min[k].is_finite() && max[k].is_finite()) {
            return Err(GeometryError::DegenerateBounds {
                min: min.coords.into(),
                max: max.coords.into(),
            });
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    /// Clamps a position into the box; the flag reports whether it moved.
    pub fn clamp(&self, p: &Point3<f64>) -> (Point3<f64>, bool) {
        let q = Point3::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
            p.z.clamp(self.min.z, self.max.z),
        );
        (q, q != *p)
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }
}
