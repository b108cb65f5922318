use nalgebra::{Matrix3, Point2, Point3, Rotation3, Unit, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::OrientedBox3;
use crate::metrics::Rect2;
use crate::registration::RigidTransform;
use crate::seed;

pub const IMAGE_WIDTH: u32 = 1080;
pub const IMAGE_HEIGHT: u32 = 720;

/// Nearest depth treated as in front of the camera (m).
pub const NEAR: f64 = 1e-6;

/// Pinhole camera. Camera axes: x right, y down, z forward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraRepr", into = "CameraRepr")]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// World to camera.
    pub pose: RigidTransform,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraRepr {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
    world_to_camera: Vec<f64>,
}

impl TryFrom<CameraRepr> for CameraModel {
    type Error = Error;

    fn try_from(r: CameraRepr) -> Result<Self> {
        let m: [f64; 16] = r
            .world_to_camera
            .as_slice()
            .try_into()
            .map_err(|_| Error::InvalidArgument("world_to_camera needs 16 values".into()))?;
        CameraModel::new(
            r.fx,
            r.fy,
            r.cx,
            r.cy,
            r.width,
            r.height,
            RigidTransform::from_row_major4(&m)?,
        )
    }
}

impl From<CameraModel> for CameraRepr {
    fn from(c: CameraModel) -> Self {
        CameraRepr {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            width: c.width,
            height: c.height,
            world_to_camera: c.pose.to_row_major4().to_vec(),
        }
    }
}

impl CameraModel {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32, pose: RigidTransform) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::InvalidArgument("focal lengths must be positive".into()));
        }
        if !(cx >= 0.0 && cx < width as f64 && cy >= 0.0 && cy < height as f64) {
            return Err(Error::InvalidArgument("principal point outside the image".into()));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            pose,
        })
    }

    /// Camera at `eye` looking at `target`, world z up.
    pub fn look_at(focal: f64, width: u32, height: u32, eye: &Point3<f64>, target: &Point3<f64>) -> Result<Self> {
        let pose = look_at_pose(eye, target)?;
        Self::new(
            focal,
            focal,
            width as f64 / 2.0,
            height as f64 / 2.0,
            width,
            height,
            pose,
        )
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Point3<f64> {
        self.pose.inverse().apply(&Point3::origin())
    }

    /// Unit viewing direction in world coordinates.
    pub fn forward(&self) -> Vector3<f64> {
        self.pose.rotation.inverse() * Vector3::z()
    }

    pub fn intrinsics(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn image_rect(&self) -> Rect2 {
        Rect2 {
            x_min: 0.0,
            y_min: 0.0,
            x_max: self.width as f64,
            y_max: self.height as f64,
        }
    }

    /// Pixel coordinates and depth of a camera-frame point.
    pub fn project_camera_point(&self, p: &Point3<f64>) -> (Point2<f64>, f64) {
        (
            Point2::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy),
            p.z,
        )
    }

    /// Pixel coordinates and depth of a world point. The pixel is only
    /// meaningful for positive depth.
    pub fn project(&self, p: &Point3<f64>) -> (Point2<f64>, f64) {
        self.project_camera_point(&self.pose.apply(p))
    }

    /// World-space ray direction through a pixel (unit length).
    pub fn pixel_ray(&self, u: f64, v: f64) -> Vector3<f64> {
        let d = Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0);
        (self.pose.rotation.inverse() * d).normalize()
    }
}

/// World-to-camera pose of a camera at `eye` looking at `target` with world
/// z up.
pub fn look_at_pose(eye: &Point3<f64>, target: &Point3<f64>) -> Result<RigidTransform> {
    let f = target - eye;
    if f.norm() == 0.0 {
        return Err(Error::InvalidArgument("eye and target coincide".into()));
    }
    let f = f.normalize();
    let right = f.cross(&Vector3::z());
    if right.norm() < 1e-9 {
        return Err(Error::InvalidArgument("view direction parallel to up".into()));
    }
    let right = right.normalize();
    let down = f.cross(&right);
    let m = Matrix3::from_rows(&[right.transpose(), down.transpose(), f.transpose()]);
    let rotation = Rotation3::from_matrix_unchecked(m);
    Ok(RigidTransform::new(rotation, -(rotation * eye.coords)))
}

/// Projects world points; returns pixel coordinates and depths.
pub fn project_points(camera: &CameraModel, points: &[Point3<f64>]) -> Vec<(Point2<f64>, f64)> {
    points.iter().map(|p| camera.project(p)).collect()
}

/// Bounding rectangle of the projected box corners, clipped to the image.
/// Every corner must lie in front of the camera.
pub fn project_box_2d(camera: &CameraModel, b: &OrientedBox3) -> Result<Rect2> {
    let mut r = Rect2 {
        x_min: f64::INFINITY,
        y_min: f64::INFINITY,
        x_max: f64::NEG_INFINITY,
        y_max: f64::NEG_INFINITY,
    };
    for c in b.corners() {
        let (px, depth) = camera.project(&c);
        if !(depth > NEAR) {
            return Err(Error::BehindCamera);
        }
        r.x_min = r.x_min.min(px.x);
        r.y_min = r.y_min.min(px.y);
        r.x_max = r.x_max.max(px.x);
        r.y_max = r.y_max.max(px.y);
    }
    Ok(clip_rect(&r, &camera.image_rect()))
}

pub(crate) fn clip_rect(r: &Rect2, to: &Rect2) -> Rect2 {
    let x_min = r.x_min.clamp(to.x_min, to.x_max);
    let y_min = r.y_min.clamp(to.y_min, to.y_max);
    Rect2 {
        x_min,
        y_min,
        x_max: r.x_max.clamp(x_min, to.x_max),
        y_max: r.y_max.clamp(y_min, to.y_max),
    }
}

/// Ranges for camera placement around a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraSampling {
    /// Degrees above the ground plane.
    pub elevation_deg: [f64; 2],
    /// Half-width of the azimuth window around the impact face (degrees).
    pub damaged_azimuth_deg: f64,
    /// Largest random tilt of the look-at orientation (degrees).
    pub lookat_jitter_deg: f64,
    pub focal_px: f64,
    /// Multiplicative focal-length range.
    pub focal_scale: [f64; 2],
    /// Camera distance as a multiple of the target's bounding-box diagonal.
    pub distance_scale: [f64; 2],
    pub width: u32,
    pub height: u32,
}

impl Default for CameraSampling {
    fn default() -> Self {
        Self {
            elevation_deg: [20.0, 60.0],
            damaged_azimuth_deg: 30.0,
            lookat_jitter_deg: 5.0,
            focal_px: 1000.0,
            focal_scale: [0.9, 1.1],
            distance_scale: [2.0, 3.5],
            width: IMAGE_WIDTH,
            height: IMAGE_HEIGHT,
        }
    }
}

impl CameraSampling {
    pub fn validate(&self) -> Result<()> {
        let [e0, e1] = self.elevation_deg;
        if !(0.0 < e0 && e0 < e1 && e1 < 90.0) {
            return Err(Error::Config {
                field: "camera.elevation_deg".into(),
                reason: "needs 0 < min < max < 90".into(),
            });
        }
        if !(self.damaged_azimuth_deg >= 0.0 && self.damaged_azimuth_deg <= 180.0) {
            return Err(Error::Config {
                field: "camera.damaged_azimuth_deg".into(),
                reason: "must lie in [0, 180]".into(),
            });
        }
        if !(self.lookat_jitter_deg >= 0.0) || !(self.focal_px > 0.0) {
            return Err(Error::Config {
                field: "camera.focal_px".into(),
                reason: "focal length must be positive and jitter non-negative".into(),
            });
        }
        for (name, [a, b]) in [
            ("camera.focal_scale", self.focal_scale),
            ("camera.distance_scale", self.distance_scale),
        ] {
            if !(0.0 < a && a <= b) {
                return Err(Error::Config {
                    field: name.into(),
                    reason: "needs 0 < min <= max".into(),
                });
            }
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config {
                field: "camera.width".into(),
                reason: "image size must be positive".into(),
            });
        }
        Ok(())
    }
}

/// A sampled camera together with the angles it was placed at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledCamera {
    pub camera: CameraModel,
    pub elevation_deg: f64,
    /// Absolute azimuth of the camera position around the target, in
    /// `[0, 360)`.
    pub azimuth_deg: f64,
}

/// Samples a camera looking at `target`.
///
/// With `face_azimuth_deg` set (a damaged target), the camera azimuth stays
/// within the damaged window around it; otherwise it is uniform.
pub fn sample_camera(
    sampling: &CameraSampling,
    target: &OrientedBox3,
    face_azimuth_deg: Option<f64>,
    seed: u64,
) -> Result<SampledCamera> {
    let mut rng = seed::rng(seed);
    let [e0, e1] = sampling.elevation_deg;
    let elevation_deg = rng.random_range(e0..=e1);
    let azimuth_deg = match face_azimuth_deg {
        Some(a) => {
            let w = sampling.damaged_azimuth_deg;
            (a + rng.random_range(-w..=w)).rem_euclid(360.0)
        }
        None => rng.random_range(0.0..360.0),
    };
    let [d0, d1] = sampling.distance_scale;
    let distance = target.diagonal() * rng.random_range(d0..=d1);
    let [f0, f1] = sampling.focal_scale;
    let focal = sampling.focal_px * rng.random_range(f0..=f1);

    let (el, az) = (elevation_deg.to_radians(), azimuth_deg.to_radians());
    let dir = Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
    let eye = target.center + dir * distance;
    let mut camera = CameraModel::look_at(focal, sampling.width, sampling.height, &eye, &target.center)?;

    // Tilt the viewing orientation about the camera center.
    let axis = loop {
        let v = Vector3::new(
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            break Unit::new_normalize(v);
        }
    };
    let angle = rng.random_range(0.0..=sampling.lookat_jitter_deg).to_radians();
    let tilt = Rotation3::from_axis_angle(&axis, angle);
    let rotation = tilt * camera.pose.rotation;
    camera.pose = RigidTransform::new(rotation, -(rotation * eye.coords));
    Ok(SampledCamera {
        camera,
        elevation_deg,
        azimuth_deg,
    })
}

/// Elevation and azimuth (degrees) of `eye` as seen from `target`.
pub fn view_angles(eye: &Point3<f64>, target: &Point3<f64>) -> (f64, f64) {
    let d = eye - target;
    let elevation = d.z.atan2((d.x * d.x + d.y * d.y).sqrt()).to_degrees();
    let azimuth = d.y.atan2(d.x).to_degrees().rem_euclid(360.0);
    (elevation, azimuth)
}

/// Signed difference `a - b` of two angles in degrees, wrapped to
/// `[-180, 180)`.
pub fn angle_difference_deg(a: f64, b: f64) -> f64 {
    (a - b + 180.0).rem_euclid(360.0) - 180.0
}
