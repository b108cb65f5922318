use nalgebra::{Matrix3, Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{self, OrientedBox3, TriMesh};
use crate::metrics::Rect2;
use crate::scene::CameraModel;

/// Rounds of midpoint subdivision applied to the 12-triangle box.
pub const TEMPLATE_SUBDIVISIONS: u32 = 4;

/// The cube head's 13 outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubeParams {
    /// Projected-center offset relative to the roi center, in roi widths.
    pub u: f64,
    /// Projected-center offset relative to the roi center, in roi heights.
    pub v: f64,
    /// Center depth in meters along the optical axis.
    pub z: f64,
    /// Log-scale dimension deltas against the priors.
    pub dw: f64,
    pub dh: f64,
    pub dl: f64,
    /// Two columns of the rotation, before orthonormalization.
    pub rot6d: [f64; 6],
    pub confidence: f64,
}

impl CubeParams {
    pub fn to_array(&self) -> [f64; 13] {
        let r = self.rot6d;
        [
            self.u,
            self.v,
            self.z,
            self.dw,
            self.dh,
            self.dl,
            r[0],
            r[1],
            r[2],
            r[3],
            r[4],
            r[5],
            self.confidence,
        ]
    }

    pub fn from_array(a: [f64; 13]) -> Self {
        Self {
            u: a[0],
            v: a[1],
            z: a[2],
            dw: a[3],
            dh: a[4],
            dl: a[5],
            rot6d: [a[6], a[7], a[8], a[9], a[10], a[11]],
            confidence: a[12],
        }
    }
}

/// Gram-Schmidt on the two 3-vectors of a 6D rotation code; the third
/// column is their cross product.
pub fn rotation_from_6d(r: &[f64; 6]) -> Result<Rotation3<f64>> {
    let a1 = Vector3::new(r[0], r[1], r[2]);
    let a2 = Vector3::new(r[3], r[4], r[5]);
    let n1 = a1.norm();
    if !(n1 > 1e-12) || !n1.is_finite() {
        return Err(Error::DegenerateRotation);
    }
    let b1 = a1 / n1;
    let p = a2 - b1 * b1.dot(&a2);
    let n2 = p.norm();
    if !(n2 > 1e-12 * a2.norm().max(1.0)) || !n2.is_finite() {
        return Err(Error::DegenerateRotation);
    }
    let b2 = p / n2;
    let b3 = b1.cross(&b2);
    Ok(Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[b1, b2, b3])))
}

pub fn rotation_to_6d(r: &Rotation3<f64>) -> [f64; 6] {
    let m = r.matrix();
    [m[(0, 0)], m[(1, 0)], m[(2, 0)], m[(0, 1)], m[(1, 1)], m[(2, 1)]]
}

/// Decodes cube parameters into a box in the camera frame.
///
/// `priors` holds full prior dimensions (w, h, l); the decoded half extents
/// are `priors * exp(deltas) / 2`.
pub fn decode_cube_params(
    p: &CubeParams,
    priors: &Vector3<f64>,
    camera: &CameraModel,
    roi: &Rect2,
) -> Result<OrientedBox3> {
    if !(p.z > 0.0) || !p.z.is_finite() {
        return Err(Error::InvalidDepth(p.z));
    }
    let (rcx, rcy) = roi.center();
    let px = rcx + p.u * roi.width();
    let py = rcy + p.v * roi.height();
    let center = Point3::new(
        (px - camera.cx) / camera.fx * p.z,
        (py - camera.cy) / camera.fy * p.z,
        p.z,
    );
    let deltas = Vector3::new(p.dw, p.dh, p.dl);
    let half = priors.component_mul(&deltas.map(f64::exp)) / 2.0;
    OrientedBox3::new(center, half, rotation_from_6d(&p.rot6d)?)
}

/// Exact inverse of [`decode_cube_params`] for a camera-frame box.
pub fn encode_cube_params(
    b: &OrientedBox3,
    priors: &Vector3<f64>,
    camera: &CameraModel,
    roi: &Rect2,
    confidence: f64,
) -> Result<CubeParams> {
    let z = b.center.z;
    if !(z > 0.0) {
        return Err(Error::InvalidDepth(z));
    }
    if !(roi.width() > 0.0 && roi.height() > 0.0) {
        return Err(Error::InvalidArgument("roi must have positive area".into()));
    }
    let (px, py) = camera_to_pixel(camera, &b.center);
    let (rcx, rcy) = roi.center();
    let d = (b.half_extents * 2.0).component_div(priors).map(f64::ln);
    Ok(CubeParams {
        u: (px - rcx) / roi.width(),
        v: (py - rcy) / roi.height(),
        z,
        dw: d.x,
        dh: d.y,
        dl: d.z,
        rot6d: rotation_to_6d(&b.rotation),
        confidence,
    })
}

fn camera_to_pixel(camera: &CameraModel, p: &Point3<f64>) -> (f64, f64) {
    (camera.fx * p.x / p.z + camera.cx, camera.fy * p.y / p.z + camera.cy)
}

/// Box mesh subdivided four times: 1538 vertices, 3072 faces.
pub fn build_template_mesh(b: &OrientedBox3) -> Result<TriMesh> {
    mesh::subdivide(&mesh::build_box_mesh(b), TEMPLATE_SUBDIVISIONS)
}
