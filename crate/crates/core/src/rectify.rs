//! Visible side surfaces of a parcel box and their fronto-parallel views.

use image::{Rgb, RgbImage, Rgba, RgbaImage};
use nalgebra::{Matrix3, Point2, Point3, SMatrix, SVector, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{BoxFace, OrientedBox3};
use crate::scene::{CameraModel, NEAR};

pub const DEFAULT_PIXELS_PER_METER: f64 = 500.0;
const MIN_FACE_AREA_PX: f64 = 1.0;

/// Faces whose outward normal points against the ray from the camera to the
/// face center, in [`BoxFace::ALL`] order.
pub fn visible_faces(b: &OrientedBox3, camera: &CameraModel) -> Result<Vec<BoxFace>> {
    if b.corners().iter().any(|c| !(camera.pose.apply(c).z > NEAR)) {
        return Err(Error::BehindCamera);
    }
    let eye = camera.center();
    Ok(BoxFace::ALL
        .into_iter()
        .filter(|&f| b.face_normal(f).dot(&(b.face_center(f) - eye)) < 0.0)
        .collect())
}

/// Planar projective map, stored with `m[(2, 2)] = 1` when that entry is
/// nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 9]", into = "[f64; 9]")]
pub struct Homography {
    m: Matrix3<f64>,
}

impl TryFrom<[f64; 9]> for Homography {
    type Error = Error;

    fn try_from(v: [f64; 9]) -> Result<Self> {
        Homography::new(Matrix3::from_row_slice(&v))
    }
}

impl From<Homography> for [f64; 9] {
    fn from(h: Homography) -> Self {
        let m = h.m;
        std::array::from_fn(|k| m[(k / 3, k % 3)])
    }
}

impl Homography {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::SingularHomography);
        }
        let m = if m[(2, 2)] != 0.0 { m / m[(2, 2)] } else { m };
        if !(m.determinant().abs() > 1e-12) {
            return Err(Error::SingularHomography);
        }
        Ok(Self { m })
    }

    pub fn identity() -> Self {
        Self { m: Matrix3::identity() }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn apply(&self, p: &Point2<f64>) -> Point2<f64> {
        let q = self.m * Vector3::new(p.x, p.y, 1.0);
        Point2::new(q.x / q.z, q.y / q.z)
    }

    pub fn inverse(&self) -> Result<Self> {
        Homography::new(self.m.try_inverse().ok_or(Error::SingularHomography)?)
    }

    pub fn compose(&self, first: &Homography) -> Result<Self> {
        Homography::new(self.m * first.m)
    }

    /// Exact map of four point correspondences (normalized DLT).
    pub fn from_correspondences(src: &[Point2<f64>; 4], dst: &[Point2<f64>; 4]) -> Result<Self> {
        let ts = conditioning(src)?;
        let td = conditioning(dst)?;
        let s = src.map(|p| apply_affine(&ts, &p));
        let d = dst.map(|p| apply_affine(&td, &p));
        // With h33 fixed to 1: two rows per correspondence.
        let mut a = SMatrix::<f64, 8, 8>::zeros();
        let mut b = SVector::<f64, 8>::zeros();
        for k in 0..4 {
            let (x, y, u, v) = (s[k].x, s[k].y, d[k].x, d[k].y);
            let r = 2 * k;
            a.row_mut(r)
                .copy_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]);
            a.row_mut(r + 1)
                .copy_from_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]);
            b[r] = u;
            b[r + 1] = v;
        }
        let h = a.lu().solve(&b).ok_or(Error::SingularHomography)?;
        let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0);
        let td_inv = td.try_inverse().ok_or(Error::SingularHomography)?;
        Homography::new(td_inv * hn * ts)
    }
}

/// Similarity that centers the points and scales their mean distance from
/// the centroid to sqrt(2).
fn conditioning(p: &[Point2<f64>; 4]) -> Result<Matrix3<f64>> {
    let c = p.iter().fold(Vector3::zeros(), |a, q| a + Vector3::new(q.x, q.y, 0.0)) / 4.0;
    let mean = p
        .iter()
        .map(|q| ((q.x - c.x).powi(2) + (q.y - c.y).powi(2)).sqrt())
        .sum::<f64>()
        / 4.0;
    if !(mean > 0.0) {
        return Err(Error::SingularHomography);
    }
    let s = std::f64::consts::SQRT_2 / mean;
    Ok(Matrix3::new(s, 0.0, -s * c.x, 0.0, s, -s * c.y, 0.0, 0.0, 1.0))
}

fn apply_affine(m: &Matrix3<f64>, p: &Point2<f64>) -> Point2<f64> {
    Point2::new(m[(0, 0)] * p.x + m[(0, 2)], m[(1, 1)] * p.y + m[(1, 2)])
}

fn quad_area(q: &[Point2<f64>; 4]) -> f64 {
    let mut a = 0.0;
    for k in 0..4 {
        let (p, r) = (q[k], q[(k + 1) % 4]);
        a += p.x * r.y - r.x * p.y;
    }
    a.abs() / 2.0
}

/// Homography from the image to a head-on view of one face, plus the
/// view's size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceRectification {
    pub homography: Homography,
    pub width_px: u32,
    pub height_px: u32,
    /// Physical edge lengths (c0 to c1, c0 to c3) in meters.
    pub width_m: f64,
    pub height_m: f64,
}

/// Maps the projected face quadrilateral onto a `width x height` pixel
/// rectangle sized by the face's physical dimensions. Corners `c0..c3` (as
/// returned by [`OrientedBox3::face_corners`]) go to the bottom-left,
/// bottom-right, top-right and top-left of the output.
pub fn face_homography(
    corners: &[Point3<f64>; 4],
    camera: &CameraModel,
    pixels_per_meter: f64,
) -> Result<FaceRectification> {
    if !(pixels_per_meter > 0.0) || !pixels_per_meter.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "pixels per meter must be positive, got {pixels_per_meter}"
        )));
    }
    let [c0, c1, c2, c3] = *corners;
    let (e1, e3) = (c1 - c0, c3 - c0);
    let (width_m, height_m) = (e1.norm(), e3.norm());
    let n = e1.cross(&e3);
    if !(n.norm() > 0.0) {
        return Err(Error::DegenerateFace(0.0));
    }
    let scale = width_m.max(height_m);
    if (c2 - c0).dot(&n.normalize()).abs() > 1e-9 * scale {
        return Err(Error::InvalidArgument("face corners are not coplanar".into()));
    }
    let mut img = [Point2::origin(); 4];
    for (k, c) in corners.iter().enumerate() {
        let (p, depth) = camera.project(c);
        if !(depth > NEAR) {
            return Err(Error::BehindCamera);
        }
        img[k] = p;
    }
    let area = quad_area(&img);
    if area < MIN_FACE_AREA_PX {
        return Err(Error::DegenerateFace(area));
    }
    let w = ((width_m * pixels_per_meter).round() as u32).max(1);
    let h = ((height_m * pixels_per_meter).round() as u32).max(1);
    let (wf, hf) = (w as f64, h as f64);
    let dst = [
        Point2::new(0.0, hf),
        Point2::new(wf, hf),
        Point2::new(wf, 0.0),
        Point2::new(0.0, 0.0),
    ];
    Ok(FaceRectification {
        homography: Homography::from_correspondences(&img, &dst)?,
        width_px: w,
        height_px: h,
        width_m,
        height_m,
    })
}

/// Bilinear sample at continuous coordinates, with pixel `(i, j)` covering
/// `[i, i+1] x [j, j+1]`. `None` outside the image.
fn sample_bilinear(img: &RgbImage, x: f64, y: f64) -> Option<[f64; 3]> {
    let (w, h) = (img.width() as f64, img.height() as f64);
    if !(x >= 0.0 && y >= 0.0 && x <= w && y <= h) {
        return None;
    }
    let fx = (x - 0.5).clamp(0.0, w - 1.0);
    let fy = (y - 0.5).clamp(0.0, h - 1.0);
    let (x0, y0) = (fx.floor(), fy.floor());
    let (tx, ty) = (fx - x0, fy - y0);
    let (x0, y0) = (x0 as u32, y0 as u32);
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let px = |i, j| img.get_pixel(i, j).0.map(f64::from);
    let (a, b, c, d) = (px(x0, y0), px(x1, y0), px(x0, y1), px(x1, y1));
    Some(std::array::from_fn(|k| {
        let top = a[k] + (b[k] - a[k]) * tx;
        let bot = c[k] + (d[k] - c[k]) * tx;
        top + (bot - top) * ty
    }))
}

/// Inverse warp of `src` through `h` (source to output) into a
/// `width x height` image. Output pixels whose preimage falls outside the
/// source are transparent.
pub fn rectify_face(src: &RgbImage, h: &Homography, width: u32, height: u32) -> Result<RgbaImage> {
    let inv = h.inverse()?;
    let mut out = RgbaImage::new(width, height);
    out.par_chunks_mut(4 * width as usize).enumerate().for_each(|(j, row)| {
        for (i, px) in row.chunks_mut(4).enumerate() {
            let q = inv.m * Vector3::new(i as f64 + 0.5, j as f64 + 0.5, 1.0);
            let v = if q.z.abs() > 1e-300 {
                sample_bilinear(src, q.x / q.z, q.y / q.z)
            } else {
                None
            };
            if let Some(c) = v {
                px.copy_from_slice(&[c[0].round() as u8, c[1].round() as u8, c[2].round() as u8, 255]);
            }
        }
    });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RectifiedFace {
    pub face: BoxFace,
    pub rectification: FaceRectification,
    pub image: RgbaImage,
}

/// Rectifies every visible face of `b`.
pub fn rectify_visible_faces(
    image: &RgbImage,
    b: &OrientedBox3,
    camera: &CameraModel,
    pixels_per_meter: f64,
) -> Result<Vec<RectifiedFace>> {
    visible_faces(b, camera)?
        .into_par_iter()
        .map(|face| {
            let r = face_homography(&b.face_corners(face), camera, pixels_per_meter)?;
            let img = rectify_face(image, &r.homography, r.width_px, r.height_px)?;
            Ok(RectifiedFace {
                face,
                rectification: r,
                image: img,
            })
        })
        .collect()
}

/// Paints `texture` onto a planar face in an image of the camera's size.
/// The texture's bottom-left, bottom-right, top-right and top-left corners
/// land on `corners[0..4]`. Pixels off the face keep `background`.
pub fn render_face_texture(
    texture: &RgbImage,
    corners: &[Point3<f64>; 4],
    camera: &CameraModel,
    background: Rgb<u8>,
) -> Result<RgbImage> {
    let mut img = [Point2::origin(); 4];
    for (k, c) in corners.iter().enumerate() {
        let (p, depth) = camera.project(c);
        if !(depth > NEAR) {
            return Err(Error::BehindCamera);
        }
        img[k] = p;
    }
    let (tw, th) = (texture.width() as f64, texture.height() as f64);
    let tex = [
        Point2::new(0.0, th),
        Point2::new(tw, th),
        Point2::new(tw, 0.0),
        Point2::new(0.0, 0.0),
    ];
    let h = Homography::from_correspondences(&tex, &img)?;
    let warped = rectify_face(texture, &h, camera.width, camera.height)?;
    Ok(RgbImage::from_fn(camera.width, camera.height, |x, y| {
        let Rgba([r, g, b, a]) = *warped.get_pixel(x, y);
        if a == 0 {
            background
        } else {
            Rgb([r, g, b])
        }
    }))
}
