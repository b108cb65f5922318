use nalgebra::Point3;

use super::camera::{clip_rect, CameraModel, NEAR};
use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::metrics::Rect2;

pub const DEFAULT_OCCLUSION_RESOLUTION: usize = 256;

/// Square depth buffer covering an image-space rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthRaster {
    pub region: Rect2,
    pub resolution: usize,
    /// Row-major nearest depth per sample, `INFINITY` where empty.
    pub depth: Vec<f64>,
}

impl DepthRaster {
    pub fn new(region: Rect2, resolution: usize) -> Self {
        Self {
            region,
            resolution,
            depth: vec![f64::INFINITY; resolution * resolution],
        }
    }

    /// Image coordinates of sample `(i, j)` (column, row).
    pub fn sample_point(&self, i: usize, j: usize) -> (f64, f64) {
        let sx = self.region.width() / self.resolution as f64;
        let sy = self.region.height() / self.resolution as f64;
        (
            self.region.x_min + (i as f64 + 0.5) * sx,
            self.region.y_min + (j as f64 + 0.5) * sy,
        )
    }

    pub fn covered(&self) -> usize {
        self.depth.iter().filter(|d| d.is_finite()).count()
    }

    /// Draws every triangle of `mesh`, keeping the nearest depth.
    pub fn draw_mesh(&mut self, camera: &CameraModel, mesh: &TriMesh) {
        let cam: Vec<Point3<f64>> = mesh.vertices().iter().map(|p| camera.pose.apply(p)).collect();
        for f in mesh.faces() {
            let tri = [cam[f[0]], cam[f[1]], cam[f[2]]];
            for t in clip_near(&tri) {
                self.draw_triangle(camera, &t);
            }
        }
    }

    fn draw_triangle(&mut self, camera: &CameraModel, t: &[Point3<f64>; 3]) {
        let s = t.map(|p| camera.project_camera_point(&p).0);
        let n = self.resolution as f64;
        let sx = self.region.width() / n;
        let sy = self.region.height() / n;
        if !(sx > 0.0 && sy > 0.0) {
            return;
        }
        let lo_x = s.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        let hi_x = s.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
        let lo_y = s.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
        let hi_y = s.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
        let to_index = |v: f64, lo: f64, step: f64| ((v - lo) / step - 0.5).clamp(-1.0, n);
        let i0 = to_index(lo_x, self.region.x_min, sx).ceil().max(0.0) as usize;
        let i1 = to_index(hi_x, self.region.x_min, sx).floor();
        let j0 = to_index(lo_y, self.region.y_min, sy).ceil().max(0.0) as usize;
        let j1 = to_index(hi_y, self.region.y_min, sy).floor();
        if i1 < 0.0 || j1 < 0.0 {
            return;
        }
        let (i1, j1) = (
            (i1 as usize).min(self.resolution - 1),
            (j1 as usize).min(self.resolution - 1),
        );
        let area = (s[1].x - s[0].x) * (s[2].y - s[0].y) - (s[1].y - s[0].y) * (s[2].x - s[0].x);
        if area == 0.0 {
            return;
        }
        let inv_z = t.map(|p| 1.0 / p.z);
        for j in j0..=j1 {
            for i in i0..=i1 {
                let (x, y) = self.sample_point(i, j);
                let w0 = ((s[1].x - x) * (s[2].y - y) - (s[1].y - y) * (s[2].x - x)) / area;
                let w1 = ((s[2].x - x) * (s[0].y - y) - (s[2].y - y) * (s[0].x - x)) / area;
                let w2 = 1.0 - w0 - w1;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let z = 1.0 / (w0 * inv_z[0] + w1 * inv_z[1] + w2 * inv_z[2]);
                let cell = &mut self.depth[j * self.resolution + i];
                if z < *cell {
                    *cell = z;
                }
            }
        }
    }
}

/// Clips a camera-space triangle to `z >= NEAR`, returning zero to two
/// triangles.
fn clip_near(t: &[Point3<f64>; 3]) -> Vec<[Point3<f64>; 3]> {
    let inside = t.map(|p| p.z >= NEAR);
    if inside.iter().all(|&b| b) {
        return vec![*t];
    }
    let mut poly = Vec::with_capacity(4);
    for k in 0..3 {
        let (a, b) = (t[k], t[(k + 1) % 3]);
        let (ia, ib) = (inside[k], inside[(k + 1) % 3]);
        if ia {
            poly.push(a);
        }
        if ia != ib {
            let s = (NEAR - a.z) / (b.z - a.z);
            let mut p = a + (b - a) * s;
            p.z = NEAR;
            poly.push(p);
        }
    }
    (1..poly.len().saturating_sub(1))
        .map(|k| [poly[0], poly[k], poly[k + 1]])
        .collect()
}

/// Image-space extent of the projected target, clipped to the image.
pub fn projected_extent(camera: &CameraModel, mesh: &TriMesh) -> Result<Rect2> {
    let mut r = Rect2 {
        x_min: f64::INFINITY,
        y_min: f64::INFINITY,
        x_max: f64::NEG_INFINITY,
        y_max: f64::NEG_INFINITY,
    };
    for p in mesh.vertices() {
        let (px, d) = camera.project(p);
        if !(d > NEAR) {
            return Err(Error::BehindCamera);
        }
        r.x_min = r.x_min.min(px.x);
        r.y_min = r.y_min.min(px.y);
        r.x_max = r.x_max.max(px.x);
        r.y_max = r.y_max.max(px.y);
    }
    Ok(clip_rect(&r, &camera.image_rect()))
}

/// Fraction of the target's visible silhouette hidden behind nearer
/// distractor surfaces, measured on a `resolution`² depth buffer spanning the
/// target's projected extent. A target that covers no sample (off screen)
/// counts as fully occluded.
pub fn occlusion_fraction(
    camera: &CameraModel,
    target: &TriMesh,
    distractors: &[TriMesh],
    resolution: usize,
) -> Result<f64> {
    if resolution == 0 {
        return Err(Error::InvalidArgument("raster resolution must be positive".into()));
    }
    let region = projected_extent(camera, target)?;
    let mut own = DepthRaster::new(region, resolution);
    own.draw_mesh(camera, target);
    let total = own.covered();
    if total == 0 {
        return Ok(1.0);
    }
    let mut others = DepthRaster::new(region, resolution);
    for d in distractors {
        others.draw_mesh(camera, d);
    }
    let lost = own
        .depth
        .iter()
        .zip(&others.depth)
        .filter(|(t, o)| t.is_finite() && o < t)
        .count();
    Ok(lost as f64 / total as f64)
}
