use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::mesh::{BoxFace, OrientedBox3};

/// Axis-aligned pixel rectangle `[x_min, x_max] x [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect2 {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect2 {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self::new(x, y, x + w, y + h)
    }

    pub fn xywh(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.width(), self.height()]
    }

    pub fn width(&self) -> f64 {
        (self.x_max - self.x_min).max(0.0)
    }

    pub fn height(&self) -> f64 {
        (self.y_max - self.y_min).max(0.0)
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    pub fn intersection(&self, other: &Rect2) -> Rect2 {
        Rect2::new(
            self.x_min.max(other.x_min),
            self.y_min.max(other.y_min),
            self.x_max.min(other.x_max),
            self.y_max.min(other.y_max),
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }
}

// Manifest form is [x, y, w, h].
impl From<[f64; 4]> for Rect2 {
    fn from(v: [f64; 4]) -> Self {
        Rect2::from_xywh(v[0], v[1], v[2], v[3])
    }
}

impl From<Rect2> for [f64; 4] {
    fn from(r: Rect2) -> Self {
        r.xywh()
    }
}

/// Rectangle intersection over union; zero when the union is empty.
pub fn iou2d(a: &Rect2, b: &Rect2) -> f64 {
    let inter = a.intersection(b).area();
    let union = a.area() + b.area() - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Exact oriented-box IoU. The intersection polytope is obtained by clipping
/// box `a` against the six face halfspaces of box `b`.
pub fn iou3d(a: &OrientedBox3, b: &OrientedBox3) -> f64 {
    let inter = intersection_volume(a, b);
    let union = a.volume() + b.volume() - inter;
    if union > 0.0 {
        (inter / union).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn intersection_volume(a: &OrientedBox3, b: &OrientedBox3) -> f64 {
    let scale = a.diagonal().max(b.diagonal());
    let mut poly = Polyhedron::from_box(a);
    for face in BoxFace::ALL {
        let n = b.face_normal(face);
        let d = n.dot(&b.face_center(face).coords);
        poly.clip(&n, d, scale);
        if poly.faces.is_empty() {
            return 0.0;
        }
    }
    poly.volume()
}

/// Convex polyhedron as a list of planar faces, each counterclockwise when
/// seen from outside.
#[derive(Debug, Clone)]
struct Polyhedron {
    faces: Vec<Vec<Point3<f64>>>,
}

impl Polyhedron {
    fn from_box(b: &OrientedBox3) -> Self {
        Self {
            faces: BoxFace::ALL.iter().map(|&f| b.face_corners(f).to_vec()).collect(),
        }
    }

    /// Keeps the part with `n . x <= d` and closes the cut with a cap face.
    fn clip(&mut self, n: &Vector3<f64>, d: f64, scale: f64) {
        let eps = 1e-12 * scale.max(1e-300);
        let mut cap: Vec<Point3<f64>> = Vec::new();
        let mut closed = false;
        let mut faces = Vec::with_capacity(self.faces.len() + 1);
        for face in &self.faces {
            let s: Vec<f64> = face.iter().map(|p| n.dot(&p.coords) - d).collect();
            if s.iter().all(|&v| v.abs() <= eps) {
                // Face lies in the cutting plane and already closes the cut.
                closed = true;
                faces.push(face.clone());
                continue;
            }
            if s.iter().all(|&v| v <= eps) {
                for (p, &v) in face.iter().zip(&s) {
                    if v.abs() <= eps {
                        cap.push(*p);
                    }
                }
                faces.push(face.clone());
                continue;
            }
            if s.iter().all(|&v| v >= -eps) {
                for (p, &v) in face.iter().zip(&s) {
                    if v.abs() <= eps {
                        cap.push(*p);
                    }
                }
                continue;
            }
            let mut out = Vec::with_capacity(face.len() + 2);
            for i in 0..face.len() {
                let j = (i + 1) % face.len();
                let (pa, pb, sa, sb) = (face[i], face[j], s[i], s[j]);
                let a_in = sa <= eps;
                if a_in {
                    out.push(pa);
                    if sa.abs() <= eps {
                        cap.push(pa);
                    }
                }
                if (sa < -eps && sb > eps) || (sa > eps && sb < -eps) {
                    let t = sa / (sa - sb);
                    let x = pa + (pb - pa) * t;
                    out.push(x);
                    cap.push(x);
                }
            }
            if out.len() >= 3 {
                faces.push(out);
            }
        }
        if !closed {
            if let Some(cap_face) = order_cap(cap, n, eps) {
                faces.push(cap_face);
            }
        }
        self.faces = faces;
    }

    fn volume(&self) -> f64 {
        let (sum, count) = self
            .faces
            .iter()
            .flatten()
            .fold((Vector3::zeros(), 0usize), |(s, c), p| (s + p.coords, c + 1));
        if count == 0 {
            return 0.0;
        }
        let reference = sum / count as f64;
        let mut six_v = 0.0;
        for face in &self.faces {
            let a = face[0].coords - reference;
            for k in 1..face.len() - 1 {
                let b = face[k].coords - reference;
                let c = face[k + 1].coords - reference;
                six_v += a.dot(&b.cross(&c)).abs();
            }
        }
        six_v / 6.0
    }
}

/// Deduplicates the cut points and orders them counterclockwise around the
/// outward normal `n`.
fn order_cap(points: Vec<Point3<f64>>, n: &Vector3<f64>, eps: f64) -> Option<Vec<Point3<f64>>> {
    let mut unique: Vec<Point3<f64>> = Vec::with_capacity(points.len());
    for p in points {
        if unique.iter().all(|q| (q - p).norm() > eps * 10.0) {
            unique.push(p);
        }
    }
    if unique.len() < 3 {
        return None;
    }
    let centroid = unique.iter().fold(Vector3::zeros(), |s, p| s + p.coords) / unique.len() as f64;
    let u = n.cross(&any_perpendicular(n)).normalize();
    let v = n.cross(&u);
    let mut keyed: Vec<(f64, Point3<f64>)> = unique
        .into_iter()
        .map(|p| {
            let r = p.coords - centroid;
            (r.dot(&v).atan2(r.dot(&u)), p)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    Some(keyed.into_iter().map(|(_, p)| p).collect())
}

fn any_perpendicular(n: &Vector3<f64>) -> Vector3<f64> {
    if n.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    }
}
