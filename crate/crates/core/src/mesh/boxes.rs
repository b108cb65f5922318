use std::fmt;

use nalgebra::{Matrix3, Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Box described by its center, per-axis half extents and orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxRepr", into = "BoxRepr")]
pub struct OrientedBox3 {
    pub center: Point3<f64>,
    pub half_extents: Vector3<f64>,
    pub rotation: Rotation3<f64>,
}

impl OrientedBox3 {
    pub fn new(center: Point3<f64>, half_extents: Vector3<f64>, rotation: Rotation3<f64>) -> Result<Self> {
        if half_extents.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return Err(Error::InvalidBox(format!(
                "half extents must be positive, got {:?}",
                half_extents.as_slice()
            )));
        }
        if !center.coords.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidBox("non-finite center".into()));
        }
        Ok(Self {
            center,
            half_extents,
            rotation,
        })
    }

    pub fn axis_aligned(center: Point3<f64>, half_extents: Vector3<f64>) -> Result<Self> {
        Self::new(center, half_extents, Rotation3::identity())
    }

    /// Validates orthonormality (within 1e-9) and a positive determinant.
    pub fn from_matrix(center: Point3<f64>, half_extents: Vector3<f64>, rotation: Matrix3<f64>) -> Result<Self> {
        Self::new(center, half_extents, checked_rotation(rotation)?)
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents.product()
    }

    pub fn extents(&self) -> Vector3<f64> {
        self.half_extents * 2.0
    }

    pub fn diagonal(&self) -> f64 {
        2.0 * self.half_extents.norm()
    }

    pub fn to_world(&self, local: &Point3<f64>) -> Point3<f64> {
        self.center + self.rotation * local.coords
    }

    pub fn to_local(&self, world: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation.inverse() * (world - self.center))
    }

    /// Corner `i` has local sign `+` on x, y, z when bit 0, 1, 2 of `i` is set.
    pub fn corners(&self) -> [Point3<f64>; 8] {
        std::array::from_fn(|i| self.to_world(&Point3::from(corner_signs(i).component_mul(&self.half_extents))))
    }

    pub fn face_normal(&self, face: BoxFace) -> Vector3<f64> {
        self.rotation * face.local_normal()
    }

    pub fn face_center(&self, face: BoxFace) -> Point3<f64> {
        let local = face.local_normal().component_mul(&self.half_extents);
        self.to_world(&Point3::from(local))
    }

    /// Face corners counterclockwise seen from outside, starting from the
    /// corner with the smallest box-local coordinates.
    pub fn face_corners(&self, face: BoxFace) -> [Point3<f64>; 4] {
        let corners = self.corners();
        face.corner_indices().map(|i| corners[i])
    }

    /// Physical (width, height) of a face, measured along its first and last
    /// corner edges.
    pub fn face_dimensions(&self, face: BoxFace) -> (f64, f64) {
        let [c0, c1, _, c3] = self.face_corners(face);
        ((c1 - c0).norm(), (c3 - c0).norm())
    }

    /// Same box moved by a rigid motion.
    pub fn transformed(&self, rotation: &Rotation3<f64>, translation: &Vector3<f64>) -> Self {
        Self {
            center: rotation * self.center + translation,
            half_extents: self.half_extents,
            rotation: rotation * self.rotation,
        }
    }

    /// Face whose plane lies closest to `p`. Ties go to the earlier face in
    /// [`BoxFace::ALL`].
    pub fn nearest_face(&self, p: &Point3<f64>) -> BoxFace {
        let local = self.to_local(p);
        let mut best = BoxFace::PosX;
        let mut best_d = f64::INFINITY;
        for face in BoxFace::ALL {
            let axis = face.axis();
            let d = (face.sign() * self.half_extents[axis] - local[axis]).abs();
            if d < best_d {
                best_d = d;
                best = face;
            }
        }
        best
    }
}

pub(crate) fn corner_signs(i: usize) -> Vector3<f64> {
    let s = |bit: usize| if i & bit != 0 { 1.0 } else { -1.0 };
    Vector3::new(s(1), s(2), s(4))
}

pub fn checked_rotation(m: Matrix3<f64>) -> Result<Rotation3<f64>> {
    let err = (m.transpose() * m - Matrix3::identity()).abs().max();
    if !(err <= 1e-9) {
        return Err(Error::InvalidBox(format!(
            "rotation is not orthonormal (error {err:.3e})"
        )));
    }
    if m.determinant() <= 0.0 {
        return Err(Error::InvalidBox("rotation has negative determinant".into()));
    }
    Ok(Rotation3::from_matrix_unchecked(m))
}

pub(crate) fn row_major(m: &Matrix3<f64>) -> [f64; 9] {
    std::array::from_fn(|i| m[(i / 3, i % 3)])
}

pub(crate) fn from_row_major(v: &[f64; 9]) -> Matrix3<f64> {
    Matrix3::from_row_slice(v)
}

#[derive(Serialize, Deserialize)]
struct BoxRepr {
    center: [f64; 3],
    half_extents: [f64; 3],
    /// Row-major 3x3.
    rotation: [f64; 9],
}

impl TryFrom<BoxRepr> for OrientedBox3 {
    type Error = Error;

    fn try_from(r: BoxRepr) -> Result<Self> {
        OrientedBox3::from_matrix(r.center.into(), r.half_extents.into(), from_row_major(&r.rotation))
    }
}

impl From<OrientedBox3> for BoxRepr {
    fn from(b: OrientedBox3) -> Self {
        BoxRepr {
            center: b.center.coords.into(),
            half_extents: b.half_extents.into(),
            rotation: row_major(b.rotation.matrix()),
        }
    }
}

/// One of the six faces of a box, identified by its outward local axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoxFace {
    #[serde(rename = "+X")]
    PosX,
    #[serde(rename = "-X")]
    NegX,
    #[serde(rename = "+Y")]
    PosY,
    #[serde(rename = "-Y")]
    NegY,
    #[serde(rename = "+Z")]
    PosZ,
    #[serde(rename = "-Z")]
    NegZ,
}

impl BoxFace {
    /// Canonical order; also the tie-break order wherever faces compete.
    pub const ALL: [BoxFace; 6] = [
        BoxFace::PosX,
        BoxFace::NegX,
        BoxFace::PosY,
        BoxFace::NegY,
        BoxFace::PosZ,
        BoxFace::NegZ,
    ];

    pub fn axis(self) -> usize {
        match self {
            BoxFace::PosX | BoxFace::NegX => 0,
            BoxFace::PosY | BoxFace::NegY => 1,
            BoxFace::PosZ | BoxFace::NegZ => 2,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            BoxFace::PosX | BoxFace::PosY | BoxFace::PosZ => 1.0,
            _ => -1.0,
        }
    }

    pub fn opposite(self) -> BoxFace {
        match self {
            BoxFace::PosX => BoxFace::NegX,
            BoxFace::NegX => BoxFace::PosX,
            BoxFace::PosY => BoxFace::NegY,
            BoxFace::NegY => BoxFace::PosY,
            BoxFace::PosZ => BoxFace::NegZ,
            BoxFace::NegZ => BoxFace::PosZ,
        }
    }

    pub fn local_normal(self) -> Vector3<f64> {
        let mut n = Vector3::zeros();
        n[self.axis()] = self.sign();
        n
    }

    pub fn label(self) -> &'static str {
        match self {
            BoxFace::PosX => "+X",
            BoxFace::NegX => "-X",
            BoxFace::PosY => "+Y",
            BoxFace::NegY => "-Y",
            BoxFace::PosZ => "+Z",
            BoxFace::NegZ => "-Z",
        }
    }

    /// Corner indices (see [`OrientedBox3::corners`]) counterclockwise from
    /// outside, starting at the lowest index.
    pub fn corner_indices(self) -> [usize; 4] {
        match self {
            BoxFace::PosX => [1, 3, 7, 5],
            BoxFace::NegX => [0, 4, 6, 2],
            BoxFace::PosY => [2, 6, 7, 3],
            BoxFace::NegY => [0, 1, 5, 4],
            BoxFace::PosZ => [4, 5, 7, 6],
            BoxFace::NegZ => [0, 2, 3, 1],
        }
    }
}

impl fmt::Display for BoxFace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}
