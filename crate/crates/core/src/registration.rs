//! Rigid registration of corresponded point sets and impact-face attribution.

use nalgebra::{Matrix3, Point3, Rotation3, Vector3};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{self, BoxFace, OrientedBox3};
use crate::seed;

/// Proper rigid motion `p -> rotation * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RigidRepr", into = "RigidRepr")]
pub struct RigidTransform {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let r = self.rotation.inverse();
        Self {
            rotation: r,
            translation: -(r * self.translation),
        }
    }

    /// `self` after `other`.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn apply_mesh(&self, m: &mesh::TriMesh) -> mesh::TriMesh {
        m.map_vertices(|p| self.apply(p))
    }

    pub fn apply_box(&self, b: &OrientedBox3) -> OrientedBox3 {
        b.transformed(&self.rotation, &self.translation)
    }

    /// Angle of the relative rotation between two transforms, in degrees.
    pub fn rotation_error_deg(&self, other: &RigidTransform) -> f64 {
        // The trace can round past 3 for nearly equal rotations.
        let r = self.rotation.inverse() * other.rotation;
        ((r.matrix().trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos().to_degrees()
    }

    /// Row-major 4x4 homogeneous matrix.
    pub fn to_row_major4(&self) -> [f64; 16] {
        let r = self.rotation.matrix();
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
            0.0,
            0.0,
            0.0,
            1.0,
        ]
    }

    pub fn from_row_major4(m: &[f64; 16]) -> Result<Self> {
        if m[12] != 0.0 || m[13] != 0.0 || m[14] != 0.0 || m[15] != 1.0 {
            return Err(Error::InvalidArgument(
                "last row of a rigid transform must be 0 0 0 1".into(),
            ));
        }
        let r = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        Ok(Self {
            rotation: mesh::checked_rotation(r)?,
            translation: Vector3::new(m[3], m[7], m[11]),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct RigidRepr {
    /// Row-major 3x3.
    rotation: [f64; 9],
    translation: [f64; 3],
}

impl TryFrom<RigidRepr> for RigidTransform {
    type Error = Error;

    fn try_from(r: RigidRepr) -> Result<Self> {
        Ok(Self {
            rotation: mesh::checked_rotation(Matrix3::from_row_slice(&r.rotation))?,
            translation: r.translation.into(),
        })
    }
}

impl From<RigidTransform> for RigidRepr {
    fn from(t: RigidTransform) -> Self {
        let m = t.rotation.matrix();
        RigidRepr {
            rotation: std::array::from_fn(|i| m[(i / 3, i % 3)]),
            translation: t.translation.into(),
        }
    }
}

fn centroid(points: &[Point3<f64>]) -> Vector3<f64> {
    points.iter().fold(Vector3::zeros(), |s, p| s + p.coords) / points.len() as f64
}

/// Least-squares rigid transform taking `src[i]` onto `dst[i]`: centroid
/// alignment plus SVD of the cross-covariance, with the reflection case
/// folded into the smallest singular direction.
pub fn kabsch_fit(src: &[Point3<f64>], dst: &[Point3<f64>]) -> Result<RigidTransform> {
    if src.len() != dst.len() {
        return Err(Error::InvalidArgument(format!(
            "point lists differ in length ({} vs {})",
            src.len(),
            dst.len()
        )));
    }
    if src.len() < 3 {
        return Err(Error::DegenerateSample);
    }
    let cs = centroid(src);
    let cd = centroid(dst);
    let mut cov = Matrix3::zeros();
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        let a = s.coords - cs;
        let b = d.coords - cd;
        cov += a * a.transpose();
        h += a * b.transpose();
    }
    let mut spread = cov.symmetric_eigenvalues().as_slice().to_vec();
    spread.sort_by(|a, b| b.total_cmp(a));
    if !(spread[0] > 0.0) || spread[1] <= 1e-12 * spread[0] {
        return Err(Error::DegenerateSample);
    }
    let svd = h.svd(true, true);
    let u = svd.u.ok_or(Error::DegenerateSample)?;
    let v = svd.v_t.ok_or(Error::DegenerateSample)?.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    let rotation = Rotation3::from_matrix_unchecked(r);
    Ok(RigidTransform {
        rotation,
        translation: cd - rotation * cs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacParams {
    /// Inlier threshold on the residual norm (m).
    pub eps: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl RansacParams {
    pub const DEFAULT_ITERATIONS: usize = 256;

    /// Threshold at 2% of the source bounding-box diagonal.
    pub fn for_points(src: &[Point3<f64>], seed: u64) -> Self {
        let diag = mesh::bounds(src).map_or(1.0, |(lo, hi)| (hi - lo).norm());
        Self {
            eps: 0.02 * diag,
            iterations: Self::DEFAULT_ITERATIONS,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacFit {
    /// Kabsch refit on the consensus set.
    pub transform: RigidTransform,
    /// The minimal-sample model that won the consensus vote.
    pub hypothesis: RigidTransform,
    pub inliers: Vec<bool>,
}

impl RansacFit {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&b| b).count()
    }
}

/// Random-sample consensus over index-aligned correspondences. Ties in
/// consensus size keep the earliest hypothesis.
pub fn ransac_rigid(src: &[Point3<f64>], dst: &[Point3<f64>], params: &RansacParams) -> Result<RansacFit> {
    if src.len() != dst.len() {
        return Err(Error::InvalidArgument("point lists differ in length".into()));
    }
    let n = src.len();
    if n < 3 {
        return Err(Error::NoModel(0));
    }
    let mut rng = seed::rng(params.seed);
    let mut best: Option<(usize, RigidTransform)> = None;
    for _ in 0..params.iterations {
        let pick = index::sample(&mut rng, n, 3);
        let s: Vec<Point3<f64>> = pick.iter().map(|i| src[i]).collect();
        let d: Vec<Point3<f64>> = pick.iter().map(|i| dst[i]).collect();
        let Ok(model) = kabsch_fit(&s, &d) else {
            continue;
        };
        let count = src
            .iter()
            .zip(dst)
            .filter(|(s, d)| (model.apply(s) - *d).norm() < params.eps)
            .count();
        if best.as_ref().is_none_or(|(c, _)| count > *c) {
            best = Some((count, model));
        }
    }
    let (count, hypothesis) = best.ok_or(Error::NoModel(0))?;
    if count < 3 {
        return Err(Error::NoModel(count));
    }
    let inliers: Vec<bool> = src
        .iter()
        .zip(dst)
        .map(|(s, d)| (hypothesis.apply(s) - d).norm() < params.eps)
        .collect();
    let (s, d): (Vec<_>, Vec<_>) = src
        .iter()
        .zip(dst)
        .zip(&inliers)
        .filter(|(_, &keep)| keep)
        .map(|((s, d), _)| (*s, *d))
        .unzip();
    let transform = kabsch_fit(&s, &d)?;
    Ok(RansacFit {
        transform,
        hypothesis,
        inliers,
    })
}

/// `|T(original_i) - deformed_i|` per vertex.
pub fn deformation_residuals(
    original: &[Point3<f64>],
    deformed: &[Point3<f64>],
    transform: &RigidTransform,
) -> Result<Vec<f64>> {
    if original.len() != deformed.len() {
        return Err(Error::InvalidArgument("meshes must share topology".into()));
    }
    Ok(original
        .iter()
        .zip(deformed)
        .map(|(o, d)| (transform.apply(o) - d).norm())
        .collect())
}

/// Face of `bbox` with the largest mean residual over the vertices nearest
/// to it. Ties keep the earlier face in [`BoxFace::ALL`].
pub fn impact_face(original: &[Point3<f64>], residuals: &[f64], bbox: &OrientedBox3) -> BoxFace {
    let mut sum = [0.0; 6];
    let mut count = [0usize; 6];
    for (p, r) in original.iter().zip(residuals) {
        let f = bbox.nearest_face(p) as usize;
        sum[f] += r;
        count[f] += 1;
    }
    let mut best = BoxFace::PosX;
    let mut best_mean = f64::NEG_INFINITY;
    for face in BoxFace::ALL {
        let i = face as usize;
        if count[i] == 0 {
            continue;
        }
        let m = sum[i] / count[i] as f64;
        if m > best_mean {
            best_mean = m;
            best = face;
        }
    }
    best
}
