//! Indexed triangle meshes, oriented boxes and the geometric primitives the
//! rest of the crate is built on.

mod boxes;
mod closest;
mod obj;
mod primitives;

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::seed;

pub use boxes::{checked_rotation, BoxFace, OrientedBox3};
pub use closest::{closest_on_triangle, SurfaceIndex};
pub use obj::{load_obj, read_obj, save_obj, write_obj, ObjOptions};
pub use primitives::{cylinder, icosphere};

/// Indexed triangle mesh. Faces are counterclockwise when seen from outside.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "MeshRepr", into = "MeshRepr")]
pub struct TriMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
}

impl TriMesh {
    /// Builds a mesh, rejecting out-of-range indices and faces that repeat a
    /// vertex index.
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (i, f) in faces.iter().enumerate() {
            if f.iter().any(|&v| v >= n) {
                return Err(Error::InvalidMesh(format!("face {i} references a missing vertex")));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {i} is degenerate")));
            }
        }
        if vertices.iter().any(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidMesh("non-finite vertex".into()));
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Same topology, new positions.
    pub fn with_vertices(&self, vertices: Vec<Point3<f64>>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::InvalidMesh(format!(
                "expected {} vertices, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        Ok(Self {
            vertices,
            faces: self.faces.clone(),
        })
    }

    /// Applies `f` to every vertex position.
    pub fn map_vertices(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> Self {
        Self {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn triangle(&self, face: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unnormalized face normal; its length is twice the face area.
    pub fn face_cross(&self, face: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, face: usize) -> f64 {
        0.5 * self.face_cross(face).norm()
    }

    /// Unit face normal, or zero for a zero-area face.
    pub fn face_normal(&self, face: usize) -> Vector3<f64> {
        self.face_cross(face).try_normalize(0.0).unwrap_or_else(Vector3::zeros)
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Undirected edges `(lo, hi)` in order of first appearance.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut seen = HashMap::with_capacity(self.faces.len() * 3 / 2);
        let mut out = Vec::with_capacity(self.faces.len() * 3 / 2);
        for f in &self.faces {
            for k in 0..3 {
                let key = edge_key(f[k], f[(k + 1) % 3]);
                if seen.insert(key, ()).is_none() {
                    out.push(key);
                }
            }
        }
        out
    }

    /// Closed, consistently oriented two-manifold check: every directed edge
    /// appears exactly once and its reverse exactly once.
    pub fn is_watertight(&self) -> bool {
        if self.faces.is_empty() {
            return false;
        }
        let mut directed: HashMap<(usize, usize), u32> = HashMap::with_capacity(self.faces.len() * 3);
        for f in &self.faces {
            for k in 0..3 {
                *directed.entry((f[k], f[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &count)| count == 1 && directed.get(&(b, a)) == Some(&1))
    }

    pub fn ensure_watertight(&self) -> Result<()> {
        if self.is_watertight() {
            Ok(())
        } else {
            Err(Error::OpenMesh(format!(
                "{} vertices, {} faces",
                self.vertices.len(),
                self.faces.len()
            )))
        }
    }

    /// V - E + F.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges().len() as i64 + self.faces.len() as i64
    }

    /// Vertex adjacency through mesh edges, each list sorted ascending.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for [a, b] in self.edges() {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn centroid(&self) -> Point3<f64> {
        let sum = self.vertices.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Point3::from(sum / self.vertices.len().max(1) as f64)
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct MeshRepr {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
}

impl TryFrom<MeshRepr> for TriMesh {
    type Error = Error;

    fn try_from(r: MeshRepr) -> Result<Self> {
        TriMesh::new(r.vertices.into_iter().map(Point3::from).collect(), r.faces)
    }
}

impl From<TriMesh> for MeshRepr {
    fn from(m: TriMesh) -> Self {
        MeshRepr {
            vertices: m.vertices.iter().map(|p| p.coords.into()).collect(),
            faces: m.faces,
        }
    }
}

fn edge_key(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

/// Uniform scale followed by translation: `p -> scale * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct UniformTransform {
    pub scale: f64,
    pub translation: Vector3<f64>,
}

impl UniformTransform {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(p.coords * self.scale + self.translation)
    }

    pub fn apply_mesh(&self, mesh: &TriMesh) -> TriMesh {
        mesh.map_vertices(|p| self.apply(p))
    }
}

/// Points sampled on a surface with the normal of the face they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSamples {
    pub points: Vec<Point3<f64>>,
    pub normals: Vec<Vector3<f64>>,
}

impl SurfaceSamples {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn transformed(&self, t: &UniformTransform) -> Self {
        Self {
            points: self.points.iter().map(|p| t.apply(p)).collect(),
            normals: self.normals.clone(),
        }
    }
}

/// Closed 12-triangle mesh of an oriented box.
///
/// Vertex `i` is the corner with local signs given by bits `x = i & 1`,
/// `y = i & 2`, `z = i & 4`; each face is split along the diagonal that
/// starts at its lowest-index corner.
pub fn build_box_mesh(b: &OrientedBox3) -> TriMesh {
    let vertices = b.corners().to_vec();
    let mut faces = Vec::with_capacity(12);
    for face in BoxFace::ALL {
        let [c0, c1, c2, c3] = face.corner_indices();
        faces.push([c0, c1, c2]);
        faces.push([c0, c2, c3]);
    }
    TriMesh { vertices, faces }
}

/// Midpoint subdivision: each round splits every triangle into four. Edge
/// midpoints are shared between the two faces that meet at the edge.
pub fn subdivide(mesh: &TriMesh, rounds: u32) -> Result<TriMesh> {
    if rounds == 0 {
        return Ok(mesh.clone());
    }
    mesh.ensure_watertight()?;
    let mut current = mesh.clone();
    for _ in 0..rounds {
        current = subdivide_once(&current);
    }
    Ok(current)
}

fn subdivide_once(mesh: &TriMesh) -> TriMesh {
    let mut vertices = mesh.vertices.clone();
    let mut midpoints: HashMap<[usize; 2], usize> = HashMap::with_capacity(mesh.faces.len() * 3 / 2);
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point3<f64>>| -> usize {
        *midpoints.entry(edge_key(a, b)).or_insert_with(|| {
            let m = nalgebra::center(&vertices[a], &vertices[b]);
            vertices.push(m);
            vertices.len() - 1
        })
    };
    let mut faces = Vec::with_capacity(mesh.faces.len() * 4);
    for &[a, b, c] in &mesh.faces {
        let ab = midpoint(a, b, &mut vertices);
        let bc = midpoint(b, c, &mut vertices);
        let ca = midpoint(c, a, &mut vertices);
        faces.push([a, ab, ca]);
        faces.push([ab, b, bc]);
        faces.push([ca, bc, c]);
        faces.push([ab, bc, ca]);
    }
    TriMesh { vertices, faces }
}

/// Enclosed volume by the divergence theorem (sum of signed tetrahedra
/// against the origin). Positive for outward-oriented meshes.
pub fn mesh_volume(mesh: &TriMesh) -> Result<f64> {
    mesh.ensure_watertight()?;
    Ok(signed_volume(mesh))
}

/// Signed volume without the closedness check.
pub fn signed_volume(mesh: &TriMesh) -> f64 {
    // Centering on the first vertex keeps the sum well conditioned far from the origin.
    let origin = mesh.vertices.first().map(|p| p.coords).unwrap_or_else(Vector3::zeros);
    let six_v: f64 = mesh
        .faces
        .iter()
        .map(|&[a, b, c]| {
            let pa = mesh.vertices[a].coords - origin;
            let pb = mesh.vertices[b].coords - origin;
            let pc = mesh.vertices[c].coords - origin;
            pa.dot(&pb.cross(&pc))
        })
        .sum();
    six_v / 6.0
}

/// Area-uniform surface samples: faces are drawn proportionally to area and
/// points uniformly inside the face. Deterministic per seed.
pub fn surface_sample(mesh: &TriMesh, n: usize, seed: u64) -> Result<SurfaceSamples> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let mut cdf = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.face_area(f);
        cdf.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::ZeroArea);
    }
    let normals: Vec<Vector3<f64>> = (0..mesh.faces.len()).map(|f| mesh.face_normal(f)).collect();
    let mut rng = seed::rng(seed);
    let mut points = Vec::with_capacity(n);
    let mut out_normals = Vec::with_capacity(n);
    for _ in 0..n {
        let target = rng.random::<f64>() * total;
        let face = cdf.partition_point(|&c| c <= target).min(cdf.len() - 1);
        let [a, b, c] = mesh.triangle(face);
        let s = rng.random::<f64>().sqrt();
        let r = rng.random::<f64>();
        let p = a.coords * (1.0 - s) + b.coords * (s * (1.0 - r)) + c.coords * (s * r);
        points.push(Point3::from(p));
        out_normals.push(normals[face]);
    }
    Ok(SurfaceSamples {
        points,
        normals: out_normals,
    })
}

/// Axis-aligned bounding box of a point set.
pub fn aabb_of_points(points: &[Point3<f64>]) -> Result<OrientedBox3> {
    let (lo, hi) = bounds(points).ok_or_else(|| Error::DegenerateBounds("no points".into()))?;
    let half = (hi - lo) / 2.0;
    if half.iter().any(|&h| !(h > 0.0)) {
        return Err(Error::DegenerateBounds(format!(
            "extent {:?} has a zero axis",
            (hi - lo).as_slice()
        )));
    }
    OrientedBox3::axis_aligned(nalgebra::center(&lo, &hi), half)
}

/// Axis-aligned bounding box of the mesh vertices in the model frame.
pub fn aabb(mesh: &TriMesh) -> Result<OrientedBox3> {
    aabb_of_points(&mesh.vertices)
}

pub fn bounds(points: &[Point3<f64>]) -> Option<(Point3<f64>, Point3<f64>)> {
    let first = points.first()?;
    let mut lo = *first;
    let mut hi = *first;
    for p in points {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    Some((lo, hi))
}

/// Centers the bounding box at the origin and scales uniformly so that the
/// longest box edge is 1. The returned transform can be applied to a paired
/// mesh.
pub fn normalize_unit_cube(mesh: &TriMesh) -> Result<(TriMesh, UniformTransform)> {
    let t = unit_cube_transform(mesh)?;
    Ok((t.apply_mesh(mesh), t))
}

pub fn unit_cube_transform(mesh: &TriMesh) -> Result<UniformTransform> {
    let (lo, hi) = bounds(&mesh.vertices).ok_or_else(|| Error::DegenerateBounds("no vertices".into()))?;
    let longest = (hi - lo).max();
    if !(longest > 0.0) {
        return Err(Error::DegenerateBounds("all vertices coincide".into()));
    }
    let scale = 1.0 / longest;
    let center = nalgebra::center(&lo, &hi);
    Ok(UniformTransform {
        scale,
        translation: -center.coords * scale,
    })
}

/// Uniform-weight Laplacian smoothing: each iteration moves every vertex by
/// `lambda * (neighbor centroid - vertex)`.
pub fn laplacian_smooth(mesh: &TriMesh, iterations: u32, lambda: f64) -> Result<TriMesh> {
    mesh.ensure_watertight()?;
    if iterations == 0 || lambda == 0.0 {
        return Ok(mesh.clone());
    }
    let neighbors = mesh.vertex_neighbors();
    let mut pos = mesh.vertices.clone();
    let mut next = pos.clone();
    for _ in 0..iterations {
        for (i, nbrs) in neighbors.iter().enumerate() {
            if nbrs.is_empty() {
                next[i] = pos[i];
                continue;
            }
            let sum = nbrs.iter().fold(Vector3::zeros(), |acc, &j| acc + pos[j].coords);
            let centroid = sum / nbrs.len() as f64;
            next[i] = pos[i] + (centroid - pos[i].coords) * lambda;
        }
        std::mem::swap(&mut pos, &mut next);
    }
    Ok(TriMesh {
        vertices: pos,
        faces: mesh.faces.clone(),
    })
}

/// Laplacian smoothing followed by a uniform rescale about the centroid that
/// restores the input's enclosed volume. Plain Laplacian smoothing shrinks
/// closed meshes noticeably, which would otherwise dominate the volume of a
/// lightly dented box.
pub fn smooth_preserving_volume(mesh: &TriMesh, iterations: u32, lambda: f64) -> Result<TriMesh> {
    let smoothed = laplacian_smooth(mesh, iterations, lambda)?;
    let before = signed_volume(mesh);
    let after = signed_volume(&smoothed);
    if !(before > 0.0 && after > 0.0) {
        return Err(Error::InvalidMesh("non-positive volume".into()));
    }
    if before == after {
        return Ok(smoothed);
    }
    let s = (before / after).cbrt();
    let c = smoothed.centroid();
    Ok(smoothed.map_vertices(|p| c + (p - c) * s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Vector3};

    fn unit_box() -> OrientedBox3 {
        OrientedBox3::axis_aligned(Point3::origin(), Vector3::repeat(0.5)).unwrap()
    }

    #[test]
    fn box_mesh_counts_and_volume() {
        let m = build_box_mesh(&unit_box());
        assert_eq!((m.vertex_count(), m.face_count()), (8, 12));
        assert!(m.is_watertight());
        assert_eq!(m.euler_characteristic(), 2);
        assert!((mesh_volume(&m).unwrap() - 1.0).abs() < 1e-12);

        let b = OrientedBox3::axis_aligned(Point3::new(1.0, 2.0, 3.0), Vector3::new(0.25, 1.0, 0.5)).unwrap();
        assert!((mesh_volume(&build_box_mesh(&b)).unwrap() - 1.0).abs() < 1e-12);

        let r = Rotation3::from_euler_angles(0.3, -0.7, 1.1);
        let rb = OrientedBox3::new(Point3::new(-2.0, 0.5, 4.0), Vector3::repeat(0.5), r).unwrap();
        assert!((mesh_volume(&build_box_mesh(&rb)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn box_faces_point_outward() {
        let m = build_box_mesh(&unit_box());
        for f in 0..m.face_count() {
            let [a, b, c] = m.triangle(f);
            let centroid = (a.coords + b.coords + c.coords) / 3.0;
            assert!(m.face_normal(f).dot(&centroid) > 0.0);
        }
    }

    #[test]
    fn subdivision_recurrence() {
        let m = build_box_mesh(&unit_box());
        let s1 = subdivide(&m, 1).unwrap();
        assert_eq!((s1.vertex_count(), s1.edges().len(), s1.face_count()), (26, 72, 48));
        let s4 = subdivide(&m, 4).unwrap();
        assert_eq!((s4.vertex_count(), s4.face_count()), (1538, 3072));
        assert_eq!(s4.euler_characteristic(), 2);
        assert!(s4.is_watertight());
        assert_eq!(subdivide(&m, 0).unwrap(), m);
        let s3 = subdivide(&m, 3).unwrap();
        assert!((mesh_volume(&s3).unwrap() - 1.0).abs() < 1e-12);
        assert!((s3.surface_area() - 6.0).abs() < 1e-9);
    }

    #[test]
    fn subdivide_rejects_open_mesh() {
        let tri = TriMesh::new(
            vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(subdivide(&tri, 1), Err(Error::OpenMesh(_))));
        assert!(matches!(mesh_volume(&tri), Err(Error::OpenMesh(_))));
        assert_eq!(subdivide(&tri, 0).unwrap(), tri);
    }

    #[test]
    fn constructor_rejects_bad_faces() {
        let v = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)];
        assert!(TriMesh::new(v.clone(), vec![[0, 1, 3]]).is_err());
        assert!(TriMesh::new(v, vec![[0, 1, 1]]).is_err());
    }

    #[test]
    fn volume_scales_cubically() {
        let m = subdivide(&build_box_mesh(&unit_box()), 1).unwrap();
        let scaled = m.map_vertices(|p| Point3::from(p.coords * 1.7));
        let v0 = mesh_volume(&m).unwrap();
        let v1 = mesh_volume(&scaled).unwrap();
        assert!((v1 - v0 * 1.7f64.powi(3)).abs() < 1e-9);
    }

    #[test]
    fn sampling_is_deterministic_and_on_surface() {
        let tri = TriMesh::new(
            vec![
                Point3::new(0.0, 0.0, 1.0),
                Point3::new(1.0, 0.0, 1.0),
                Point3::new(0.0, 1.0, 1.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let s = surface_sample(&tri, 500, 3).unwrap();
        for p in &s.points {
            assert!((p.z - 1.0).abs() < 1e-12);
            assert!(p.x >= -1e-12 && p.y >= -1e-12 && p.x + p.y <= 1.0 + 1e-12);
        }
        assert_eq!(s, surface_sample(&tri, 500, 3).unwrap());
        assert_ne!(s, surface_sample(&tri, 500, 4).unwrap());
        assert!(surface_sample(&tri, 0, 3).is_err());
    }

    #[test]
    fn sampling_zero_area_fails() {
        let flat = TriMesh::new(
            vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(surface_sample(&flat, 10, 0), Err(Error::ZeroArea)));
    }

    #[test]
    fn cube_face_sample_counts_are_balanced() {
        // Multinomial(6000, 1/6): sd ~ 28.9, so +-50 (5%) is ~1.7 sd per face;
        // the seed is fixed so the check is deterministic.
        let s = surface_sample(&build_box_mesh(&unit_box()), 6000, 11).unwrap();
        let mut counts = [0usize; 6];
        for n in &s.normals {
            let axis = n.iamax();
            let idx = axis * 2 + usize::from(n[axis] < 0.0);
            counts[idx] += 1;
        }
        for c in counts {
            assert!((950..=1050).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn aabb_examples() {
        let b = aabb(&build_box_mesh(&unit_box())).unwrap();
        assert!((b.center - Point3::origin()).norm() < 1e-15);
        assert!((b.half_extents - Vector3::repeat(0.5)).norm() < 1e-15);

        let b = aabb_of_points(&[Point3::origin(), Point3::new(2.0, 4.0, 6.0)]).unwrap();
        assert_eq!(b.center, Point3::new(1.0, 2.0, 3.0));
        assert_eq!(b.half_extents, Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(b.rotation, Rotation3::identity());

        let r = Rotation3::from_euler_angles(0.4, 0.2, -0.9);
        let rotated = build_box_mesh(&OrientedBox3::new(Point3::origin(), Vector3::repeat(0.5), r).unwrap());
        let b = aabb(&rotated).unwrap();
        let (lo, hi) = (b.center - b.half_extents, b.center + b.half_extents);
        for k in 0..3 {
            assert!(rotated.vertices().iter().all(|p| p[k] >= lo[k] && p[k] <= hi[k]));
            assert!(rotated.vertices().iter().any(|p| p[k] == lo[k]));
            assert!(rotated.vertices().iter().any(|p| p[k] == hi[k]));
        }
        assert!(aabb_of_points(&[Point3::origin()]).is_err());
    }

    #[test]
    fn unit_cube_normalization() {
        let big =
            build_box_mesh(&OrientedBox3::axis_aligned(Point3::new(3.0, 1.0, 0.0), Vector3::repeat(1.0)).unwrap());
        let (n, _) = normalize_unit_cube(&big).unwrap();
        let b = aabb(&n).unwrap();
        assert!((b.half_extents - Vector3::repeat(0.5)).norm() < 1e-12);
        assert!(b.center.coords.norm() < 1e-12);

        let (_, t) = normalize_unit_cube(&build_box_mesh(&unit_box())).unwrap();
        assert!((t.scale - 1.0).abs() < 1e-12 && t.translation.norm() < 1e-12);

        let slab = build_box_mesh(&OrientedBox3::axis_aligned(Point3::origin(), Vector3::new(0.5, 1.0, 2.0)).unwrap());
        let (n, _) = normalize_unit_cube(&slab).unwrap();
        let e = aabb(&n).unwrap().half_extents * 2.0;
        assert!((e - Vector3::new(0.25, 0.5, 1.0)).norm() < 1e-12);

        let (_, t2) = normalize_unit_cube(&n).unwrap();
        assert!((t2.scale - 1.0).abs() < 1e-12 && t2.translation.norm() < 1e-12);
    }

    #[test]
    fn smoothing_identities() {
        let m = subdivide(&build_box_mesh(&unit_box()), 2).unwrap();
        assert_eq!(laplacian_smooth(&m, 10, 0.0).unwrap(), m);
        assert_eq!(laplacian_smooth(&m, 0, 0.5).unwrap(), m);
        let s = laplacian_smooth(&m, 10, 0.5).unwrap();
        assert_eq!(s.faces(), m.faces());
        assert_eq!(s.euler_characteristic(), 2);
    }
}
