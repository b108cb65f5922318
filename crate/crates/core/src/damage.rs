//! Damage quantification between an original and a current shape: volume
//! change, clustering of per-point displacement, and voxel occupancy
//! difference.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{self, SurfaceIndex, TriMesh};

/// `mesh_volume(current) / mesh_volume(original)`.
pub fn volume_change_ratio(original: &TriMesh, current: &TriMesh) -> Result<f64> {
    Ok(mesh::mesh_volume(current)? / mesh::mesh_volume(original)?)
}

/// Surface samples of the original shape, each paired with its distance to
/// the current surface.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationCloud {
    pub points: Vec<Point3<f64>>,
    pub distances: Vec<f64>,
}

impl DeformationCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn as_4d(&self) -> Vec<[f64; 4]> {
        self.points
            .iter()
            .zip(&self.distances)
            .map(|(p, &d)| [p.x, p.y, p.z, d])
            .collect()
    }
}

/// Samples `n` points on the original surface and attaches to each its
/// distance to the nearest point of the current surface. The distance is
/// exact rather than measured against a second sample set, whose spacing
/// would otherwise swamp small displacements. Both meshes must already be
/// aligned.
pub fn deformation_points_4d(original: &TriMesh, current: &TriMesh, n: usize, seed: u64) -> Result<DeformationCloud> {
    let a = mesh::surface_sample(original, n, seed)?;
    let index = SurfaceIndex::new(current);
    let distances = a.points.par_iter().map(|p| index.distance(p).unwrap_or(0.0)).collect();
    Ok(DeformationCloud {
        points: a.points,
        distances,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterParams {
    /// Neighborhood radius in the weighted 4D metric (m).
    pub eps: f64,
    pub min_pts: usize,
    /// Scale applied to the distance coordinate before clustering.
    pub distance_weight: f64,
    /// Points whose displacement does not exceed this are ignored (m).
    pub displacement_floor: f64,
}

impl ClusterParams {
    /// Defaults scaled to a shape with the given bounding-box diagonal.
    pub fn for_diagonal(diagonal: f64) -> Self {
        Self {
            eps: 0.05 * diagonal,
            min_pts: 12,
            distance_weight: 10.0,
            displacement_floor: 0.01 * diagonal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamageCluster {
    /// Indices into the clustered cloud, ascending.
    pub members: Vec<usize>,
    /// Mean of `(x, y, z, distance)` over the members.
    pub centroid: [f64; 4],
    pub mean_displacement: f64,
}

/// DBSCAN over the displaced points of `cloud`. Clusters come back sorted by
/// mean displacement, largest first.
pub fn cluster_damage(cloud: &DeformationCloud, params: &ClusterParams) -> Result<Vec<DamageCluster>> {
    if !(params.eps > 0.0) || params.min_pts == 0 || !(params.distance_weight >= 0.0) {
        return Err(Error::InvalidArgument(
            "cluster eps, min_pts and weight must be positive".into(),
        ));
    }
    let active: Vec<usize> = (0..cloud.len())
        .filter(|&i| cloud.distances[i] > params.displacement_floor)
        .collect();
    let coords: Vec<[f64; 4]> = active
        .iter()
        .map(|&i| {
            let p = cloud.points[i];
            [p.x, p.y, p.z, cloud.distances[i] * params.distance_weight]
        })
        .collect();
    let grid = CellGrid::new(&coords, params.eps);
    let neighbors: Vec<Vec<usize>> = (0..coords.len())
        .into_par_iter()
        .map(|i| grid.within(&coords, i, params.eps))
        .collect();

    const UNSEEN: usize = usize::MAX;
    const NOISE: usize = usize::MAX - 1;
    let mut label = vec![UNSEEN; coords.len()];
    let mut n_clusters = 0;
    for i in 0..coords.len() {
        if label[i] != UNSEEN {
            continue;
        }
        if neighbors[i].len() < params.min_pts {
            label[i] = NOISE;
            continue;
        }
        let c = n_clusters;
        n_clusters += 1;
        label[i] = c;
        let mut queue: Vec<usize> = neighbors[i].clone();
        let mut head = 0;
        while head < queue.len() {
            let j = queue[head];
            head += 1;
            if label[j] == NOISE {
                label[j] = c;
            }
            if label[j] != UNSEEN {
                continue;
            }
            label[j] = c;
            if neighbors[j].len() >= params.min_pts {
                queue.extend_from_slice(&neighbors[j]);
            }
        }
    }

    let mut clusters: Vec<DamageCluster> = (0..n_clusters)
        .map(|c| {
            let members: Vec<usize> = (0..coords.len())
                .filter(|&k| label[k] == c)
                .map(|k| active[k])
                .collect();
            let mut centroid = [0.0; 4];
            for &m in &members {
                let p = cloud.points[m];
                for (acc, v) in centroid.iter_mut().zip([p.x, p.y, p.z, cloud.distances[m]]) {
                    *acc += v;
                }
            }
            let n = members.len() as f64;
            centroid.iter_mut().for_each(|v| *v /= n);
            DamageCluster {
                mean_displacement: centroid[3],
                centroid,
                members,
            }
        })
        .collect();
    clusters.sort_by(|a, b| {
        b.mean_displacement
            .total_cmp(&a.mean_displacement)
            .then(a.members[0].cmp(&b.members[0]))
    });
    Ok(clusters)
}

/// Uniform hash grid over the spatial part of 4D points. The weighted 4D
/// distance is never smaller than the spatial distance, so scanning the 27
/// surrounding cells finds every neighbor.
struct CellGrid {
    cell: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl CellGrid {
    fn key(p: &[f64; 4], cell: f64) -> [i64; 3] {
        [
            (p[0] / cell).floor() as i64,
            (p[1] / cell).floor() as i64,
            (p[2] / cell).floor() as i64,
        ]
    }

    fn new(points: &[[f64; 4]], cell: f64) -> Self {
        let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self { cell, cells }
    }

    /// Indices within `eps` of point `i`, itself included, ascending.
    fn within(&self, points: &[[f64; 4]], i: usize, eps: f64) -> Vec<usize> {
        let p = &points[i];
        let k = Self::key(p, self.cell);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for &j in ids {
                            let q = &points[j];
                            let d2: f64 = (0..4).map(|a| (p[a] - q[a]).powi(2)).sum();
                            if d2 <= eps * eps {
                                out.push(j);
                            }
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Placement and size of a voxel grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridFrame {
    /// Corner of cell (0, 0, 0).
    pub origin: Point3<f64>,
    pub cell: f64,
    pub dims: [usize; 3],
}

impl GridFrame {
    /// Frame covering the joint bounding box of `meshes` with one cell of
    /// padding on every side; `resolution` cells span the longest extent.
    pub fn covering(meshes: &[&TriMesh], resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::InvalidArgument("resolution must be at least 1".into()));
        }
        let all: Vec<Point3<f64>> = meshes.iter().flat_map(|m| m.vertices().iter().copied()).collect();
        let (lo, hi) = mesh::bounds(&all).ok_or(Error::EmptySet)?;
        let ext = hi - lo;
        let longest = ext.max();
        if !(longest > 0.0) {
            return Err(Error::DegenerateBounds("zero extent".into()));
        }
        let cell = longest / resolution as f64;
        let dims = [0, 1, 2].map(|a| ((ext[a] / cell).ceil() as usize).max(1) + 2);
        Ok(Self {
            origin: lo - Vector3::repeat(cell),
            cell,
            dims,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> Point3<f64> {
        self.origin + Vector3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.cell
    }

    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelGrid {
    pub frame: GridFrame,
    /// x-fastest, then y, then z.
    pub occupancy: Vec<bool>,
}

impl VoxelGrid {
    pub fn occupied(&self, i: usize, j: usize, k: usize) -> bool {
        self.occupancy[self.frame.index(i, j, k)]
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|&&o| o).count()
    }

    pub fn occupied_volume(&self) -> f64 {
        self.occupied_count() as f64 * self.frame.cell.powi(3)
    }
}

/// Voxelizes `mesh` over its own bounding box.
pub fn voxelize(mesh: &TriMesh, resolution: usize) -> Result<VoxelGrid> {
    voxelize_in(mesh, &GridFrame::covering(&[mesh], resolution)?)
}

/// A cell is occupied iff its center is inside the mesh, decided by the
/// parity of surface crossings along a +x ray.
pub fn voxelize_in(mesh: &TriMesh, frame: &GridFrame) -> Result<VoxelGrid> {
    mesh.ensure_watertight()?;
    let [nx, ny, nz] = frame.dims;
    let tris: Vec<[Point3<f64>; 3]> = (0..mesh.face_count()).map(|f| mesh.triangle(f)).collect();
    let slabs: Vec<Vec<bool>> = (0..nz)
        .into_par_iter()
        .map(|k| {
            let mut slab = vec![false; nx * ny];
            let mut hits = Vec::new();
            for j in 0..ny {
                let c = frame.center(0, j, k);
                hits.clear();
                for t in &tris {
                    if let Some(x) = ray_x_crossing(t, c.y, c.z) {
                        hits.push(x);
                    }
                }
                if hits.is_empty() {
                    continue;
                }
                hits.sort_by(f64::total_cmp);
                for i in 0..nx {
                    let x = frame.center(i, j, k).x;
                    let beyond = hits.len() - hits.partition_point(|&h| h <= x);
                    slab[j * nx + i] = beyond % 2 == 1;
                }
            }
            slab
        })
        .collect();
    Ok(VoxelGrid {
        frame: *frame,
        occupancy: slabs.concat(),
    })
}

/// Orientation of `p` relative to the directed segment `a -> b` in the yz
/// plane, evaluated with the endpoints in canonical order so that the two
/// triangles sharing an edge see exactly opposite signs.
fn edge_side(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let (lo, hi, flip) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
    flip * ((hi[0] - lo[0]) * (p[1] - lo[1]) - (hi[1] - lo[1]) * (p[0] - lo[0]))
}

/// The x coordinate where the line `{(t, y, z)}` crosses the triangle, or
/// `None`. Points exactly on an edge belong to the triangle on one fixed side
/// of it, so a line through a shared edge is counted once.
fn ray_x_crossing(t: &[Point3<f64>; 3], y: f64, z: f64) -> Option<f64> {
    let q = t.map(|p| [p.y, p.z]);
    let p = [y, z];
    let lo_y = q[0][0].min(q[1][0]).min(q[2][0]);
    let hi_y = q[0][0].max(q[1][0]).max(q[2][0]);
    let lo_z = q[0][1].min(q[1][1]).min(q[2][1]);
    let hi_z = q[0][1].max(q[1][1]).max(q[2][1]);
    if y < lo_y || y > hi_y || z < lo_z || z > hi_z {
        return None;
    }
    let area = (q[1][0] - q[0][0]) * (q[2][1] - q[0][1]) - (q[1][1] - q[0][1]) * (q[2][0] - q[0][0]);
    if area == 0.0 {
        return None;
    }
    let s = area.signum();
    let mut w = [0.0; 3];
    for e in 0..3 {
        let (a, b) = (q[(e + 1) % 3], q[(e + 2) % 3]);
        let side = edge_side(a, b, p) * s;
        if side < 0.0 {
            return None;
        }
        if side == 0.0 {
            // On the edge: keep it only for edges facing one fixed direction.
            let d = [(b[0] - a[0]) * s, (b[1] - a[1]) * s];
            let owned = d[1] < 0.0 || (d[1] == 0.0 && d[0] > 0.0);
            if !owned {
                return None;
            }
        }
        w[e] = side.abs();
    }
    let sum: f64 = w.iter().sum();
    if sum == 0.0 {
        return None;
    }
    Some((w[0] * t[0].x + w[1] * t[1].x + w[2] * t[2].x) / sum)
}

/// One minus the voxel IoU, i.e. `|a xor b| / |a or b|`. Two empty grids
/// differ by 0.
pub fn voxel_difference(a: &VoxelGrid, b: &VoxelGrid) -> Result<f64> {
    if a.frame != b.frame {
        return Err(Error::GridMismatch);
    }
    let (mut union, mut inter) = (0usize, 0usize);
    for (&x, &y) in a.occupancy.iter().zip(&b.occupancy) {
        union += usize::from(x || y);
        inter += usize::from(x && y);
    }
    Ok(if union == 0 {
        0.0
    } else {
        1.0 - inter as f64 / union as f64
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DamageOptions {
    pub samples: usize,
    pub voxel_resolution: usize,
    /// Overrides the diagonal-scaled clustering defaults.
    pub cluster: Option<ClusterParams>,
    pub seed: u64,
}

impl Default for DamageOptions {
    fn default() -> Self {
        Self {
            samples: 10_000,
            voxel_resolution: 64,
            cluster: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamageReport {
    pub volume_ratio: f64,
    pub clusters: Vec<DamageCluster>,
    pub voxel_difference: f64,
}

/// Runs the full damage analysis on two aligned meshes.
pub fn analyze_damage(original: &TriMesh, current: &TriMesh, opts: &DamageOptions) -> Result<DamageReport> {
    let volume_ratio = volume_change_ratio(original, current)?;
    let cloud = deformation_points_4d(original, current, opts.samples, opts.seed)?;
    let params = match opts.cluster {
        Some(p) => p,
        None => ClusterParams::for_diagonal(mesh::aabb(original)?.diagonal()),
    };
    let clusters = cluster_damage(&cloud, &params)?;
    let frame = GridFrame::covering(&[original, current], opts.voxel_resolution)?;
    let voxel_difference = voxel_difference(&voxelize_in(original, &frame)?, &voxelize_in(current, &frame)?)?;
    Ok(DamageReport {
        volume_ratio,
        clusters,
        voxel_difference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_box_mesh, icosphere, OrientedBox3};

    fn unit_cube() -> TriMesh {
        build_box_mesh(&OrientedBox3::axis_aligned(Point3::new(0.5, 0.5, 0.5), Vector3::repeat(0.5)).unwrap())
    }

    #[test]
    fn volume_ratio_examples() {
        let m = unit_cube();
        assert!((volume_change_ratio(&m, &m).unwrap() - 1.0).abs() < 1e-12);
        let s = m.map_vertices(|p| Point3::from(p.coords * 0.9));
        assert!((volume_change_ratio(&m, &s).unwrap() - 0.729).abs() < 1e-12);
    }

    #[test]
    fn unit_cube_voxels() {
        let g = voxelize(&unit_cube(), 10).unwrap();
        assert_eq!(g.frame.dims, [12, 12, 12]);
        assert_eq!(g.occupied_count(), 1000);
    }

    #[test]
    fn sphere_voxel_volume() {
        let s = icosphere(1.0, 4);
        let g = voxelize(&s, 64).unwrap();
        let v = mesh::mesh_volume(&s).unwrap();
        assert!((g.occupied_volume() - v).abs() / v < 0.05);
    }

    #[test]
    fn open_mesh_rejected() {
        let m = TriMesh::new(
            vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(voxelize(&m, 8).is_err());
    }

    #[test]
    fn difference_examples() {
        let a = unit_cube();
        let b = a.map_vertices(|p| p + Vector3::new(0.5, 0.0, 0.0));
        let far = a.map_vertices(|p| p + Vector3::new(3.0, 0.0, 0.0));
        let f = GridFrame::covering(&[&a, &b], 30).unwrap();
        let (ga, gb) = (voxelize_in(&a, &f).unwrap(), voxelize_in(&b, &f).unwrap());
        assert_eq!(voxel_difference(&ga, &ga).unwrap(), 0.0);
        assert!((voxel_difference(&ga, &gb).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(voxel_difference(&ga, &gb).unwrap(), voxel_difference(&gb, &ga).unwrap());
        let f2 = GridFrame::covering(&[&a, &far], 20).unwrap();
        let d = voxel_difference(&voxelize_in(&a, &f2).unwrap(), &voxelize_in(&far, &f2).unwrap()).unwrap();
        assert_eq!(d, 1.0);
        assert!(matches!(
            voxel_difference(&ga, &voxelize_in(&a, &f2).unwrap()),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn undamaged_has_no_clusters() {
        let m = mesh::subdivide(&unit_cube(), 3).unwrap();
        let cloud = deformation_points_4d(&m, &m, 4000, 5).unwrap();
        assert!(cloud.distances.iter().all(|&d| d >= 0.0));
        assert!(cloud.distances.iter().all(|&d| d < 1e-12));
        let clusters = cluster_damage(&cloud, &ClusterParams::for_diagonal(3f64.sqrt())).unwrap();
        assert!(clusters.is_empty());
        assert_eq!(cloud, deformation_points_4d(&m, &m, 4000, 5).unwrap());
    }

    #[test]
    fn dbscan_separates_blobs() {
        let mut points = Vec::new();
        let mut distances = Vec::new();
        for i in 0..30 {
            let t = i as f64 * 0.001;
            points.push(Point3::new(t, 0.0, 0.0));
            distances.push(0.05);
            points.push(Point3::new(5.0 + t, 0.0, 0.0));
            distances.push(0.08);
        }
        points.push(Point3::new(2.5, 0.0, 0.0));
        distances.push(0.1);
        let cloud = DeformationCloud { points, distances };
        let params = ClusterParams {
            eps: 0.1,
            min_pts: 5,
            distance_weight: 1.0,
            displacement_floor: 0.01,
        };
        let c = cluster_damage(&cloud, &params).unwrap();
        assert_eq!(c.len(), 2);
        assert!((c[0].mean_displacement - 0.08).abs() < 1e-12);
        assert!(c[0].members.iter().all(|i| i % 2 == 1 && *i < 60));
        assert_eq!(c[1].members.len(), 30);
    }

    fn dent(m: &TriMesh, center: Point3<f64>, radius: f64, depth: f64) -> TriMesh {
        m.map_vertices(|p| {
            let r2 = (p.x - center.x).powi(2) + (p.y - center.y).powi(2);
            if (p.z - center.z).abs() < 1e-12 && r2 < radius * radius {
                Point3::new(p.x, p.y, p.z - depth * (1.0 - r2 / (radius * radius)))
            } else {
                *p
            }
        })
    }

    #[test]
    fn dents_are_clustered_by_severity() {
        let m = mesh::subdivide(&unit_cube(), 5).unwrap();
        let one = dent(&m, Point3::new(0.5, 0.5, 1.0), 0.3, 0.05);
        let opts = DamageOptions::default();
        let r = analyze_damage(&m, &one, &opts).unwrap();
        assert_eq!(r.clusters.len(), 1);
        let c = r.clusters[0].centroid;
        assert!((c[2] - 1.0).abs() < 1e-9 && (c[0] - 0.5).abs() < 0.05 && (c[1] - 0.5).abs() < 0.05);
        assert!(r.voxel_difference > 0.0);

        let two = dent(
            &dent(&m, Point3::new(0.25, 0.25, 1.0), 0.22, 0.03),
            Point3::new(0.75, 0.75, 1.0),
            0.22,
            0.05,
        );
        let r = analyze_damage(&m, &two, &opts).unwrap();
        assert_eq!(r.clusters.len(), 2);
        assert!(
            r.clusters[0].centroid[0] > 0.5 && r.clusters[1].centroid[0] < 0.5,
            "{:?}",
            r.clusters.iter().map(|c| c.centroid).collect::<Vec<_>>()
        );
    }
}
