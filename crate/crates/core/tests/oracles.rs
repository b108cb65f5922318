//! Library results checked against slow, independently written oracles.

use nalgebra::{Matrix3, Point3, Vector3};
use rand::Rng;

use parcelforge::mesh::{icosphere, mesh_volume, TriMesh};
use parcelforge::metrics::SpatialIndex;
use parcelforge::scene::{occlusion_fraction, projected_extent};
use parcelforge::select::{classify_model, cuboid_similarity, ModelClass};
use parcelforge::{seed, CameraModel};

fn random_point(rng: &mut seed::Rng, s: f64) -> Point3<f64> {
    Point3::new(
        rng.random_range(-s..s),
        rng.random_range(-s..s),
        rng.random_range(-s..s),
    )
}

#[test]
fn spatial_index_matches_linear_scan() {
    let mut rng = seed::rng(31);
    for n in [1, 2, 9, 100, 2000] {
        let mut pts: Vec<Point3<f64>> = (0..n).map(|_| random_point(&mut rng, 1.0)).collect();
        // Duplicates exercise the lowest-index tie rule.
        if n > 10 {
            pts[7] = pts[3];
        }
        let index = SpatialIndex::new(pts.clone());
        for _ in 0..1000 {
            let q = if rng.random::<f64>() < 0.05 && n > 3 {
                pts[3]
            } else {
                random_point(&mut rng, 1.3)
            };
            let mut best = (0, f64::INFINITY);
            for (i, p) in pts.iter().enumerate() {
                let d = (p - q).norm_squared();
                if d < best.1 {
                    best = (i, d);
                }
            }
            let got = index.nearest(&q).unwrap();
            assert_eq!((got.index, got.dist_sq), best);
        }
    }
}

/// Convex polytope from an icosphere under a random linear map.
fn random_convex(rng: &mut seed::Rng) -> TriMesh {
    let mut m = Matrix3::from_fn(|_, _| rng.random_range(-0.4..0.4));
    m += Matrix3::from_diagonal(&Vector3::new(
        rng.random_range(0.5..1.5),
        rng.random_range(0.5..1.5),
        rng.random_range(0.5..1.5),
    ));
    if m.determinant() < 0.0 {
        m.column_mut(0).neg_mut();
    }
    let t = random_point(rng, 2.0).coords;
    icosphere(1.0, 2).map_vertices(|p| Point3::from(m * p.coords + t))
}

/// Counts voxel centers of a `res`-cell grid (along the longest extent)
/// that lie inside the convex mesh, column by column via half-space clipping.
fn voxel_oracle(mesh: &TriMesh, res: usize) -> f64 {
    let planes: Vec<(Vector3<f64>, f64)> = (0..mesh.face_count())
        .map(|f| {
            let n = mesh.face_normal(f);
            (n, n.dot(&mesh.triangle(f)[0].coords))
        })
        .collect();
    let (lo, hi) = parcelforge::mesh::bounds(mesh.vertices()).unwrap();
    let ext = hi - lo;
    let cell = ext.max() / res as f64;
    let dims = ext.map(|e| (e / cell).ceil() as usize + 1);
    let mut count = 0usize;
    for j in 0..dims.y {
        for i in 0..dims.x {
            let x = lo.x + (i as f64 + 0.5) * cell;
            let y = lo.y + (j as f64 + 0.5) * cell;
            let (mut z0, mut z1) = (f64::NEG_INFINITY, f64::INFINITY);
            let mut empty = false;
            for (n, d) in &planes {
                // n.x x + n.y y + n.z z <= d
                let rest = d - n.x * x - n.y * y;
                if n.z > 1e-15 {
                    z1 = z1.min(rest / n.z);
                } else if n.z < -1e-15 {
                    z0 = z0.max(rest / n.z);
                } else if rest < 0.0 {
                    empty = true;
                }
            }
            if empty || z0 > z1 {
                continue;
            }
            for k in 0..dims.z {
                let z = lo.z + (k as f64 + 0.5) * cell;
                if z >= z0 && z <= z1 {
                    count += 1;
                }
            }
        }
    }
    count as f64 * cell.powi(3)
}

#[test]
fn convex_volume_matches_voxel_oracle() {
    let mut rng = seed::rng(5);
    for _ in 0..5 {
        let m = random_convex(&mut rng);
        let exact = mesh_volume(&m).unwrap();
        let voxels = voxel_oracle(&m, 256);
        assert!((exact - voxels).abs() / exact < 0.01, "{exact} vs {voxels}");
    }
}

fn ray_triangle(o: &Point3<f64>, d: &Vector3<f64>, t: [Point3<f64>; 3]) -> Option<f64> {
    let e1 = t[1] - t[0];
    let e2 = t[2] - t[0];
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let s = o - t[0];
    let u = s.dot(&p) / det;
    let q = s.cross(&e1);
    let v = d.dot(&q) / det;
    let dist = e2.dot(&q) / det;
    (u >= 0.0 && v >= 0.0 && u + v <= 1.0 && dist > 0.0).then_some(dist)
}

fn nearest_hit(o: &Point3<f64>, d: &Vector3<f64>, m: &TriMesh) -> Option<f64> {
    (0..m.face_count())
        .filter_map(|f| ray_triangle(o, d, m.triangle(f)))
        .min_by(f64::total_cmp)
}

fn quad(corners: [Point3<f64>; 4]) -> TriMesh {
    TriMesh::new(corners.to_vec(), vec![[0, 1, 2], [0, 2, 3]]).unwrap()
}

#[test]
fn half_cover_matches_ray_cast_oracle() {
    let cam = CameraModel::look_at(1000.0, 1080, 720, &Point3::new(0.3, -3.0, 0.8), &Point3::origin()).unwrap();
    let target = parcelforge::mesh::build_box_mesh(
        &parcelforge::OrientedBox3::axis_aligned(Point3::origin(), Vector3::new(0.3, 0.25, 0.2)).unwrap(),
    );
    // Vertical sheet halfway to the camera whose edge splits the view of
    // the target.
    let sheet = quad([
        Point3::new(-2.0, -1.5, -2.0),
        Point3::new(0.15, -1.5, -2.0),
        Point3::new(0.15, -1.5, 2.0),
        Point3::new(-2.0, -1.5, 2.0),
    ]);
    let got = occlusion_fraction(&cam, &target, std::slice::from_ref(&sheet), 256).unwrap();

    let region = projected_extent(&cam, &target).unwrap();
    let n = 1024;
    let eye = cam.center();
    let (mut own, mut lost) = (0usize, 0usize);
    for j in 0..n {
        for i in 0..n {
            let u = region.x_min + (i as f64 + 0.5) * region.width() / n as f64;
            let v = region.y_min + (j as f64 + 0.5) * region.height() / n as f64;
            let dir = cam.pixel_ray(u, v);
            if let Some(t) = nearest_hit(&eye, &dir, &target) {
                own += 1;
                if nearest_hit(&eye, &dir, &sheet).is_some_and(|s| s < t) {
                    lost += 1;
                }
            }
        }
    }
    let want = lost as f64 / own as f64;
    assert!(
        (0.2..0.8).contains(&want),
        "fixture should cover part of the target: {want}"
    );
    assert!((got - want).abs() < 0.02, "{got} vs oracle {want}");
}

#[test]
fn sphere_is_not_pick_at_high_sample_count() {
    let s = cuboid_similarity(&icosphere(1.0, 4), 100_000, 3).unwrap();
    assert_ne!(classify_model(&s), ModelClass::Pick, "{s:?}");
}
