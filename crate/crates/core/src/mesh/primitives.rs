use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use super::TriMesh;

/// Geodesic sphere built by midpoint-subdividing an icosahedron and
/// projecting every vertex onto the sphere.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let mut vertices: Vec<Point3<f64>> = raw
        .iter()
        .map(|v| Point3::from(Vector3::from(*v).normalize()))
        .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point3<f64>>| {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let m = (vertices[a].coords + vertices[b].coords).normalize();
                vertices.push(Point3::from(m));
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices = vertices.into_iter().map(|p| Point3::from(p.coords * radius)).collect();
    TriMesh::new(vertices, faces).expect("icosphere topology is valid")
}

/// Closed cylinder along z centered at the origin, with fan-triangulated caps.
pub fn cylinder(radius: f64, height: f64, segments: usize) -> TriMesh {
    let n = segments.max(3);
    let h = height / 2.0;
    let mut vertices = Vec::with_capacity(2 * n + 2);
    for z in [-h, h] {
        for i in 0..n {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            vertices.push(Point3::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    let bottom = vertices.len();
    vertices.push(Point3::new(0.0, 0.0, -h));
    let top = vertices.len();
    vertices.push(Point3::new(0.0, 0.0, h));
    let mut faces = Vec::with_capacity(4 * n);
    for i in 0..n {
        let j = (i + 1) % n;
        faces.push([i, j, n + j]);
        faces.push([i, n + j, n + i]);
        faces.push([bottom, j, i]);
        faces.push([top, n + i, n + j]);
    }
    TriMesh::new(vertices, faces).expect("cylinder topology is valid")
}
