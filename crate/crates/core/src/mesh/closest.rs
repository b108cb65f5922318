//! Exact closest-point queries against a triangle mesh surface.

use nalgebra::{Point3, Vector3};

use super::TriMesh;

const LEAF: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    lo: Point3<f64>,
    hi: Point3<f64>,
    /// Leaf: range into `order`. Inner: children indices.
    start: usize,
    end: usize,
    children: Option<[usize; 2]>,
}

/// Bounding-volume hierarchy over the triangles of a mesh.
#[derive(Debug, Clone)]
pub struct SurfaceIndex {
    tris: Vec<[Point3<f64>; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl SurfaceIndex {
    pub fn new(mesh: &TriMesh) -> Self {
        let tris: Vec<[Point3<f64>; 3]> = (0..mesh.face_count()).map(|f| mesh.triangle(f)).collect();
        let mut order: Vec<usize> = (0..tris.len()).collect();
        let mut nodes = Vec::new();
        if !tris.is_empty() {
            build(&tris, &mut order, 0, tris.len(), &mut nodes);
        }
        Self { tris, order, nodes }
    }

    /// Closest surface point to `p` and its distance.
    pub fn closest(&self, p: &Point3<f64>) -> Option<(Point3<f64>, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (Point3::origin(), f64::INFINITY);
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if box_dist_sq(&node.lo, &node.hi, p) >= best.1 {
                continue;
            }
            match node.children {
                Some([a, b]) => {
                    let da = box_dist_sq(&self.nodes[a].lo, &self.nodes[a].hi, p);
                    let db = box_dist_sq(&self.nodes[b].lo, &self.nodes[b].hi, p);
                    // Visit the nearer child first.
                    if da <= db {
                        stack.push(b);
                        stack.push(a);
                    } else {
                        stack.push(a);
                        stack.push(b);
                    }
                }
                None => {
                    for &t in &self.order[node.start..node.end] {
                        let q = closest_on_triangle(p, &self.tris[t]);
                        let d = (q - p).norm_squared();
                        if d < best.1 {
                            best = (q, d);
                        }
                    }
                }
            }
        }
        Some((best.0, best.1.sqrt()))
    }

    pub fn distance(&self, p: &Point3<f64>) -> Option<f64> {
        self.closest(p).map(|(_, d)| d)
    }
}

fn build(tris: &[[Point3<f64>; 3]], order: &mut [usize], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
    let mut lo = Point3::from(Vector3::repeat(f64::INFINITY));
    let mut hi = Point3::from(Vector3::repeat(f64::NEG_INFINITY));
    for &t in &order[start..end] {
        for v in &tris[t] {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
    }
    let id = nodes.len();
    nodes.push(Node {
        lo,
        hi,
        start,
        end,
        children: None,
    });
    if end - start <= LEAF {
        return id;
    }
    let axis = (hi - lo).imax();
    let key = |t: usize| tris[t][0][axis] + tris[t][1][axis] + tris[t][2][axis];
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
    let a = build(tris, order, start, mid, nodes);
    let b = build(tris, order, mid, end, nodes);
    nodes[id].children = Some([a, b]);
    id
}

fn box_dist_sq(lo: &Point3<f64>, hi: &Point3<f64>, p: &Point3<f64>) -> f64 {
    (0..3)
        .map(|a| {
            let d = (lo[a] - p[a]).max(0.0).max(p[a] - hi[a]);
            d * d
        })
        .sum()
}

/// Closest point on triangle `t` to `p` (Voronoi-region walk).
pub fn closest_on_triangle(p: &Point3<f64>, t: &[Point3<f64>; 3]) -> Point3<f64> {
    let [a, b, c] = *t;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}
