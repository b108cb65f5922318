use nalgebra::{Point3, Vector3};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Result of a nearest-neighbor query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
}

/// Immutable 3-d tree over a point set, optionally carrying a normal per
/// point.
///
/// Queries are exact. Among points at the same distance the lowest index
/// wins, which makes results identical to a first-minimum linear scan.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Point3<f64>>,
    normals: Option<Vec<Vector3<f64>>>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl SpatialIndex {
    pub fn new(points: Vec<Point3<f64>>) -> Self {
        Self::build(points, None)
    }

    pub fn with_normals(points: Vec<Point3<f64>>, normals: Vec<Vector3<f64>>) -> Self {
        assert_eq!(points.len(), normals.len(), "one normal per point");
        Self::build(points, Some(normals))
    }

    fn build(points: Vec<Point3<f64>>, normals: Option<Vec<Vector3<f64>>>) -> Self {
        let mut index = Self {
            order: (0..points.len()).collect(),
            points,
            normals,
            nodes: Vec::new(),
        };
        if !index.points.is_empty() {
            index.build_node(0, index.points.len());
        }
        index
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for &i in &self.order[start..end] {
            lo = lo.inf(&self.points[i].coords);
            hi = hi.sup(&self.points[i].coords);
        }
        let axis = (hi - lo).imax();
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn normal(&self, index: usize) -> Option<&Vector3<f64>> {
        self.normals.as_ref().map(|n| &n[index])
    }

    /// Exact nearest neighbor, or `None` for an empty index.
    pub fn nearest(&self, q: &Point3<f64>) -> Option<Neighbor> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = Neighbor {
            index: usize::MAX,
            dist_sq: f64::INFINITY,
        };
        self.search(0, q, &mut best);
        Some(best)
    }

    fn search(&self, node: usize, q: &Point3<f64>, best: &mut Neighbor) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = (self.points[i] - q).norm_squared();
                    if d < best.dist_sq || (d == best.dist_sq && i < best.index) {
                        *best = Neighbor { index: i, dist_sq: d };
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                if diff * diff <= best.dist_sq {
                    self.search(far, q, best);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    fn linear_scan(points: &[Point3<f64>], q: &Point3<f64>) -> Neighbor {
        let mut best = Neighbor {
            index: 0,
            dist_sq: f64::INFINITY,
        };
        for (i, p) in points.iter().enumerate() {
            let d = (p - q).norm_squared();
            if d < best.dist_sq {
                best = Neighbor { index: i, dist_sq: d };
            }
        }
        best
    }

    #[test]
    fn matches_linear_scan_on_random_queries() {
        let mut rng = seed::rng(5);
        let pts: Vec<Point3<f64>> = (0..2000)
            .map(|_| Point3::new(rng.random(), rng.random::<f64>() * 3.0, rng.random::<f64>() - 0.5))
            .collect();
        let tree = SpatialIndex::new(pts.clone());
        for _ in 0..1000 {
            let q = Point3::new(
                rng.random::<f64>() * 1.4 - 0.2,
                rng.random::<f64>() * 3.4 - 0.2,
                rng.random::<f64>() - 0.5,
            );
            assert_eq!(tree.nearest(&q).unwrap(), linear_scan(&pts, &q));
        }
    }

    #[test]
    fn duplicate_points_resolve_to_lowest_index() {
        let pts = vec![Point3::new(1.0, 1.0, 1.0); 40];
        let tree = SpatialIndex::new(pts);
        assert_eq!(tree.nearest(&Point3::origin()).unwrap().index, 0);
    }

    #[test]
    fn lattice_ties_match_scan() {
        let mut pts = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                for k in 0..6 {
                    pts.push(Point3::new(i as f64, j as f64, k as f64));
                }
            }
        }
        let tree = SpatialIndex::new(pts.clone());
        for q in [
            Point3::new(0.5, 0.5, 0.5),
            Point3::new(2.5, 3.0, 1.5),
            Point3::new(-1.0, 2.5, 7.0),
        ] {
            assert_eq!(tree.nearest(&q).unwrap(), linear_scan(&pts, &q));
        }
    }

    #[test]
    fn empty_index() {
        assert!(SpatialIndex::new(Vec::new()).nearest(&Point3::origin()).is_none());
    }
}
