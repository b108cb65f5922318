//! Point-set and box similarity metrics.
//!
//! Chamfer distance uses squared Euclidean distances summed over both
//! directions. Normal consistency uses the absolute cosine so that flipped
//! normals are not penalized. A point counts as "within tau" for F1 when its
//! nearest-neighbor distance is strictly below tau.

mod iou;
mod kdtree;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::SurfaceSamples;

pub use iou::{intersection_volume, iou2d, iou3d, Rect2};
pub use kdtree::{Neighbor, SpatialIndex};

/// Default number of surface samples drawn per mesh for metric evaluation.
pub const DEFAULT_SAMPLES: usize = 10_000;

/// Chamfer distance and normal consistency between two shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub d_cham: f64,
    pub c_norm: f64,
}

/// All cloud metrics from a single pair of nearest-neighbor passes.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudComparison {
    pub chamfer: f64,
    pub normal_consistency: f64,
    /// `(tau, f1)` for each requested threshold.
    pub f1: Vec<(f64, f64)>,
}

impl CloudComparison {
    pub fn score(&self) -> SimilarityScore {
        SimilarityScore {
            d_cham: self.chamfer,
            c_norm: self.normal_consistency,
        }
    }
}

struct Pass {
    dist_sq: Vec<f64>,
    abs_cos: Vec<f64>,
}

fn nearest_pass(from: &SurfaceSamples, to: &SpatialIndex) -> Pass {
    let mut dist_sq = Vec::with_capacity(from.len());
    let mut abs_cos = Vec::with_capacity(from.len());
    for (p, n) in from.points.iter().zip(&from.normals) {
        let nb = to.nearest(p).expect("non-empty index");
        dist_sq.push(nb.dist_sq);
        abs_cos.push(to.normal(nb.index).map_or(0.0, |m| n.dot(m).abs()));
    }
    Pass { dist_sq, abs_cos }
}

fn nearest_dists(from: &[Point3<f64>], to: &SpatialIndex) -> Vec<f64> {
    from.iter()
        .map(|p| to.nearest(p).expect("non-empty index").dist_sq)
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn f1_from(p_to_q: &[f64], q_to_p: &[f64], tau: f64) -> f64 {
    let tau_sq = tau * tau;
    let frac = |d: &[f64]| d.iter().filter(|&&x| x < tau_sq).count() as f64 / d.len() as f64;
    let precision = frac(p_to_q);
    let recall = frac(q_to_p);
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn check_nonempty(p: usize, q: usize) -> Result<()> {
    if p == 0 || q == 0 {
        Err(Error::EmptySet)
    } else {
        Ok(())
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")))
    }
}

/// Mean squared nearest-neighbor distance from `p` to `q` plus the same
/// term from `q` to `p`.
pub fn chamfer_distance(p: &[Point3<f64>], q: &[Point3<f64>]) -> Result<f64> {
    check_nonempty(p.len(), q.len())?;
    let pi = SpatialIndex::new(p.to_vec());
    let qi = SpatialIndex::new(q.to_vec());
    Ok(mean(&nearest_dists(p, &qi)) + mean(&nearest_dists(q, &pi)))
}

/// Average of the two directional means of `|n_p . n_nn(p)|`.
pub fn normal_consistency(p: &SurfaceSamples, q: &SurfaceSamples) -> Result<f64> {
    check_nonempty(p.len(), q.len())?;
    let pi = SpatialIndex::with_normals(p.points.clone(), p.normals.clone());
    let qi = SpatialIndex::with_normals(q.points.clone(), q.normals.clone());
    let a = nearest_pass(p, &qi);
    let b = nearest_pass(q, &pi);
    Ok(0.5 * (mean(&a.abs_cos) + mean(&b.abs_cos)))
}

/// Harmonic mean of precision (share of `p` within `tau` of `q`) and recall
/// (share of `q` within `tau` of `p`); zero when both are zero.
pub fn f1_at_tau(p: &[Point3<f64>], q: &[Point3<f64>], tau: f64) -> Result<f64> {
    check_nonempty(p.len(), q.len())?;
    check_tau(tau)?;
    let pi = SpatialIndex::new(p.to_vec());
    let qi = SpatialIndex::new(q.to_vec());
    Ok(f1_from(&nearest_dists(p, &qi), &nearest_dists(q, &pi), tau))
}

/// Chamfer, normal consistency and F1 at each threshold in `taus`.
pub fn compare_samples(p: &SurfaceSamples, q: &SurfaceSamples, taus: &[f64]) -> Result<CloudComparison> {
    check_nonempty(p.len(), q.len())?;
    for &t in taus {
        check_tau(t)?;
    }
    let pi = SpatialIndex::with_normals(p.points.clone(), p.normals.clone());
    let qi = SpatialIndex::with_normals(q.points.clone(), q.normals.clone());
    let a = nearest_pass(p, &qi);
    let b = nearest_pass(q, &pi);
    Ok(CloudComparison {
        chamfer: mean(&a.dist_sq) + mean(&b.dist_sq),
        normal_consistency: 0.5 * (mean(&a.abs_cos) + mean(&b.abs_cos)),
        f1: taus.iter().map(|&t| (t, f1_from(&a.dist_sq, &b.dist_sq, t))).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn cloud(points: &[[f64; 3]], normal: [f64; 3]) -> SurfaceSamples {
        SurfaceSamples {
            points: points.iter().map(|&p| p.into()).collect(),
            normals: vec![Vector3::from(normal); points.len()],
        }
    }

    #[test]
    fn chamfer_examples() {
        let p = [Point3::origin()];
        let q = [Point3::new(1.0, 0.0, 0.0)];
        assert_eq!(chamfer_distance(&p, &q).unwrap(), 2.0);
        assert_eq!(chamfer_distance(&p, &p).unwrap(), 0.0);
        assert!(matches!(chamfer_distance(&p, &[]), Err(Error::EmptySet)));
    }

    #[test]
    fn normal_consistency_examples() {
        let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 1.0]];
        let a = cloud(&pts, [0.0, 0.0, 1.0]);
        assert_eq!(normal_consistency(&a, &a).unwrap(), 1.0);
        let b = cloud(&pts, [1.0, 0.0, 0.0]);
        assert_eq!(normal_consistency(&a, &b).unwrap(), 0.0);
        let flipped = cloud(&pts, [0.0, 0.0, -1.0]);
        assert_eq!(normal_consistency(&a, &flipped).unwrap(), 1.0);
    }

    #[test]
    fn f1_examples() {
        let tau = 0.1;
        let p: Vec<Point3<f64>> = (0..10).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        assert_eq!(f1_at_tau(&p, &p, tau).unwrap(), 1.0);
        let far: Vec<Point3<f64>> = p.iter().map(|x| x + Vector3::new(0.0, 100.0 * tau, 0.0)).collect();
        assert_eq!(f1_at_tau(&p, &far, tau).unwrap(), 0.0);

        // Half of P sits on Q, the other half far away; every Q point has a
        // P point on top of it.
        let q: Vec<Point3<f64>> = p[..5].to_vec();
        let mut p_half = q.clone();
        p_half.extend((0..5).map(|i| Point3::new(i as f64, 50.0, 0.0)));
        assert!((f1_at_tau(&p_half, &q, tau).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(f1_at_tau(&p, &p, 0.0).is_err());
    }

    #[test]
    fn compare_agrees_with_individual_metrics() {
        let a = cloud(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.3, 0.2, 0.1]], [0.0, 0.6, 0.8]);
        let b = cloud(&[[0.1, 0.0, 0.0], [1.0, 0.5, 0.0]], [0.0, 0.0, 1.0]);
        let c = compare_samples(&a, &b, &[0.2, 0.6]).unwrap();
        assert_eq!(c.chamfer, chamfer_distance(&a.points, &b.points).unwrap());
        assert_eq!(c.normal_consistency, normal_consistency(&a, &b).unwrap());
        assert_eq!(c.f1[1].1, f1_at_tau(&a.points, &b.points, 0.6).unwrap());
    }
}
