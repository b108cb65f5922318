//! Shared fixtures for the criterion benchmarks.

use nalgebra::{Point3, Vector3};
use rand::Rng;

use parcelforge::seed;
use parcelforge::sim::uniform_rotation;
use parcelforge::OrientedBox3;

pub fn random_cloud(n: usize, seed: u64) -> Vec<Point3<f64>> {
    let mut rng = seed::rng(seed);
    (0..n)
        .map(|_| {
            Point3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
        })
        .collect()
}

/// Overlapping oriented boxes around the origin.
pub fn random_boxes(n: usize, seed: u64) -> Vec<OrientedBox3> {
    let mut rng = seed::rng(seed);
    (0..n)
        .map(|_| {
            let c = Point3::new(
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
            );
            let h = Vector3::new(
                rng.random_range(0.2..0.6),
                rng.random_range(0.2..0.6),
                rng.random_range(0.2..0.6),
            );
            let r = uniform_rotation(&mut rng).to_rotation_matrix();
            OrientedBox3::new(c, h, r).expect("positive extents")
        })
        .collect()
}
