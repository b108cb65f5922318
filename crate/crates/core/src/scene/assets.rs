use std::f64::consts::TAU;

use nalgebra::{Point3, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::compose::{Asset, AssetKind, AssetPool};
use crate::error::{Error, Result};
use crate::mesh::{self, OrientedBox3, TriMesh};
use crate::seed;
use crate::select::{
    classify_models, sample_scale_variants, ClassificationReport, ModelClass, ModelMeta, ScaleDistribution,
    SelectionThresholds, DEFAULT_VARIANTS,
};
use crate::sim::{generate_damage, SimParams, SimRanges, SmoothingParams, VolumeBand};

/// Settings for turning raw models into placeable assets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoolConfig {
    pub similarity_samples: usize,
    pub thresholds: SelectionThresholds,
    pub variants_per_model: usize,
    pub scale: ScaleDistribution,
    pub damaged_per_model: usize,
    /// Drops tried per damaged asset before giving up on it.
    pub drop_attempts: usize,
    /// Parcels are refined until they have at least this many vertices
    /// before simulation.
    pub min_sim_vertices: usize,
    pub sim: SimParams,
    pub sim_ranges: SimRanges,
    pub volume_band: VolumeBand,
    pub smoothing: SmoothingParams,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            similarity_samples: 10_000,
            thresholds: SelectionThresholds::default(),
            variants_per_model: DEFAULT_VARIANTS,
            scale: ScaleDistribution::default(),
            damaged_per_model: 1,
            drop_attempts: 12,
            min_sim_vertices: 300,
            sim: SimParams::default(),
            sim_ranges: SimRanges::default(),
            volume_band: VolumeBand::default(),
            smoothing: SmoothingParams::default(),
        }
    }
}

pub fn asset_mesh_path(id: &str) -> String {
    format!("assets/{id}.obj")
}

fn refine_for_sim(mesh: &TriMesh, min_vertices: usize) -> Result<TriMesh> {
    let mut m = mesh.clone();
    for _ in 0..4 {
        if m.vertex_count() >= min_vertices {
            break;
        }
        m = mesh::subdivide(&m, 1)?;
    }
    Ok(m)
}

/// Drops `mesh` with sampled parameters until a frame lands in the damage
/// band; returns the smoothed deformed mesh in the model frame and its
/// impact face.
fn simulate_damaged(mesh: &TriMesh, cfg: &PoolConfig, seed: u64) -> Result<Option<(TriMesh, mesh::BoxFace)>> {
    let sim_mesh = refine_for_sim(mesh, cfg.min_sim_vertices)?;
    for attempt in 0..cfg.drop_attempts {
        let s = seed::derive_index(seed, attempt as u64);
        let params = cfg.sim_ranges.sample(&cfg.sim, s);
        let run = match generate_damage(&sim_mesh, &params, &cfg.volume_band, &cfg.smoothing) {
            Ok(r) => r,
            Err(Error::UnstableStep) => continue,
            Err(e) => return Err(e),
        };
        if run.records.is_empty() {
            continue;
        }
        let k = seed::rng(s).random_range(0..run.records.len());
        let rec = &run.records[k];
        return Ok(Some((rec.deformed_in_model_frame(), rec.impact_face)));
    }
    Ok(None)
}

/// Classifies `models` and expands them into an asset pool: picked parcels
/// become scaled intact variants and simulated damaged versions, distractor
/// models are used as they are, and the rest is dropped.
pub fn build_pool(
    models: &[(ModelMeta, TriMesh)],
    cfg: &PoolConfig,
    seed: u64,
) -> Result<(ClassificationReport, AssetPool)> {
    let report = classify_models(
        models,
        cfg.similarity_samples,
        &cfg.thresholds,
        seed::derive(seed, "classify"),
    )?;
    let mut pool = AssetPool::default();
    let picked: Vec<(&ModelMeta, &TriMesh)> = models
        .iter()
        .zip(&report.models)
        .filter(|(_, c)| c.class == ModelClass::Pick)
        .map(|((m, mesh), _)| (m, mesh))
        .collect();

    let expanded = picked
        .par_iter()
        .map(|(meta, mesh)| {
            let variants = sample_scale_variants(
                mesh,
                cfg.variants_per_model,
                &cfg.scale,
                seed::derive(seed::derive(seed, "variants"), &meta.id),
            )?;
            let intact: Vec<Asset> = variants
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    let id = format!("{}_v{k:02}", meta.id);
                    Asset {
                        mesh_path: asset_mesh_path(&id),
                        id,
                        base_id: meta.id.clone(),
                        group_id: meta.group_id.clone(),
                        kind: AssetKind::Intact,
                        mesh: v.mesh.clone(),
                        impact_face: None,
                    }
                })
                .collect();
            let mut damaged = Vec::new();
            let dseed = seed::derive(seed::derive(seed, "damage"), &meta.id);
            for j in 0..cfg.damaged_per_model {
                let s = seed::derive_index(dseed, j as u64);
                let base = &variants[seed::rng(s).random_range(0..variants.len())];
                if let Some((mesh, face)) = simulate_damaged(&base.mesh, cfg, s)? {
                    let id = format!("{}_d{j:02}", meta.id);
                    damaged.push(Asset {
                        mesh_path: asset_mesh_path(&id),
                        id,
                        base_id: meta.id.clone(),
                        group_id: meta.group_id.clone(),
                        kind: AssetKind::Damaged,
                        mesh,
                        impact_face: Some(face),
                    });
                }
            }
            Ok((intact, damaged))
        })
        .collect::<Result<Vec<_>>>()?;
    for (intact, damaged) in expanded {
        pool.intact.extend(intact);
        pool.damaged.extend(damaged);
    }
    for ((meta, mesh), c) in models.iter().zip(&report.models) {
        if c.class == ModelClass::Distractor {
            pool.distractors.push(Asset {
                mesh_path: asset_mesh_path(&meta.id),
                id: meta.id.clone(),
                base_id: meta.id.clone(),
                group_id: meta.group_id.clone(),
                kind: AssetKind::Distractor,
                mesh: mesh.clone(),
                impact_face: None,
            });
        }
    }
    Ok((report, pool))
}

/// Double pyramid over a regular `segments`-gon of circumradius `radius`,
/// apices at `±half_height`.
fn bipyramid(radius: f64, half_height: f64, segments: usize) -> TriMesh {
    let n = segments.max(3);
    let mut vertices: Vec<Point3<f64>> = (0..n)
        .map(|i| {
            let a = TAU * i as f64 / n as f64;
            Point3::new(radius * a.cos(), radius * a.sin(), 0.0)
        })
        .collect();
    vertices.push(Point3::new(0.0, 0.0, half_height));
    vertices.push(Point3::new(0.0, 0.0, -half_height));
    let mut faces = Vec::with_capacity(2 * n);
    for i in 0..n {
        let j = (i + 1) % n;
        faces.push([i, j, n]);
        faces.push([j, i, n + 1]);
    }
    TriMesh::new(vertices, faces).expect("bipyramid topology is valid")
}

/// Procedural stand-in for a scanned model collection: boxes of assorted
/// proportions spread over `groups` brand/category groups, plus bipyramid
/// distractors. Sizes are in meters.
pub fn synthetic_models(
    parcels: usize,
    distractors: usize,
    groups: usize,
    seed: u64,
) -> Result<Vec<(ModelMeta, TriMesh)>> {
    let mut rng = seed::rng(seed);
    let groups = groups.max(1);
    let mut out = Vec::with_capacity(parcels + distractors);
    for i in 0..parcels {
        let h = Vector3::new(
            rng.random_range(0.10..0.25),
            rng.random_range(0.08..0.20),
            rng.random_range(0.05..0.15),
        );
        let b = OrientedBox3::axis_aligned(Point3::origin(), h)?;
        let meta = ModelMeta::new(format!("parcel_{i:03}"), "synthetic", format!("box {}", i % groups));
        out.push((meta, mesh::build_box_mesh(&b)));
    }
    for i in 0..distractors {
        // Bipyramids: every face is tilted against all box normals, so they
        // score far from a cuboid.
        let segments = [4, 5, 6, 8][i % 4];
        let r = rng.random_range(0.05..0.15);
        let h = r * rng.random_range(0.6..1.4);
        let meta = ModelMeta::new(
            format!("distractor_{i:03}"),
            "synthetic",
            format!("bipyramid {segments}"),
        );
        out.push((meta, bipyramid(r, h, segments)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_models_classify_as_intended() {
        let models = synthetic_models(4, 4, 2, 1).unwrap();
        let cfg = PoolConfig {
            variants_per_model: 2,
            damaged_per_model: 0,
            ..PoolConfig::default()
        };
        let (report, pool) = build_pool(&models, &cfg, 1).unwrap();
        assert_eq!(report.ids_of(ModelClass::Pick).count(), 4);
        assert_eq!(pool.intact.len(), 8);
        assert!(pool.distractors.iter().all(|d| d.id.starts_with("distractor")));
        assert_eq!(pool.distractors.len(), 4);
        assert!(pool.distractors.iter().all(|d| d.mesh.is_watertight()));
    }
}
