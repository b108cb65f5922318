//! Cuboid-resemblance model selection, metadata grouping and scaled
//! variant generation.

use std::collections::HashMap;
use std::io::Read;

use nalgebra::{Point3, Vector3};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{self, TriMesh, UniformTransform};
use crate::metrics::{self, SimilarityScore};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelClass {
    /// Close to a cuboid; used as parcel targets.
    Pick,
    /// Cuboid-like but not close enough; excluded from both roles.
    Rem,
    Distractor,
}

/// Inclusive thresholds on (Chamfer, normal consistency).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionThresholds {
    pub pick_max_chamfer: f64,
    pub pick_min_normal: f64,
    pub rem_max_chamfer: f64,
    pub rem_min_normal: f64,
}

impl Default for SelectionThresholds {
    fn default() -> Self {
        Self {
            pick_max_chamfer: 0.1,
            pick_min_normal: 0.9,
            rem_max_chamfer: 0.5,
            rem_min_normal: 0.8,
        }
    }
}

impl SelectionThresholds {
    pub fn classify(&self, score: &SimilarityScore) -> ModelClass {
        if score.d_cham <= self.pick_max_chamfer && score.c_norm >= self.pick_min_normal {
            ModelClass::Pick
        } else if score.d_cham <= self.rem_max_chamfer && score.c_norm >= self.rem_min_normal {
            ModelClass::Rem
        } else {
            ModelClass::Distractor
        }
    }
}

/// Classification under the default thresholds.
pub fn classify_model(score: &SimilarityScore) -> ModelClass {
    SelectionThresholds::default().classify(score)
}

/// Similarity between a mesh and its axis-aligned bounding cuboid.
///
/// Both shapes are scaled by the inverse of the cuboid's longest edge before
/// sampling, which makes the score independent of the asset's units. The two
/// shapes are sampled with the same random stream.
pub fn cuboid_similarity(mesh: &TriMesh, samples: usize, seed: u64) -> Result<SimilarityScore> {
    mesh.ensure_watertight()?;
    let bbox = mesh::aabb(mesh)?;
    let template = mesh::build_box_mesh(&bbox);
    let scale = 1.0 / bbox.extents().max();
    let norm = UniformTransform {
        scale,
        translation: -bbox.center.coords * scale,
    };
    let a = mesh::surface_sample(&norm.apply_mesh(mesh), samples, seed)?;
    let b = mesh::surface_sample(&norm.apply_mesh(&template), samples, seed)?;
    Ok(metrics::compare_samples(&a, &b, &[])?.score())
}

/// Asset metadata; `group_id` is derived from brand and category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "MetaRow", into = "MetaRow")]
pub struct ModelMeta {
    pub id: String,
    pub brand: String,
    pub category: String,
    pub group_id: String,
}

#[derive(Serialize, Deserialize)]
struct MetaRow {
    id: String,
    brand: String,
    category: String,
}

impl From<MetaRow> for ModelMeta {
    fn from(r: MetaRow) -> Self {
        ModelMeta::new(r.id, r.brand, r.category)
    }
}

impl From<ModelMeta> for MetaRow {
    fn from(m: ModelMeta) -> Self {
        MetaRow {
            id: m.id,
            brand: m.brand,
            category: m.category,
        }
    }
}

impl ModelMeta {
    pub fn new(id: impl Into<String>, brand: impl Into<String>, category: impl Into<String>) -> Self {
        let brand = brand.into();
        let category = category.into();
        let group_id = format!("{}/{}", normalize_key(&brand), normalize_key(&category));
        Self {
            id: id.into(),
            brand,
            category,
            group_id,
        }
    }
}

/// Lowercase, trim, collapse internal whitespace.
pub fn normalize_key(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Reads a CSV table with `id`, `brand` and `category` columns (others are
/// ignored).
pub fn read_metadata_csv<R: Read>(reader: R) -> Result<Vec<ModelMeta>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<MetaRow>() {
        out.push(row?.into());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelGroup {
    pub group_id: String,
    pub members: Vec<ModelMeta>,
}

/// Partitions models by `group_id`. Groups appear in order of their first
/// member; members keep input order.
pub fn group_models(metas: &[ModelMeta]) -> Vec<ModelGroup> {
    let mut slot: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<ModelGroup> = Vec::new();
    for m in metas {
        let i = *slot.entry(m.group_id.as_str()).or_insert_with(|| {
            groups.push(ModelGroup {
                group_id: m.group_id.clone(),
                members: Vec::new(),
            });
            groups.len() - 1
        });
        groups[i].members.push(m.clone());
    }
    groups
}

/// Inverse CDF of the triangular distribution on `[lo, hi]` with the given
/// mode, evaluated at `u` in `[0, 1]`.
pub fn triangular_inverse_cdf(u: f64, lo: f64, mode: f64, hi: f64) -> f64 {
    let split = (mode - lo) / (hi - lo);
    if u < split {
        lo + (u * (hi - lo) * (mode - lo)).sqrt()
    } else {
        hi - ((1.0 - u) * (hi - lo) * (hi - mode)).sqrt()
    }
}

/// Per-axis scale distribution for intact variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScaleDistribution {
    pub lower: f64,
    pub mode: f64,
    pub upper: f64,
}

impl Default for ScaleDistribution {
    fn default() -> Self {
        Self {
            lower: 0.5,
            mode: 1.0,
            upper: 2.0,
        }
    }
}

impl ScaleDistribution {
    pub fn sample(&self, rng: &mut seed::Rng) -> f64 {
        triangular_inverse_cdf(rng.random::<f64>(), self.lower, self.mode, self.upper)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleVariant {
    pub factors: Vector3<f64>,
    pub mesh: TriMesh,
}

pub const DEFAULT_VARIANTS: usize = 10;

/// `k` copies of `mesh`, each scaled about the model origin by independent
/// per-axis factors.
pub fn sample_scale_variants(
    mesh: &TriMesh,
    k: usize,
    dist: &ScaleDistribution,
    seed: u64,
) -> Result<Vec<ScaleVariant>> {
    if k == 0 {
        return Err(Error::InvalidArgument("variant count must be at least 1".into()));
    }
    let mut rng = seed::rng(seed);
    Ok((0..k)
        .map(|_| {
            let factors = Vector3::new(dist.sample(&mut rng), dist.sample(&mut rng), dist.sample(&mut rng));
            let mesh = mesh.map_vertices(|p| Point3::from(p.coords.component_mul(&factors)));
            ScaleVariant { factors, mesh }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedModel {
    pub id: String,
    pub brand: String,
    pub category: String,
    pub group_id: String,
    pub d_cham: f64,
    pub c_norm: f64,
    pub class: ModelClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub samples: usize,
    pub thresholds: SelectionThresholds,
    pub models: Vec<ClassifiedModel>,
}

impl ClassificationReport {
    pub fn ids_of(&self, class: ModelClass) -> impl Iterator<Item = &str> {
        self.models
            .iter()
            .filter(move |m| m.class == class)
            .map(|m| m.id.as_str())
    }
}

/// Scores and classifies every model. Each model draws from its own RNG
/// stream keyed by id, so the result does not depend on thread count.
pub fn classify_models(
    models: &[(ModelMeta, TriMesh)],
    samples: usize,
    thresholds: &SelectionThresholds,
    seed: u64,
) -> Result<ClassificationReport> {
    let models = models
        .par_iter()
        .map(|(meta, mesh)| {
            let score = cuboid_similarity(mesh, samples, seed::derive(seed, &meta.id))?;
            Ok(ClassifiedModel {
                id: meta.id.clone(),
                brand: meta.brand.clone(),
                category: meta.category.clone(),
                group_id: meta.group_id.clone(),
                d_cham: score.d_cham,
                c_norm: score.c_norm,
                class: thresholds.classify(&score),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassificationReport {
        samples,
        thresholds: *thresholds,
        models,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_box_mesh, icosphere, OrientedBox3};

    fn score(d: f64, c: f64) -> SimilarityScore {
        SimilarityScore { d_cham: d, c_norm: c }
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(classify_model(&score(0.05, 0.95)), ModelClass::Pick);
        assert_eq!(classify_model(&score(0.30, 0.85)), ModelClass::Rem);
        assert_eq!(classify_model(&score(0.60, 0.95)), ModelClass::Distractor);
        assert_eq!(classify_model(&score(0.1, 0.9)), ModelClass::Pick);
        assert_eq!(classify_model(&score(0.5, 0.8)), ModelClass::Rem);
        assert_eq!(classify_model(&score(0.05, 0.85)), ModelClass::Rem);
        assert_eq!(classify_model(&score(0.05, 0.7)), ModelClass::Distractor);
    }

    #[test]
    fn box_is_picked() {
        let b = OrientedBox3::axis_aligned(Point3::new(0.1, 0.0, 0.2), Vector3::new(0.2, 0.1, 0.15)).unwrap();
        let s = cuboid_similarity(&build_box_mesh(&b), 4000, 1).unwrap();
        assert!(s.d_cham < 1e-3, "{s:?}");
        assert!(s.c_norm > 0.999, "{s:?}");
        assert_eq!(classify_model(&s), ModelClass::Pick);
    }

    #[test]
    fn sphere_is_not_picked() {
        let s = cuboid_similarity(&icosphere(1.0, 3), 4000, 1).unwrap();
        assert_ne!(classify_model(&s), ModelClass::Pick, "{s:?}");
    }

    #[test]
    fn similarity_is_stable_across_seeds() {
        let sphere = icosphere(1.0, 3);
        let a = cuboid_similarity(&sphere, 10_000, 1).unwrap();
        let b = cuboid_similarity(&sphere, 10_000, 2).unwrap();
        assert!((a.d_cham - b.d_cham).abs() / a.d_cham < 0.01, "{a:?} {b:?}");
        assert!((a.c_norm - b.c_norm).abs() / a.c_norm < 0.01, "{a:?} {b:?}");
    }

    #[test]
    fn grouping() {
        let metas = vec![
            ModelMeta::new("a", "Pepsi", "Carton"),
            ModelMeta::new("b", "pepsi ", "carton"),
            ModelMeta::new("c", "Acme", "Shoe  Box"),
            ModelMeta::new("d", "PEPSI", "Carton"),
            ModelMeta::new("e", "acme", "shoe box"),
            ModelMeta::new("f", "Pepsi", "carton"),
        ];
        let g = group_models(&metas);
        assert_eq!(g.len(), 2);
        assert_eq!(
            g[0].members.iter().map(|m| m.id.as_str()).collect::<Vec<_>>(),
            ["a", "b", "d", "f"]
        );
        assert_eq!(g[1].group_id, "acme/shoe box");
        assert!(group_models(&[]).is_empty());
    }

    #[test]
    fn grouping_many() {
        let metas: Vec<_> = (0..209)
            .map(|i| ModelMeta::new(format!("m{i}"), format!("brand{}", i % 66), "box"))
            .collect();
        let g = group_models(&metas);
        assert_eq!(g.len(), 66);
        assert_eq!(g.iter().map(|g| g.members.len()).sum::<usize>(), 209);
    }

    #[test]
    fn metadata_csv() {
        let csv = "id,brand,category,extra\nm1, Pepsi ,Carton,x\nm2,pepsi,carton,y\n";
        let metas = read_metadata_csv(csv.as_bytes()).unwrap();
        assert_eq!(metas.len(), 2);
        assert_eq!(metas[0].group_id, metas[1].group_id);
    }

    #[test]
    fn variants() {
        let m = build_box_mesh(&OrientedBox3::axis_aligned(Point3::origin(), Vector3::repeat(0.5)).unwrap());
        let v = sample_scale_variants(&m, DEFAULT_VARIANTS, &ScaleDistribution::default(), 3).unwrap();
        assert_eq!(v.len(), 10);
        for var in &v {
            assert!(var.factors.iter().all(|&f| (0.5..=2.0).contains(&f)));
            assert!(var.mesh.is_watertight());
            assert_eq!(var.mesh.euler_characteristic(), 2);
            let vol = mesh::mesh_volume(&var.mesh).unwrap();
            assert!((vol - var.factors.product()).abs() < 1e-12);
        }
        assert_eq!(
            v,
            sample_scale_variants(&m, 10, &ScaleDistribution::default(), 3).unwrap()
        );
        assert!(sample_scale_variants(&m, 0, &ScaleDistribution::default(), 3).is_err());
    }

    #[test]
    fn triangular_moments() {
        let d = ScaleDistribution::default();
        let mut rng = seed::rng(17);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        assert!(draws.iter().all(|&x| (0.5..=2.0).contains(&x)));
        let mean = draws.iter().sum::<f64>() / n as f64;
        let expected = (0.5 + 1.0 + 2.0) / 3.0;
        assert!((mean - expected).abs() / expected < 0.02);
        assert_eq!(triangular_inverse_cdf(0.0, 0.5, 1.0, 2.0), 0.5);
        assert_eq!(triangular_inverse_cdf(1.0, 0.5, 1.0, 2.0), 2.0);
        assert!((triangular_inverse_cdf(1.0 / 3.0, 0.5, 1.0, 2.0) - 1.0).abs() < 1e-12);
    }
}
