use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::{Point3, Rotation3, Vector3};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::camera::{project_box_2d, sample_camera, CameraModel, CameraSampling};
use super::raster::{occlusion_fraction, DEFAULT_OCCLUSION_RESOLUTION};
use crate::error::{Error, Result};
use crate::mesh::{self, BoxFace, OrientedBox3, TriMesh};
use crate::metrics::Rect2;
use crate::registration::RigidTransform;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn label(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.15,
            test: 0.15,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config {
                field: "split".into(),
                reason: "fractions must lie in [0, 1]".into(),
            });
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config {
                field: "split".into(),
                reason: format!("fractions sum to {sum}, expected 1"),
            });
        }
        Ok(())
    }
}

/// Partitions distinct ids into train/val/test by a seeded shuffle. Train and
/// val sizes are the rounded fractions; test takes the remainder. Repeated
/// ids share one split. The result follows the input order.
pub fn assign_split(ids: &[String], fractions: &SplitFractions, seed: u64) -> Result<Vec<Split>> {
    fractions.validate()?;
    if ids.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut distinct: Vec<&String> = Vec::new();
    let mut seen = HashMap::new();
    for id in ids {
        seen.entry(id).or_insert_with(|| {
            distinct.push(id);
        });
    }
    let n = distinct.len();
    let n_train = ((n as f64) * fractions.train).round() as usize;
    let n_val = (((n as f64) * fractions.val).round() as usize).min(n - n_train.min(n));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let mut by_id = HashMap::with_capacity(n);
    for (rank, &k) in order.iter().enumerate() {
        let s = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
        by_id.insert(distinct[k], s);
    }
    Ok(ids.iter().map(|id| by_id[id]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssetKind {
    Intact,
    Damaged,
    Distractor,
}

/// A placeable model. `mesh` is in the model's canonical frame: for parcels
/// the frame in which the surrounding cuboid is axis aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct Asset {
    pub id: String,
    /// Original model this asset derives from; splits are assigned per base.
    pub base_id: String,
    pub group_id: String,
    pub kind: AssetKind,
    pub mesh_path: String,
    pub mesh: TriMesh,
    /// Damaged parcels only.
    pub impact_face: Option<BoxFace>,
}

impl Asset {
    pub fn canonical_box(&self) -> Result<OrientedBox3> {
        mesh::aabb(&self.mesh)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssetPool {
    pub intact: Vec<Asset>,
    pub damaged: Vec<Asset>,
    pub distractors: Vec<Asset>,
}

impl AssetPool {
    pub fn all(&self) -> impl Iterator<Item = &Asset> {
        self.intact.iter().chain(&self.damaged).chain(&self.distractors)
    }

    /// Split per base id: parcels (intact and damaged share bases) and
    /// distractors are partitioned separately so each keeps the proportions.
    pub fn assign_splits(&self, fractions: &SplitFractions, seed: u64) -> Result<BTreeMap<String, Split>> {
        let mut out = BTreeMap::new();
        let parcels: Vec<String> = self
            .intact
            .iter()
            .chain(&self.damaged)
            .map(|a| a.base_id.clone())
            .collect();
        let distractors: Vec<String> = self.distractors.iter().map(|a| a.base_id.clone()).collect();
        for (ids, tag) in [(parcels, "parcels"), (distractors, "distractors")] {
            if ids.is_empty() {
                continue;
            }
            let tags = assign_split(&ids, fractions, seed::derive(seed, tag))?;
            out.extend(ids.into_iter().zip(tags));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabelConfig {
    /// Chance that the generated cardboard texture replaces the original.
    pub cardboard_probability: f64,
    pub shipping_label_probability: f64,
    /// Chance of carrying fragile labels at all.
    pub fragile_probability: f64,
    pub max_fragile_labels: u32,
    pub max_logos: u32,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            cardboard_probability: 0.6,
            shipping_label_probability: 0.6,
            fragile_probability: 0.4,
            max_fragile_labels: 2,
            max_logos: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub damaged_probability: f64,
    pub max_distractors: u32,
    pub max_occlusion: f64,
    pub max_retries: usize,
    pub occlusion_resolution: usize,
    pub camera: CameraSampling,
    pub labels: LabelConfig,
    pub split: SplitFractions,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            damaged_probability: 0.5,
            max_distractors: 3,
            max_occlusion: 0.30,
            max_retries: 100,
            occlusion_resolution: DEFAULT_OCCLUSION_RESOLUTION,
            camera: CameraSampling::default(),
            labels: LabelConfig::default(),
            split: SplitFractions::default(),
        }
    }
}

fn check_probability(field: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config {
            field: field.into(),
            reason: format!("probability {p} outside [0, 1]"),
        })
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        check_probability("damaged_probability", self.damaged_probability)?;
        check_probability("max_occlusion", self.max_occlusion)?;
        check_probability("labels.cardboard_probability", self.labels.cardboard_probability)?;
        check_probability(
            "labels.shipping_label_probability",
            self.labels.shipping_label_probability,
        )?;
        check_probability("labels.fragile_probability", self.labels.fragile_probability)?;
        if self.max_retries == 0 {
            return Err(Error::Config {
                field: "max_retries".into(),
                reason: "must be at least 1".into(),
            });
        }
        if self.occlusion_resolution == 0 {
            return Err(Error::Config {
                field: "occlusion_resolution".into(),
                reason: "must be at least 1".into(),
            });
        }
        self.camera.validate()?;
        self.split.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Shipping,
    Fragile,
    Logo,
}

/// Where a label or logo goes on the parcel. `u`, `v` are normalized face
/// coordinates of the label center; `scale` is relative to the face's
/// shorter side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelPlacement {
    pub kind: LabelKind,
    pub face: BoxFace,
    pub u: f64,
    pub v: f64,
    pub scale: f64,
    pub rotation_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistractorPlacement {
    pub object_id: String,
    pub mesh_path: String,
    /// Model frame to world.
    pub pose: RigidTransform,
    pub box3d: OrientedBox3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneAnnotation {
    pub scene_id: String,
    pub split: Split,
    pub is_damaged: bool,
    pub object_id: String,
    pub mesh_path: String,
    /// Model frame to world.
    pub pose: RigidTransform,
    /// Impact face in the model frame (damaged parcels only).
    pub impact_face: Option<BoxFace>,
    pub box3d: OrientedBox3,
    pub box2d: Rect2,
    pub camera: CameraModel,
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    pub occlusion: f64,
    pub distractors: Vec<DistractorPlacement>,
    pub cardboard_texture: bool,
    pub label_placements: Vec<LabelPlacement>,
    /// Composition attempts used, including the accepted one.
    pub attempts: usize,
}

impl SceneAnnotation {
    /// Outward azimuth (degrees) of the impact face in the world, for damaged
    /// scenes.
    pub fn impact_azimuth_deg(&self) -> Option<f64> {
        self.impact_face.map(|f| {
            let n = self.pose.rotation * f.local_normal();
            n.y.atan2(n.x).to_degrees().rem_euclid(360.0)
        })
    }
}

/// Model-to-world pose that rests `mesh` on the ground plane, centered over
/// `(x, y)` after `rotation`.
fn rest_on_ground(mesh: &TriMesh, rotation: Rotation3<f64>, x: f64, y: f64) -> Result<RigidTransform> {
    let posed: Vec<Point3<f64>> = mesh.vertices().iter().map(|p| rotation * p).collect();
    let (lo, hi) = mesh::bounds(&posed).ok_or(Error::EmptySet)?;
    let c = (lo.coords + hi.coords) / 2.0;
    Ok(RigidTransform::new(rotation, Vector3::new(x - c.x, y - c.y, -lo.z)))
}

/// Initial rotation that turns an impact on the top or bottom face toward
/// the side, so that the damage can face the camera.
fn resting_rotation(impact: Option<BoxFace>) -> Rotation3<f64> {
    match impact {
        Some(f) if f.axis() == 2 => Rotation3::from_axis_angle(&Vector3::x_axis(), FRAC_PI_2),
        _ => Rotation3::identity(),
    }
}

/// Picks an asset uniformly over groups, then uniformly within the group.
fn pick<'a>(assets: &[&'a Asset], rng: &mut seed::Rng) -> &'a Asset {
    let mut groups: BTreeMap<&str, Vec<&'a Asset>> = BTreeMap::new();
    for a in assets {
        groups.entry(a.group_id.as_str()).or_default().push(a);
    }
    let keys: Vec<&str> = groups.keys().copied().collect();
    let g = &groups[keys[rng.random_range(0..keys.len())]];
    g[rng.random_range(0..g.len())]
}

fn footprint_radius(b: &OrientedBox3) -> f64 {
    let c = b.corners();
    c.iter()
        .map(|p| ((p.x - b.center.x).powi(2) + (p.y - b.center.y).powi(2)).sqrt())
        .fold(0.0, f64::max)
}

fn sample_labels(cfg: &LabelConfig, rng: &mut seed::Rng) -> (bool, Vec<LabelPlacement>) {
    let cardboard = rng.random::<f64>() < cfg.cardboard_probability;
    let mut kinds = Vec::new();
    if rng.random::<f64>() < cfg.shipping_label_probability {
        kinds.push(LabelKind::Shipping);
    }
    if cfg.max_fragile_labels > 0 && rng.random::<f64>() < cfg.fragile_probability {
        let n = rng.random_range(1..=cfg.max_fragile_labels);
        kinds.extend(std::iter::repeat_n(LabelKind::Fragile, n as usize));
    }
    let logos = rng.random_range(0..=cfg.max_logos);
    kinds.extend(std::iter::repeat_n(LabelKind::Logo, logos as usize));
    // Labels never go on the face the parcel stands on.
    let faces = [
        BoxFace::PosX,
        BoxFace::NegX,
        BoxFace::PosY,
        BoxFace::NegY,
        BoxFace::PosZ,
    ];
    let placements = kinds
        .into_iter()
        .map(|kind| LabelPlacement {
            kind,
            face: faces[rng.random_range(0..faces.len())],
            u: rng.random_range(0.2..=0.8),
            v: rng.random_range(0.2..=0.8),
            scale: match kind {
                LabelKind::Shipping => rng.random_range(0.3..=0.5),
                _ => rng.random_range(0.1..=0.25),
            },
            rotation_deg: rng.random_range(0.0..360.0),
        })
        .collect();
    (cardboard, placements)
}

/// Composes one scene around a damaged or intact parcel from `pool`.
///
/// Each attempt re-draws the target pose, distractors and camera; the first
/// attempt whose target occlusion stays within budget is accepted.
/// Distractors come only from `split`; pass `None` to ignore splits.
pub fn compose_scene_with(
    pool: &AssetPool,
    cfg: &SceneConfig,
    is_damaged: bool,
    splits: Option<&BTreeMap<String, Split>>,
    scene_id: &str,
    seed: u64,
) -> Result<SceneAnnotation> {
    let mut rng = seed::rng(seed);
    let targets: Vec<&Asset> = if is_damaged { &pool.damaged } else { &pool.intact }.iter().collect();
    if targets.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no {} parcels in the asset pool",
            if is_damaged { "damaged" } else { "intact" }
        )));
    }
    let target = pick(&targets, &mut rng);
    let split = match splits {
        Some(s) => *s
            .get(&target.base_id)
            .ok_or_else(|| Error::InvalidArgument(format!("no split for asset base `{}`", target.base_id)))?,
        None => Split::Train,
    };
    let distractor_pool: Vec<&Asset> = pool
        .distractors
        .iter()
        .filter(|d| splits.is_none_or(|s| s.get(&d.base_id) == Some(&split)))
        .collect();
    let canonical = target.canonical_box()?;
    let (cardboard_texture, label_placements) = sample_labels(&cfg.labels, &mut rng);

    for attempt in 0..cfg.max_retries {
        let mut rng = seed::rng(seed::derive_index(seed, attempt as u64));
        let yaw = Rotation3::from_axis_angle(&Vector3::z_axis(), rng.random_range(0.0..TAU));
        let rotation = yaw * resting_rotation(target.impact_face);
        let pose = rest_on_ground(&target.mesh, rotation, 0.0, 0.0)?;
        let box3d = pose.apply_box(&canonical);
        let world_target = pose.apply_mesh(&target.mesh);
        let r_target = footprint_radius(&box3d);

        let n_distractors = if distractor_pool.is_empty() {
            0
        } else {
            rng.random_range(0..=cfg.max_distractors)
        };
        let mut distractors = Vec::new();
        let mut world_distractors = Vec::new();
        let mut circles: Vec<(f64, f64, f64)> = vec![(0.0, 0.0, r_target)];
        let mut placed_all = true;
        for _ in 0..n_distractors {
            let asset = pick(&distractor_pool, &mut rng);
            let yaw = Rotation3::from_axis_angle(&Vector3::z_axis(), rng.random_range(0.0..TAU));
            let local = asset.canonical_box()?;
            let probe = rest_on_ground(&asset.mesh, yaw, 0.0, 0.0)?;
            let r = footprint_radius(&probe.apply_box(&local));
            let mut placed = None;
            for _ in 0..20 {
                let dist = (r_target + r) * rng.random_range(1.05..=2.5);
                let ang = rng.random_range(0.0..TAU);
                let (x, y) = (dist * ang.cos(), dist * ang.sin());
                if circles
                    .iter()
                    .all(|&(cx, cy, cr)| ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() > cr + r)
                {
                    placed = Some((x, y));
                    break;
                }
            }
            let Some((x, y)) = placed else {
                placed_all = false;
                break;
            };
            circles.push((x, y, r));
            let pose = rest_on_ground(&asset.mesh, yaw, x, y)?;
            world_distractors.push(pose.apply_mesh(&asset.mesh));
            distractors.push(DistractorPlacement {
                object_id: asset.id.clone(),
                mesh_path: asset.mesh_path.clone(),
                box3d: pose.apply_box(&local),
                pose,
            });
        }
        if !placed_all {
            continue;
        }

        let face_azimuth = target.impact_face.map(|f| {
            let n = rotation * f.local_normal();
            n.y.atan2(n.x).to_degrees()
        });
        let cam = sample_camera(&cfg.camera, &box3d, face_azimuth, rng.random())?;
        let box2d = match project_box_2d(&cam.camera, &box3d) {
            Ok(r) if r.area() > 0.0 => r,
            _ => continue,
        };
        let occlusion = occlusion_fraction(&cam.camera, &world_target, &world_distractors, cfg.occlusion_resolution)?;
        if occlusion > cfg.max_occlusion {
            continue;
        }
        return Ok(SceneAnnotation {
            scene_id: scene_id.to_string(),
            split,
            is_damaged,
            object_id: target.id.clone(),
            mesh_path: target.mesh_path.clone(),
            pose,
            impact_face: target.impact_face,
            box3d,
            box2d,
            camera: cam.camera,
            elevation_deg: cam.elevation_deg,
            azimuth_deg: cam.azimuth_deg,
            occlusion,
            distractors,
            cardboard_texture,
            label_placements,
            attempts: attempt + 1,
        });
    }
    Err(Error::CompositionFailed(cfg.max_retries))
}

/// Composes one scene, drawing the damaged flag with
/// `cfg.damaged_probability`.
pub fn compose_scene(pool: &AssetPool, cfg: &SceneConfig, scene_id: &str, seed: u64) -> Result<SceneAnnotation> {
    let is_damaged = seed::rng(seed::derive(seed, "damaged")).random::<f64>() < cfg.damaged_probability;
    compose_scene_with(pool, cfg, is_damaged, None, scene_id, seed)
}

/// Exactly `round(count * p)` scenes are damaged; which ones is a seeded
/// shuffle, so each scene is damaged with probability close to `p` while
/// the dataset-level fraction carries no sampling noise.
pub fn damaged_assignment(count: usize, p: f64, seed: u64) -> Vec<bool> {
    let n_damaged = ((count as f64) * p).round() as usize;
    let mut flags: Vec<bool> = (0..count).map(|i| i < n_damaged).collect();
    flags.shuffle(&mut seed::rng(seed));
    flags
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetRecord {
    pub id: String,
    pub base_id: String,
    pub group_id: String,
    pub kind: AssetKind,
    pub mesh_path: String,
    pub split: Split,
    pub impact_face: Option<BoxFace>,
}

/// Generates `count` scenes. Output order and content depend only on the
/// inputs and `seed`, not on thread scheduling.
pub fn generate_scenes(
    pool: &AssetPool,
    cfg: &SceneConfig,
    count: usize,
    seed: u64,
) -> Result<(Vec<AssetRecord>, Vec<SceneAnnotation>)> {
    cfg.validate()?;
    let splits = pool.assign_splits(&cfg.split, seed::derive(seed, "split"))?;
    let flags = damaged_assignment(count, cfg.damaged_probability, seed::derive(seed, "damaged"));
    let scene_seed = seed::derive(seed, "scene");
    let scenes = flags
        .par_iter()
        .enumerate()
        .map(|(i, &dmg)| {
            compose_scene_with(
                pool,
                cfg,
                dmg,
                Some(&splits),
                &format!("scene_{i:06}"),
                seed::derive_index(scene_seed, i as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let assets = pool
        .all()
        .map(|a| AssetRecord {
            id: a.id.clone(),
            base_id: a.base_id.clone(),
            group_id: a.group_id.clone(),
            kind: a.kind,
            mesh_path: a.mesh_path.clone(),
            split: splits[&a.base_id],
            impact_face: a.impact_face,
        })
        .collect();
    Ok((assets, scenes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hundred_assets_split_70_15_15() {
        let ids: Vec<String> = (0..100).map(|i| format!("m{i}")).collect();
        let s = assign_split(&ids, &SplitFractions::default(), 1).unwrap();
        let count = |t| s.iter().filter(|&&x| x == t).count();
        assert_eq!(
            (count(Split::Train), count(Split::Val), count(Split::Test)),
            (70, 15, 15)
        );
        assert_eq!(s, assign_split(&ids, &SplitFractions::default(), 1).unwrap());
        assert_ne!(s, assign_split(&ids, &SplitFractions::default(), 2).unwrap());
    }

    #[test]
    fn repeated_ids_share_split() {
        let ids: Vec<String> = ["a", "b", "a", "c", "b"].iter().map(|s| s.to_string()).collect();
        let s = assign_split(&ids, &SplitFractions::default(), 3).unwrap();
        assert_eq!(s[0], s[2]);
        assert_eq!(s[1], s[4]);
    }

    #[test]
    fn bad_fractions_rejected() {
        let f = SplitFractions {
            train: 0.8,
            val: 0.15,
            test: 0.15,
        };
        let e = assign_split(&["a".to_string()], &f, 0).unwrap_err();
        assert!(e.to_string().contains("split"));
    }

    #[test]
    fn damaged_assignment_is_balanced() {
        let f = damaged_assignment(51, 0.5, 4);
        assert_eq!(f.iter().filter(|&&d| d).count(), 26);
        assert_eq!(f, damaged_assignment(51, 0.5, 4));
    }

    #[test]
    fn top_impact_turned_sideways() {
        for f in [BoxFace::PosZ, BoxFace::NegZ, BoxFace::PosX, BoxFace::NegY] {
            let n = resting_rotation(Some(f)) * f.local_normal();
            assert!(n.z.abs() < 1e-12);
        }
    }
}
