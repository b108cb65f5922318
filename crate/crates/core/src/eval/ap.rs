use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::cube::build_template_mesh;
use crate::error::{Error, Result};
use crate::mesh::{self, OrientedBox3, TriMesh};
use crate::metrics::{self, iou2d, iou3d, Rect2};

/// Recall levels at which the precision envelope is read.
pub const RECALL_POINTS: usize = 101;

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub scene_id: String,
    pub score: f64,
    pub box2d: Rect2,
    pub box3d: OrientedBox3,
    /// Falls back to the subdivided box template when absent.
    pub mesh: Option<TriMesh>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub scene_id: String,
    pub box2d: Rect2,
    pub box3d: OrientedBox3,
    pub mesh: Option<TriMesh>,
}

/// How mesh pairs are brought to a common scale before point metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Normalization {
    /// Scale both meshes by one factor so the ground truth's longest aabb
    /// edge has this length.
    GtLongestEdge { length: f64 },
    /// Center and scale each mesh into the unit cube on its own, then
    /// multiply both by `scale`.
    UnitCube { scale: f64 },
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization::GtLongestEdge { length: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshMetricParams {
    pub normalization: Normalization,
    pub samples: usize,
    pub tau: f64,
    pub seed: u64,
}

impl Default for MeshMetricParams {
    fn default() -> Self {
        Self {
            normalization: Normalization::default(),
            samples: metrics::DEFAULT_SAMPLES,
            tau: 0.3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshPairMetrics {
    pub f1: f64,
    pub chamfer: f64,
    pub normal_consistency: f64,
}

/// F1@tau, Chamfer and normal consistency between a predicted and a ground
/// truth mesh after normalization. Both meshes are sampled with the same
/// seed.
pub fn mesh_pair_metrics(pred: &TriMesh, gt: &TriMesh, params: &MeshMetricParams) -> Result<MeshPairMetrics> {
    let (p, g) = match params.normalization {
        Normalization::GtLongestEdge { length } => {
            let t = mesh::unit_cube_transform(gt)?;
            let s = mesh::UniformTransform {
                scale: t.scale * length,
                translation: t.translation * length,
            };
            (s.apply_mesh(pred), s.apply_mesh(gt))
        }
        Normalization::UnitCube { scale } => {
            let up = |m: &TriMesh| -> Result<TriMesh> {
                let t = mesh::unit_cube_transform(m)?;
                Ok(mesh::UniformTransform {
                    scale: t.scale * scale,
                    translation: t.translation * scale,
                }
                .apply_mesh(m))
            };
            (up(pred)?, up(gt)?)
        }
    };
    let a = mesh::surface_sample(&p, params.samples, params.seed)?;
    let b = mesh::surface_sample(&g, params.samples, params.seed)?;
    let c = metrics::compare_samples(&a, &b, &[params.tau])?;
    Ok(MeshPairMetrics {
        f1: c.f1[0].1,
        chamfer: c.chamfer,
        normal_consistency: c.normal_consistency,
    })
}

/// True-positive rule for one detection against one ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Criterion {
    /// 2D IoU at least `iou`.
    Box2d { iou: f64 },
    /// Oriented 3D IoU at least `iou`.
    Cube { iou: f64 },
    /// F1@tau strictly above `f1`. With a gate, pairs whose 2D IoU is below
    /// it are not eligible.
    Mesh {
        f1: f64,
        gate: Option<f64>,
        params: MeshMetricParams,
    },
}

/// One ranked detection in the pooled precision-recall sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedDetection {
    /// Position in the detection input.
    pub index: usize,
    pub score: f64,
    pub tp: bool,
    /// Ground truth index claimed by a true positive.
    pub matched: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub gt_count: usize,
    /// Detections by descending score, ties by input order.
    pub ranked: Vec<RankedDetection>,
}

impl PrCurve {
    pub fn true_positives(&self) -> usize {
        self.ranked.iter().filter(|r| r.tp).count()
    }

    pub fn false_positives(&self) -> usize {
        self.ranked.len() - self.true_positives()
    }

    pub fn false_negatives(&self) -> usize {
        self.gt_count - self.true_positives()
    }

    /// Precision and recall after each rank.
    pub fn points(&self) -> Vec<PrPoint> {
        let mut tp = 0usize;
        self.ranked
            .iter()
            .enumerate()
            .map(|(k, r)| {
                tp += r.tp as usize;
                PrPoint {
                    precision: tp as f64 / (k + 1) as f64,
                    recall: if self.gt_count == 0 {
                        0.0
                    } else {
                        tp as f64 / self.gt_count as f64
                    },
                }
            })
            .collect()
    }
}

fn score_order(scores: &[f64], idx: &mut [usize]) {
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
}

/// Greedy matching per scene with a precomputed pair quality. Each
/// detection, in score order, takes the unmatched ground truth of its scene
/// with the highest quality (lowest index on ties); it is a true positive
/// iff that quality passes. `quality(d, g)` returning `None` makes the pair
/// ineligible.
pub fn match_with_quality(
    det_scenes: &[&str],
    scores: &[f64],
    gt_scenes: &[&str],
    mut quality: impl FnMut(usize, usize) -> Result<Option<f64>>,
    passes: impl Fn(f64) -> bool,
) -> Result<PrCurve> {
    if det_scenes.len() != scores.len() {
        return Err(Error::InvalidArgument("one score per detection required".into()));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument(format!("detection score {s} is not finite")));
    }
    let mut by_scene: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (g, s) in gt_scenes.iter().enumerate() {
        by_scene.entry(s).or_default().push(g);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    score_order(scores, &mut order);
    let mut claimed = vec![false; gt_scenes.len()];
    let mut ranked = Vec::with_capacity(order.len());
    for d in order {
        let mut best: Option<(usize, f64)> = None;
        if let Some(cands) = by_scene.get(det_scenes[d]) {
            for &g in cands {
                if claimed[g] {
                    continue;
                }
                if let Some(q) = quality(d, g)? {
                    if best.is_none_or(|(_, bq)| q > bq) {
                        best = Some((g, q));
                    }
                }
            }
        }
        let hit = best.filter(|&(_, q)| passes(q)).map(|(g, _)| g);
        if let Some(g) = hit {
            claimed[g] = true;
        }
        ranked.push(RankedDetection {
            index: d,
            score: scores[d],
            tp: hit.is_some(),
            matched: hit,
        });
    }
    Ok(PrCurve {
        gt_count: gt_scenes.len(),
        ranked,
    })
}

fn mesh_or_template(mesh: &Option<TriMesh>, b: &OrientedBox3) -> Result<TriMesh> {
    match mesh {
        Some(m) => Ok(m.clone()),
        None => build_template_mesh(b),
    }
}

/// Matches `detections` to `truths` under `criterion` and returns the
/// pooled, score-ranked sequence.
pub fn match_and_score(detections: &[Detection], truths: &[GroundTruth], criterion: &Criterion) -> Result<PrCurve> {
    let ds: Vec<&str> = detections.iter().map(|d| d.scene_id.as_str()).collect();
    let scores: Vec<f64> = detections.iter().map(|d| d.score).collect();
    let gs: Vec<&str> = truths.iter().map(|g| g.scene_id.as_str()).collect();
    match *criterion {
        Criterion::Box2d { iou } => match_with_quality(
            &ds,
            &scores,
            &gs,
            |d, g| Ok(Some(iou2d(&detections[d].box2d, &truths[g].box2d))),
            |q| q >= iou,
        ),
        Criterion::Cube { iou } => match_with_quality(
            &ds,
            &scores,
            &gs,
            |d, g| Ok(Some(iou3d(&detections[d].box3d, &truths[g].box3d))),
            |q| q >= iou,
        ),
        Criterion::Mesh { f1, gate, params } => match_with_quality(
            &ds,
            &scores,
            &gs,
            |d, g| {
                let (det, gt) = (&detections[d], &truths[g]);
                if gate.is_some_and(|t| iou2d(&det.box2d, &gt.box2d) < t) {
                    return Ok(None);
                }
                let p = mesh_or_template(&det.mesh, &det.box3d)?;
                let q = mesh_or_template(&gt.mesh, &gt.box3d)?;
                Ok(Some(mesh_pair_metrics(&p, &q, &params)?.f1))
            },
            |q| q > f1,
        ),
    }
}

/// 101-point interpolated average precision: the mean over recall levels
/// r = 0, 0.01, ..., 1 of the best precision reached at recall >= r (zero
/// when r is never reached). Zero when there is no ground truth.
pub fn average_precision(curve: &PrCurve) -> f64 {
    if curve.gt_count == 0 {
        return 0.0;
    }
    let pts = curve.points();
    // Precision envelope from the right.
    let mut env: Vec<f64> = pts.iter().map(|p| p.precision).collect();
    for k in (0..env.len().saturating_sub(1)).rev() {
        env[k] = env[k].max(env[k + 1]);
    }
    let mut sum = 0.0;
    let mut k = 0;
    for i in 0..RECALL_POINTS {
        let r = i as f64 / (RECALL_POINTS - 1) as f64;
        while k < pts.len() && pts[k].recall < r {
            k += 1;
        }
        if k < pts.len() {
            sum += env[k];
        }
    }
    sum / RECALL_POINTS as f64
}
