use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ap::{
    average_precision, match_with_quality, mesh_pair_metrics, Detection, GroundTruth, MeshMetricParams, MeshPairMetrics,
};
use super::cube::build_template_mesh;
use crate::error::{Error, Result};
use crate::mesh::{load_obj, ObjOptions, OrientedBox3, TriMesh};
use crate::metrics::{iou2d, iou3d, Rect2};
use crate::registration::RigidTransform;
use crate::scene::{Manifest, Split};

/// One line of a predictions file. Boxes are in world coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub scene_id: String,
    pub score: f64,
    pub box2d: Rect2,
    pub box3d: OrientedBox3,
    /// Predicted mesh, relative to the predictions file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh_path: Option<String>,
    /// Placement of the mesh file's vertices in the world; identity when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh_pose: Option<RigidTransform>,
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRecord>> {
    Ok(serde_json::from_reader(BufReader::new(fs::File::open(path)?))?)
}

pub fn write_predictions(path: impl AsRef<Path>, preds: &[PredictionRecord]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, preds)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Ground truth restated as perfect predictions with score 1. Mesh paths
/// stay relative to the manifest, so the result belongs next to it.
pub fn predictions_from_manifest(manifest: &Manifest) -> Vec<PredictionRecord> {
    manifest
        .scenes
        .iter()
        .map(|s| PredictionRecord {
            scene_id: s.scene_id.clone(),
            score: 1.0,
            box2d: s.box2d,
            box3d: s.box3d,
            mesh_path: Some(s.mesh_path.clone()),
            mesh_pose: Some(s.pose),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalOptions {
    /// Minimum 2D IoU for a pair to be scored on meshes; `None` disables
    /// the gate.
    pub mesh_gate: Option<f64>,
    pub mesh: MeshMetricParams,
    /// Only scenes of this split are evaluated.
    pub split: Option<Split>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            mesh_gate: Some(0.5),
            mesh: MeshMetricParams::default(),
            split: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxAp {
    pub ap: f64,
    pub ap50: f64,
    pub ap75: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshAp {
    pub ap50: f64,
    pub ap75: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubeAp {
    pub ap: f64,
    pub ap15: f64,
    pub ap25: f64,
}

/// Dataset scores. APs are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenes: usize,
    pub detections: usize,
    pub box_ap: BoxAp,
    pub mesh_ap: MeshAp,
    /// Mean over ground truths of the top-scoring eligible detection.
    pub chamfer: Option<f64>,
    pub normal_consistency: Option<f64>,
    pub mesh_pairs: usize,
    pub cube_ap: CubeAp,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"))
}

impl EvalReport {
    /// Two-column plain-text table.
    pub fn to_table(&self) -> String {
        let rows = [
            ("Scenes", self.scenes.to_string()),
            ("Detections", self.detections.to_string()),
            ("Box AP", format!("{:.1}", self.box_ap.ap)),
            ("Box AP50", format!("{:.1}", self.box_ap.ap50)),
            ("Box AP75", format!("{:.1}", self.box_ap.ap75)),
            ("Mesh AP50", format!("{:.1}", self.mesh_ap.ap50)),
            ("Mesh AP75", format!("{:.1}", self.mesh_ap.ap75)),
            ("Chamfer distance", fmt_opt(self.chamfer)),
            ("Normal consistency", fmt_opt(self.normal_consistency)),
            ("Mesh pairs", self.mesh_pairs.to_string()),
            ("Cube AP", format!("{:.1}", self.cube_ap.ap)),
            ("Cube AP15", format!("{:.1}", self.cube_ap.ap15)),
            ("Cube AP25", format!("{:.1}", self.cube_ap.ap25)),
        ];
        let w0 = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max("metric".len());
        let w1 = rows.iter().map(|r| r.1.len()).max().unwrap_or(0).max("value".len());
        let mut s = String::new();
        let _ = writeln!(s, "{:<w0$}  {:>w1$}", "metric", "value");
        let _ = writeln!(s, "{}  {}", "-".repeat(w0), "-".repeat(w1));
        for (k, v) in rows {
            let _ = writeln!(s, "{k:<w0$}  {v:>w1$}");
        }
        s
    }
}

/// Thresholds `from, from + step, ..., to` in hundredths, without float
/// accumulation.
fn sweep(from: u32, to: u32, step: u32) -> Vec<f64> {
    (from..=to).step_by(step as usize).map(|t| t as f64 / 100.0).collect()
}

/// Per-pair qualities, computed once and reused across thresholds.
struct PairTable {
    iou2d: Vec<Vec<f64>>,
    iou3d: Vec<Vec<f64>>,
    mesh: Vec<Vec<Option<MeshPairMetrics>>>,
}

/// Scores `detections` against `truths` (one entry per object).
pub fn evaluate(detections: &[Detection], truths: &[GroundTruth], opts: &EvalOptions) -> Result<EvalReport> {
    let mut gt_by_scene: HashMap<&str, Vec<usize>> = HashMap::new();
    for (g, t) in truths.iter().enumerate() {
        gt_by_scene.entry(t.scene_id.as_str()).or_default().push(g);
    }
    let gt_meshes: Vec<TriMesh> = truths
        .par_iter()
        .map(|t| match &t.mesh {
            Some(m) => Ok(m.clone()),
            None => build_template_mesh(&t.box3d),
        })
        .collect::<Result<_>>()?;
    let rows = detections
        .par_iter()
        .map(|d| {
            let mut i2 = vec![0.0; truths.len()];
            let mut i3 = vec![0.0; truths.len()];
            let mut ms = vec![None; truths.len()];
            let Some(cands) = gt_by_scene.get(d.scene_id.as_str()) else {
                return Ok((i2, i3, ms));
            };
            let mut pred_mesh = None;
            for &g in cands {
                let t = &truths[g];
                i2[g] = iou2d(&d.box2d, &t.box2d);
                i3[g] = iou3d(&d.box3d, &t.box3d);
                if opts.mesh_gate.is_some_and(|gate| i2[g] < gate) {
                    continue;
                }
                if pred_mesh.is_none() {
                    pred_mesh = Some(match &d.mesh {
                        Some(m) => m.clone(),
                        None => build_template_mesh(&d.box3d)?,
                    });
                }
                let pm = pred_mesh.as_ref().expect("set above");
                ms[g] = Some(mesh_pair_metrics(pm, &gt_meshes[g], &opts.mesh)?);
            }
            Ok((i2, i3, ms))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = PairTable {
        iou2d: Vec::with_capacity(rows.len()),
        iou3d: Vec::with_capacity(rows.len()),
        mesh: Vec::with_capacity(rows.len()),
    };
    for (a, b, c) in rows {
        table.iou2d.push(a);
        table.iou3d.push(b);
        table.mesh.push(c);
    }

    let ds: Vec<&str> = detections.iter().map(|d| d.scene_id.as_str()).collect();
    let scores: Vec<f64> = detections.iter().map(|d| d.score).collect();
    let gs: Vec<&str> = truths.iter().map(|t| t.scene_id.as_str()).collect();
    let ap_at = |kind: u8, t: f64| -> Result<f64> {
        let curve = match kind {
            0 => match_with_quality(&ds, &scores, &gs, |d, g| Ok(Some(table.iou2d[d][g])), |q| q >= t)?,
            1 => match_with_quality(&ds, &scores, &gs, |d, g| Ok(Some(table.iou3d[d][g])), |q| q >= t)?,
            _ => match_with_quality(&ds, &scores, &gs, |d, g| Ok(table.mesh[d][g].map(|m| m.f1)), |q| q > t)?,
        };
        Ok(100.0 * average_precision(&curve))
    };
    let mean_ap = |kind: u8, ts: &[f64]| -> Result<f64> {
        let v = ts.iter().map(|&t| ap_at(kind, t)).collect::<Result<Vec<_>>>()?;
        Ok(v.iter().sum::<f64>() / v.len() as f64)
    };

    // Chamfer and normal consistency of the best-scoring eligible detection
    // per ground truth.
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut cham = Vec::new();
    let mut nc = Vec::new();
    for g in 0..truths.len() {
        if let Some(m) = order.iter().find_map(|&d| table.mesh[d][g]) {
            cham.push(m.chamfer);
            nc.push(m.normal_consistency);
        }
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);

    Ok(EvalReport {
        scenes: gt_by_scene.len(),
        detections: detections.len(),
        box_ap: BoxAp {
            ap: mean_ap(0, &sweep(50, 95, 5))?,
            ap50: ap_at(0, 0.5)?,
            ap75: ap_at(0, 0.75)?,
        },
        mesh_ap: MeshAp {
            ap50: ap_at(2, 0.5)?,
            ap75: ap_at(2, 0.75)?,
        },
        chamfer: mean(&cham),
        normal_consistency: mean(&nc),
        mesh_pairs: cham.len(),
        cube_ap: CubeAp {
            ap: mean_ap(1, &sweep(5, 50, 5))?,
            ap15: ap_at(1, 0.15)?,
            ap25: ap_at(1, 0.25)?,
        },
    })
}

fn load_posed(root: &Path, rel: &str, pose: Option<&RigidTransform>) -> Result<TriMesh> {
    let m = load_obj(root.join(rel), ObjOptions::default())?;
    Ok(match pose {
        Some(p) => p.apply_mesh(&m),
        None => m,
    })
}

/// Evaluates predictions against a manifest. Relative mesh paths resolve
/// against `manifest_root` and `predictions_root` respectively.
pub fn evaluate_dataset(
    manifest: &Manifest,
    manifest_root: impl AsRef<Path>,
    predictions: &[PredictionRecord],
    predictions_root: impl AsRef<Path>,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let (mroot, proot) = (manifest_root.as_ref(), predictions_root.as_ref());
    let scenes: Vec<_> = manifest
        .scenes
        .iter()
        .filter(|s| opts.split.is_none_or(|sp| s.split == sp))
        .collect();
    let known: HashMap<&str, ()> = manifest.scenes.iter().map(|s| (s.scene_id.as_str(), ())).collect();
    if let Some(p) = predictions.iter().find(|p| !known.contains_key(p.scene_id.as_str())) {
        return Err(Error::UnknownScene(p.scene_id.clone()));
    }
    let in_eval: HashMap<&str, ()> = scenes.iter().map(|s| (s.scene_id.as_str(), ())).collect();
    let truths = scenes
        .par_iter()
        .map(|s| {
            Ok(GroundTruth {
                scene_id: s.scene_id.clone(),
                box2d: s.box2d,
                box3d: s.box3d,
                mesh: Some(load_posed(mroot, &s.mesh_path, Some(&s.pose))?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let detections = predictions
        .par_iter()
        .filter(|p| in_eval.contains_key(p.scene_id.as_str()))
        .map(|p| {
            Ok(Detection {
                scene_id: p.scene_id.clone(),
                score: p.score,
                box2d: p.box2d,
                box3d: p.box3d,
                mesh: match &p.mesh_path {
                    Some(rel) => Some(load_posed(proot, rel, p.mesh_pose.as_ref())?),
                    None => None,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    evaluate(&detections, &truths, opts)
}
