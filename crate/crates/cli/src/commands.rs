use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;

use parcelforge::damage::analyze_damage;
use parcelforge::eval::{evaluate_dataset, read_predictions};
use parcelforge::mesh::{load_obj, save_obj, ObjOptions};
use parcelforge::rectify::{rectify_visible_faces, Homography};
use parcelforge::scene::{
    build_pool, export_assets, generate_scenes, read_manifest, synthetic_models, write_manifest, Manifest, Split,
};
use parcelforge::select::{classify_models, read_metadata_csv, sample_scale_variants, ModelMeta};
use parcelforge::sim::{run_drop, select_damaged_frames};
use parcelforge::{seed, BoxFace, CameraModel, OrientedBox3, PipelineConfig, TriMesh};

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(std::io::BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

fn load_mesh(path: &Path, fan: bool) -> Result<TriMesh> {
    load_obj(path, ObjOptions { fan_triangulate: fan }).with_context(|| format!("reading {}", path.display()))
}

#[derive(Args, Debug)]
pub struct ModelsArgs {
    /// Directory holding `<id>.obj` for every metadata row.
    #[arg(long)]
    pub models: PathBuf,
    /// CSV with id, brand and category columns.
    #[arg(long)]
    pub metadata: PathBuf,
    /// Fan-triangulate polygons with more than three vertices.
    #[arg(long)]
    pub fan_triangulate: bool,
}

fn load_models(a: &ModelsArgs) -> Result<Vec<(ModelMeta, TriMesh)>> {
    let f = File::open(&a.metadata).with_context(|| format!("opening {}", a.metadata.display()))?;
    let metas = read_metadata_csv(f).with_context(|| format!("reading {}", a.metadata.display()))?;
    if metas.is_empty() {
        bail!("{} lists no models", a.metadata.display());
    }
    metas
        .into_iter()
        .map(|m| {
            let mesh = load_mesh(&a.models.join(format!("{}.obj", m.id)), a.fan_triangulate)?;
            Ok((m, mesh))
        })
        .collect()
}

pub fn classify(cfg: &PipelineConfig, out: &Path, a: &ModelsArgs) -> Result<()> {
    let models = load_models(a)?;
    let report = classify_models(
        &models,
        cfg.pool.similarity_samples,
        &cfg.pool.thresholds,
        seed::derive(cfg.seed, "classify"),
    )?;
    for m in &report.models {
        log::info!(
            "{}: d_cham {:.4} c_norm {:.4} -> {:?}",
            m.id,
            m.d_cham,
            m.c_norm,
            m.class
        );
    }
    write_json(&out.join("classification.json"), &report)
}

#[derive(Args, Debug)]
pub struct VariantsArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// Number of variants (default from the config).
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub fan_triangulate: bool,
}

#[derive(Serialize)]
struct VariantRecord {
    mesh_path: String,
    factors: [f64; 3],
}

fn file_stem(p: &Path) -> String {
    p.file_stem()
        .map_or_else(|| "mesh".into(), |s| s.to_string_lossy().into_owned())
}

pub fn variants(cfg: &PipelineConfig, out: &Path, a: &VariantsArgs) -> Result<()> {
    let mesh = load_mesh(&a.mesh, a.fan_triangulate)?;
    let k = a.count.unwrap_or(cfg.pool.variants_per_model);
    let vs = sample_scale_variants(&mesh, k, &cfg.pool.scale, seed::derive(cfg.seed, "variants"))?;
    let dir = out.join("variants");
    fs::create_dir_all(&dir)?;
    let stem = file_stem(&a.mesh);
    let mut records = Vec::with_capacity(vs.len());
    for (i, v) in vs.iter().enumerate() {
        let rel = format!("variants/{stem}_v{i:02}.obj");
        save_obj(&v.mesh, out.join(&rel))?;
        records.push(VariantRecord {
            mesh_path: rel,
            factors: v.factors.into(),
        });
    }
    write_json(&out.join("variants.json"), &records)
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// Use the configured drop parameters as they are instead of sampling
    /// height, orientation and material from the configured ranges.
    #[arg(long)]
    pub fixed: bool,
    #[arg(long)]
    pub fan_triangulate: bool,
}

#[derive(Serialize)]
struct FrameRecord {
    index: usize,
    time: f64,
    volume_ratio: f64,
    /// Whether the frame survives damaged-frame selection.
    kept: bool,
    mesh_path: String,
}

#[derive(Serialize)]
struct TrajectoryLog<'a> {
    params: &'a parcelforge::sim::SimParams,
    rest_volume: f64,
    frames: Vec<FrameRecord>,
}

pub fn simulate(cfg: &PipelineConfig, out: &Path, a: &SimulateArgs) -> Result<()> {
    let mesh = load_mesh(&a.mesh, a.fan_triangulate)?;
    let params = if a.fixed {
        cfg.pool.sim.clone()
    } else {
        cfg.pool
            .sim_ranges
            .sample(&cfg.pool.sim, seed::derive(cfg.seed, "simulate"))
    };
    let traj = run_drop(&mesh, &params)?;
    let kept = select_damaged_frames(&traj, &cfg.pool.volume_band, &cfg.pool.smoothing)?;
    let dir = out.join("frames");
    fs::create_dir_all(&dir)?;
    let mut frames = Vec::with_capacity(traj.frames.len());
    for (i, f) in traj.frames.iter().enumerate() {
        let rel = format!("frames/frame_{i:04}.obj");
        save_obj(&f.mesh, out.join(&rel))?;
        frames.push(FrameRecord {
            index: i,
            time: f.time,
            volume_ratio: f.volume_ratio,
            kept: kept.iter().any(|k| k.frame == i),
            mesh_path: rel,
        });
    }
    log::info!("{} frames, {} kept", frames.len(), kept.len());
    write_json(
        &out.join("trajectory.json"),
        &TrajectoryLog {
            params: &traj.params,
            rest_volume: traj.rest_volume,
            frames,
        },
    )
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Number of scenes (default from the config).
    #[arg(long)]
    pub count: Option<usize>,
    /// Model directory; the built-in synthetic models are used when absent.
    #[arg(long, requires = "metadata")]
    pub models: Option<PathBuf>,
    #[arg(long, requires = "models")]
    pub metadata: Option<PathBuf>,
    #[arg(long)]
    pub fan_triangulate: bool,
}

pub fn generate(cfg: &PipelineConfig, out: &Path, a: &GenerateArgs) -> Result<()> {
    let models = match (&a.models, &a.metadata) {
        (Some(models), Some(metadata)) => load_models(&ModelsArgs {
            models: models.clone(),
            metadata: metadata.clone(),
            fan_triangulate: a.fan_triangulate,
        })?,
        _ => {
            let s = &cfg.synthetic;
            synthetic_models(s.parcels, s.distractors, s.groups, seed::derive(cfg.seed, "models"))?
        }
    };
    let (report, pool) = build_pool(&models, &cfg.pool, seed::derive(cfg.seed, "pool"))?;
    let count = a.count.unwrap_or(cfg.scenes);
    let (assets, scenes) = generate_scenes(&pool, &cfg.scene, count, seed::derive(cfg.seed, "scenes"))?;
    log::info!(
        "{} intact, {} damaged, {} distractor assets; {} scenes",
        pool.intact.len(),
        pool.damaged.len(),
        pool.distractors.len(),
        scenes.len()
    );
    export_assets(&pool, out)?;
    write_json(&out.join("classification.json"), &report)?;
    write_manifest(out.join("manifest.json"), &Manifest::new(cfg.seed, assets, scenes))?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Ground-truth manifest; its mesh paths resolve against its directory.
    #[arg(long)]
    pub gt: PathBuf,
    /// Predictions; mesh paths resolve against this file's directory.
    #[arg(long)]
    pub pred: PathBuf,
    /// Restrict scoring to one split (train, val or test).
    #[arg(long, value_parser = parse_split)]
    pub split: Option<Split>,
}

fn parse_split(s: &str) -> std::result::Result<Split, String> {
    Split::ALL
        .into_iter()
        .find(|sp| sp.label() == s)
        .ok_or_else(|| format!("unknown split `{s}` (expected train, val or test)"))
}

fn parent_dir(p: &Path) -> PathBuf {
    p.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

pub fn evaluate(cfg: &PipelineConfig, out: &Path, a: &EvaluateArgs) -> Result<()> {
    let manifest = read_manifest(&a.gt).with_context(|| format!("reading {}", a.gt.display()))?;
    let preds = read_predictions(&a.pred).with_context(|| format!("reading {}", a.pred.display()))?;
    let mut opts = cfg.eval.clone();
    if a.split.is_some() {
        opts.split = a.split;
    }
    let report = evaluate_dataset(&manifest, parent_dir(&a.gt), &preds, parent_dir(&a.pred), &opts)?;
    let table = report.to_table();
    print!("{table}");
    fs::write(out.join("report.txt"), &table)?;
    write_json(&out.join("report.json"), &report)
}

#[derive(Args, Debug)]
pub struct DamageArgs {
    #[arg(long)]
    pub original: PathBuf,
    /// Current state, aligned with the original.
    #[arg(long)]
    pub current: PathBuf,
    #[arg(long)]
    pub fan_triangulate: bool,
}

pub fn damage(cfg: &PipelineConfig, out: &Path, a: &DamageArgs) -> Result<()> {
    let original = load_mesh(&a.original, a.fan_triangulate)?;
    let current = load_mesh(&a.current, a.fan_triangulate)?;
    let report = analyze_damage(&original, &current, &cfg.damage)?;
    log::info!(
        "volume ratio {:.4}, {} clusters, voxel difference {:.4}",
        report.volume_ratio,
        report.clusters.len(),
        report.voxel_difference
    );
    write_json(&out.join("damage.json"), &report)
}

#[derive(Args, Debug)]
pub struct RectifyArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Box JSON: center, half_extents and row-major rotation.
    #[arg(long = "box")]
    pub box_path: PathBuf,
    /// Camera JSON: intrinsics, size and row-major world_to_camera.
    #[arg(long)]
    pub camera: PathBuf,
}

#[derive(Serialize)]
struct FaceRecord {
    face: BoxFace,
    image_path: String,
    width_m: f64,
    height_m: f64,
    width_px: u32,
    height_px: u32,
    /// Maps source pixels to crop pixels, row-major.
    homography: Homography,
}

fn face_file(face: BoxFace) -> String {
    let l = face.label();
    let sign = if l.starts_with('+') { "pos" } else { "neg" };
    format!("face_{sign}_{}.png", l[1..].to_lowercase())
}

pub fn rectify(cfg: &PipelineConfig, out: &Path, a: &RectifyArgs) -> Result<()> {
    let img = image::open(&a.image)
        .with_context(|| format!("reading {}", a.image.display()))?
        .to_rgb8();
    let b: OrientedBox3 = read_json(&a.box_path)?;
    let cam: CameraModel = read_json(&a.camera)?;
    let faces = rectify_visible_faces(&img, &b, &cam, cfg.rectify.pixels_per_meter)?;
    if faces.is_empty() {
        log::warn!("no face of the box is visible");
    }
    let mut records = Vec::with_capacity(faces.len());
    for f in &faces {
        let name = face_file(f.face);
        f.image
            .save(out.join(&name))
            .with_context(|| format!("writing {name}"))?;
        let r = &f.rectification;
        records.push(FaceRecord {
            face: f.face,
            image_path: name,
            width_m: r.width_m,
            height_m: r.height_m,
            width_px: r.width_px,
            height_px: r.height_px,
            homography: r.homography,
        });
    }
    write_json(&out.join("faces.json"), &records)
}
