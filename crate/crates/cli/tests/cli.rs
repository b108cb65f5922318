use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use parcelforge::eval::{predictions_from_manifest, write_predictions};
use parcelforge::mesh::icosphere;
use parcelforge::mesh::{build_box_mesh, save_obj};
use parcelforge::scene::read_manifest;
use parcelforge::{CameraModel, OrientedBox3};

fn box_mesh(path: &Path, h: [f64; 3]) {
    let b = OrientedBox3::axis_aligned(nalgebra::Point3::origin(), nalgebra::Vector3::from(h)).unwrap();
    save_obj(&build_box_mesh(&b), path).unwrap();
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn parcelforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parcelforge"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr:\n{}", String::from_utf8_lossy(&o.stderr));
}

/// A small config so each generate run stays quick.
const SMALL: &str = r#"
version = 1
[synthetic]
parcels = 6
distractors = 4
groups = 2
[pool]
variants_per_model = 3
similarity_samples = 2000
"#;

fn generate(dir: &Path, config: &Path, count: &str, seed: &str) {
    let out = dir.to_str().unwrap();
    ok(&parcelforge(&[
        "generate",
        "--count",
        count,
        "--seed",
        seed,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out,
    ]));
}

#[test]
fn generate_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    generate(&a, &cfg, "50", "7");
    generate(&b, &cfg, "50", "7");
    let ma = fs::read(a.join("manifest.json")).unwrap();
    let mb = fs::read(b.join("manifest.json")).unwrap();
    assert_eq!(ma, mb);
    assert_eq!(read_manifest(a.join("manifest.json")).unwrap().scenes.len(), 50);
    // Every referenced mesh exists under the output directory.
    let m = read_manifest(a.join("manifest.json")).unwrap();
    for s in &m.scenes {
        assert!(a.join(&s.mesh_path).is_file(), "{}", s.mesh_path);
    }
    // The resolved config sits next to the artifacts.
    let resolved = fs::read_to_string(a.join("config.resolved.toml")).unwrap();
    assert!(resolved.contains("seed = 7"), "{resolved}");
}

#[test]
fn invalid_split_names_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(
        &cfg,
        "version = 1\n[scene.split]\ntrain = 0.8\nval = 0.15\ntest = 0.15\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    let o = parcelforge(&[
        "generate",
        "--count",
        "2",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("scene.split"), "{err}");
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn ground_truth_predictions_score_perfectly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let data = tmp.path().join("data");
    generate(&data, &cfg, "12", "3");
    let manifest = read_manifest(data.join("manifest.json")).unwrap();
    let preds = data.join("preds.json");
    write_predictions(&preds, &predictions_from_manifest(&manifest)).unwrap();

    let report_dir = tmp.path().join("report");
    let o = parcelforge(&[
        "evaluate",
        "--gt",
        data.join("manifest.json").to_str().unwrap(),
        "--pred",
        preds.to_str().unwrap(),
        "--out",
        report_dir.to_str().unwrap(),
    ]);
    ok(&o);
    let table = String::from_utf8_lossy(&o.stdout);
    let ap50 = table.lines().find(|l| l.starts_with("Box AP50")).unwrap();
    assert!(ap50.trim_end().ends_with("100.0"), "{table}");
    let report: serde_json::Value = serde_json::from_slice(&fs::read(report_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["box_ap"]["ap50"], 100.0);
    assert_eq!(report["mesh_ap"]["ap50"], 100.0);
}

#[test]
fn damage_of_identical_meshes_is_nil() {
    let tmp = tempfile::tempdir().unwrap();
    let b = OrientedBox3::axis_aligned(nalgebra::Point3::origin(), nalgebra::Vector3::new(0.2, 0.15, 0.1)).unwrap();
    let mesh = tmp.path().join("box.obj");
    save_obj(&build_box_mesh(&b), &mesh).unwrap();
    let before = fs::read(&mesh).unwrap();
    let out = tmp.path().join("out");
    let m = mesh.to_str().unwrap();
    ok(&parcelforge(&[
        "damage",
        "--original",
        m,
        "--current",
        m,
        "--out",
        out.to_str().unwrap(),
    ]));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("damage.json")).unwrap()).unwrap();
    assert_eq!(report["volume_ratio"], 1.0);
    assert_eq!(report["voxel_difference"], 0.0);
    assert_eq!(report["clusters"].as_array().unwrap().len(), 0);
    assert_eq!(fs::read(&mesh).unwrap(), before, "input must not change");
}

#[test]
fn unknown_subcommand_fails() {
    assert!(!parcelforge(&["frobnicate"]).status.success());
}

#[test]
fn worker_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let run = |jobs: &str, dir: &str| {
        let out = tmp.path().join(dir);
        ok(&parcelforge(&[
            "generate",
            "--count",
            "10",
            "--jobs",
            jobs,
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]));
        fs::read(out.join("manifest.json")).unwrap()
    };
    assert_eq!(run("1", "one"), run("4", "four"));
}

#[test]
fn classify_reports_every_model() {
    let tmp = tempfile::tempdir().unwrap();
    let models = tmp.path().join("models");
    fs::create_dir(&models).unwrap();
    box_mesh(&models.join("carton.obj"), [0.2, 0.15, 0.1]);
    save_obj(&icosphere(0.2, 3), models.join("ball.obj")).unwrap();
    let csv = tmp.path().join("meta.csv");
    fs::write(&csv, "id,brand,category\ncarton,Acme,Shoes\nball,Acme,Toys\n").unwrap();
    let out = tmp.path().join("out");
    ok(&parcelforge(&[
        "classify",
        "--models",
        models.to_str().unwrap(),
        "--metadata",
        csv.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    let r = json(&out.join("classification.json"));
    let classes: Vec<(String, String)> = r["models"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| {
            (
                m["id"].as_str().unwrap().to_string(),
                m["class"].as_str().unwrap().to_string(),
            )
        })
        .collect();
    assert_eq!(classes.len(), 2);
    assert_eq!(classes[0], ("carton".to_string(), "pick".to_string()));
    assert_eq!(classes[1].0, "ball");
    assert_ne!(classes[1].1, "pick");
}

#[test]
fn classify_names_missing_model_file() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("meta.csv");
    fs::write(&csv, "id,brand,category\nghost,Acme,Shoes\n").unwrap();
    let o = parcelforge(&[
        "classify",
        "--models",
        tmp.path().to_str().unwrap(),
        "--metadata",
        csv.to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("ghost.obj"));
}

#[test]
fn variants_writes_scaled_copies() {
    let tmp = tempfile::tempdir().unwrap();
    let mesh = tmp.path().join("carton.obj");
    box_mesh(&mesh, [0.2, 0.15, 0.1]);
    let out = tmp.path().join("out");
    ok(&parcelforge(&[
        "variants",
        "--mesh",
        mesh.to_str().unwrap(),
        "--count",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]));
    let v = json(&out.join("variants.json"));
    let v = v.as_array().unwrap();
    assert_eq!(v.len(), 4);
    for r in v {
        assert!(out.join(r["mesh_path"].as_str().unwrap()).is_file());
        for f in r["factors"].as_array().unwrap() {
            assert!((0.5..=2.0).contains(&f.as_f64().unwrap()), "{f}");
        }
    }
}

#[test]
fn simulate_logs_every_frame() {
    let tmp = tempfile::tempdir().unwrap();
    let mesh = tmp.path().join("carton.obj");
    box_mesh(&mesh, [0.2, 0.15, 0.1]);
    let cfg = tmp.path().join("sim.toml");
    fs::write(&cfg, "[pool.sim]\nmax_time = 0.5\n").unwrap();
    let out = tmp.path().join("out");
    ok(&parcelforge(&[
        "simulate",
        "--mesh",
        mesh.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    let t = json(&out.join("trajectory.json"));
    let frames = t["frames"].as_array().unwrap();
    assert!(frames.len() >= 2);
    assert_eq!(frames[0]["time"], 0.0);
    let mut last = -1.0;
    for f in frames {
        let time = f["time"].as_f64().unwrap();
        assert!(time > last);
        last = time;
        assert!(out.join(f["mesh_path"].as_str().unwrap()).is_file());
        let r = f["volume_ratio"].as_f64().unwrap();
        if f["kept"].as_bool().unwrap() {
            assert!((0.75..=0.90).contains(&r), "{r}");
        }
    }
}

#[test]
fn rectify_writes_one_crop_per_visible_face() {
    let tmp = tempfile::tempdir().unwrap();
    let b = OrientedBox3::axis_aligned(nalgebra::Point3::origin(), nalgebra::Vector3::new(0.2, 0.15, 0.1)).unwrap();
    let cam = CameraModel::look_at(
        900.0,
        640,
        480,
        &nalgebra::Point3::new(1.2, -1.0, 0.9),
        &nalgebra::Point3::origin(),
    )
    .unwrap();
    let img = tmp.path().join("view.png");
    image::RgbImage::from_pixel(640, 480, image::Rgb([90, 140, 200]))
        .save(&img)
        .unwrap();
    let (bp, cp) = (tmp.path().join("box.json"), tmp.path().join("cam.json"));
    fs::write(&bp, serde_json::to_string(&b).unwrap()).unwrap();
    fs::write(&cp, serde_json::to_string(&cam).unwrap()).unwrap();
    let out = tmp.path().join("out");
    ok(&parcelforge(&[
        "rectify",
        "--image",
        img.to_str().unwrap(),
        "--box",
        bp.to_str().unwrap(),
        "--camera",
        cp.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    let faces = json(&out.join("faces.json"));
    let faces = faces.as_array().unwrap();
    let labels: Vec<&str> = faces.iter().map(|f| f["face"].as_str().unwrap()).collect();
    assert_eq!(labels, ["+X", "-Y", "+Z"]);
    for f in faces {
        let crop = image::open(out.join(f["image_path"].as_str().unwrap())).unwrap();
        assert_eq!(crop.width() as u64, f["width_px"].as_u64().unwrap());
        assert_eq!(crop.height() as u64, f["height_px"].as_u64().unwrap());
        let expect = (f["width_m"].as_f64().unwrap() * 500.0).round() as u32;
        assert_eq!(crop.width(), expect);
        assert_eq!(f["homography"].as_array().unwrap().len(), 9);
    }
}
