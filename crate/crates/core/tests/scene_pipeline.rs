use std::collections::{BTreeMap, BTreeSet};

use parcelforge::mesh::build_box_mesh;
use parcelforge::metrics::{iou2d, Rect2};
use parcelforge::scene::{
    angle_difference_deg, build_pool, generate_scenes, occlusion_fraction, project_box_2d, read_manifest,
    synthetic_models, view_angles, write_manifest, AssetKind, AssetPool, Manifest, PoolConfig, SceneConfig, Split,
};

fn small_pool(seed: u64) -> AssetPool {
    let models = synthetic_models(8, 8, 3, seed).unwrap();
    let cfg = PoolConfig {
        variants_per_model: 3,
        ..PoolConfig::default()
    };
    build_pool(&models, &cfg, seed).unwrap().1
}

#[test]
fn generated_scenes_respect_sampling_rules() {
    let pool = small_pool(11);
    assert!(!pool.damaged.is_empty());
    let cfg = SceneConfig::default();
    let (assets, scenes) = generate_scenes(&pool, &cfg, 40, 5).unwrap();
    assert_eq!(scenes.len(), 40);
    assert_eq!(scenes.iter().filter(|s| s.is_damaged).count(), 20);

    let split_of: BTreeMap<&str, Split> = assets.iter().map(|a| (a.base_id.as_str(), a.split)).collect();
    for s in &scenes {
        assert!((20.0..=60.0).contains(&s.elevation_deg), "{}", s.elevation_deg);
        assert!(s.occlusion <= 0.30);
        assert!(s.distractors.len() <= 3);
        let (el, az) = view_angles(&s.camera.center(), &s.box3d.center);
        assert!((el - s.elevation_deg).abs() < 1e-9);
        assert!(angle_difference_deg(az, s.azimuth_deg).abs() < 1e-9);
        if s.is_damaged {
            let face_az = s.impact_azimuth_deg().unwrap();
            assert!(angle_difference_deg(s.azimuth_deg, face_az).abs() <= 30.0 + 1e-9);
        }
        // Scenes follow their asset's split, and so do their distractors.
        let base = &assets.iter().find(|a| a.id == s.object_id).unwrap().base_id;
        assert_eq!(split_of[base.as_str()], s.split);
        for d in &s.distractors {
            let a = assets.iter().find(|a| a.id == d.object_id).unwrap();
            assert_eq!(a.kind, AssetKind::Distractor);
            assert_eq!(a.split, s.split);
        }
        // The annotation's 2D box is the projection of its 3D box.
        let r = project_box_2d(&s.camera, &s.box3d).unwrap();
        assert!(iou2d(&r, &s.box2d) > 1.0 - 1e-12);
    }
}

#[test]
fn occlusion_is_recomputable_from_annotation() {
    let pool = small_pool(2);
    let (_, scenes) = generate_scenes(&pool, &SceneConfig::default(), 12, 9).unwrap();
    for s in &scenes {
        let target = pool.all().find(|a| a.id == s.object_id).unwrap();
        let world = s.pose.apply_mesh(&target.mesh);
        let others: Vec<_> = s
            .distractors
            .iter()
            .map(|d| {
                d.pose
                    .apply_mesh(&pool.all().find(|a| a.id == d.object_id).unwrap().mesh)
            })
            .collect();
        let f = occlusion_fraction(&s.camera, &world, &others, 256).unwrap();
        assert_eq!(f, s.occlusion);
    }
}

#[test]
fn generation_is_deterministic_and_round_trips() {
    let pool = small_pool(4);
    let cfg = SceneConfig::default();
    let a = generate_scenes(&pool, &cfg, 10, 21).unwrap();
    let b = generate_scenes(&pool, &cfg, 10, 21).unwrap();
    assert_eq!(a, b);
    let m = Manifest::new(21, a.0, a.1);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("manifest.json");
    write_manifest(&p, &m).unwrap();
    assert_eq!(read_manifest(&p).unwrap(), m);
}

#[test]
fn large_manifest_round_trips() {
    let pool = small_pool(6);
    let (assets, scenes) = generate_scenes(&pool, &SceneConfig::default(), 1, 1).unwrap();
    let mut big = Vec::with_capacity(13_200);
    for i in 0..13_200 {
        let mut s = scenes[0].clone();
        s.scene_id = format!("scene_{i:06}");
        big.push(s);
    }
    let m = Manifest::new(1, assets, big);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("manifest.json");
    write_manifest(&p, &m).unwrap();
    let back = read_manifest(&p).unwrap();
    assert_eq!(back.scenes.len(), 13_200);
    assert_eq!(back, m);
}

#[test]
fn projected_box_contains_visible_vertices() {
    let pool = small_pool(8);
    let (_, scenes) = generate_scenes(&pool, &SceneConfig::default(), 8, 3).unwrap();
    for s in &scenes {
        let mesh = build_box_mesh(&s.box3d);
        let b = s.box2d;
        let grown = Rect2::new(b.x_min - 1e-9, b.y_min - 1e-9, b.x_max + 1e-9, b.y_max + 1e-9);
        for v in mesh.vertices() {
            let (px, _) = s.camera.project(v);
            if s.camera.image_rect().contains(px.x, px.y) {
                assert!(grown.contains(px.x, px.y));
            }
        }
    }
    let ids: BTreeSet<_> = scenes.iter().map(|s| s.scene_id.clone()).collect();
    assert_eq!(ids.len(), scenes.len());
}
