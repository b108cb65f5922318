//! Scene composition under the dataset's sampling rules, plus the geometry
//! (camera, depth raster) and texture helpers it needs.

mod assets;
mod camera;
mod compose;
mod manifest;
mod raster;
mod texture;

pub use assets::{asset_mesh_path, build_pool, synthetic_models, PoolConfig};
pub use camera::{
    angle_difference_deg, look_at_pose, project_box_2d, project_points, sample_camera, view_angles, CameraModel,
    CameraSampling, SampledCamera, IMAGE_HEIGHT, IMAGE_WIDTH, NEAR,
};
pub use compose::{
    assign_split, compose_scene, compose_scene_with, damaged_assignment, generate_scenes, Asset, AssetKind, AssetPool,
    AssetRecord, DistractorPlacement, LabelConfig, LabelKind, LabelPlacement, SceneAnnotation, SceneConfig, Split,
    SplitFractions,
};
pub use manifest::{export_assets, read_manifest, write_manifest, Manifest, MANIFEST_VERSION};
pub use raster::{occlusion_fraction, projected_extent, DepthRaster, DEFAULT_OCCLUSION_RESOLUTION};
pub use texture::{squared_distance_transform, texture_extrapolate};
