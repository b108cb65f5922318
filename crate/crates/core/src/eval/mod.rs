//! Cube-parameter decoding and detection scoring (Box, Mesh and Cube AP).

mod ap;
mod cube;
mod dataset;

pub use ap::{
    average_precision, match_and_score, match_with_quality, mesh_pair_metrics, Criterion, Detection, GroundTruth,
    MeshMetricParams, MeshPairMetrics, Normalization, PrCurve, PrPoint, RankedDetection, RECALL_POINTS,
};
pub use cube::{
    build_template_mesh, decode_cube_params, encode_cube_params, rotation_from_6d, rotation_to_6d, CubeParams,
    TEMPLATE_SUBDIVISIONS,
};
pub use dataset::{
    evaluate, evaluate_dataset, predictions_from_manifest, read_predictions, write_predictions, BoxAp, CubeAp,
    EvalOptions, EvalReport, MeshAp, PredictionRecord,
};
