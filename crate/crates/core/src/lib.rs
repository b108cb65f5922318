// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod damage;
pub mod error;
pub mod eval;
pub mod mesh;
pub mod metrics;
pub mod rectify;
pub mod registration;
pub mod scene;
pub mod seed;
pub mod select;
pub mod sim;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use mesh::{BoxFace, OrientedBox3, TriMesh};
pub use metrics::Rect2;
pub use registration::RigidTransform;
pub use scene::CameraModel;
