//! Deterministic generator of synthetic scenes of overlapping triangles,
//! rectangles, and ellipses with full amodal ground truth.

mod dataset;
mod generate;
mod occlusion;
mod scene;
mod spec;

pub use dataset::{
    dataset_config_hash, generate_dataset, load_manifest, DatasetManifest, SplitManifest,
};
pub use generate::{generate_scene, GeneratorConfig};
pub use occlusion::{make_occlusion_pair, measured_occlusion_fraction, OcclusionPairConfig};
pub use scene::{
    category_table, compose_scene, scene_to_annotations, scenes_to_container, SceneInstance,
    ShapeScene,
};
pub use spec::{rasterize_shape, ShapeGeometry, ShapeKind, ShapeSpec};
