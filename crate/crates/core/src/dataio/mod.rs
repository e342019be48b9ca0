//! Annotation schema, run-length mask codec, dataset loading, and box
//! preprocessing shared by the generator, the trainers, and the evaluator.

mod annotations;
mod boxes;
mod rle;

pub use annotations::{
    AmodalAnnotation, AnnotationContainer, CategoryRecord, DatasetIndex, ImageRecord,
};
pub use boxes::{adjust_box_center, mask_centroid, BoxXYXY};
pub use rle::{mask_area, mask_tight_box, rle_decode, rle_encode};

/// Binary mask, row-major H x W with 0/1 entries.
pub type Mask = ndarray::Array2<u8>;
