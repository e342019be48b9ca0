//! Amodal instance segmentation with vector-quantized shape codes.
//!
//! The crate is organized around the stages of the system:
//!
//! - [`synthshapes`] — deterministic generator of synthetic scenes of
//!   overlapping triangles, rectangles, and ellipses with full amodal
//!   ground truth (amodal + visible masks, boxes, occlusion maps).
//! - [`dataio`] — annotation schema, run-length mask codec, dataset
//!   loading/validation, and box preprocessing.
//! - [`nn`] — a small deterministic tape-based autodiff engine over
//!   `ndarray` (convolutions via im2col GEMM, ROI align, group norm)
//!   with SGD/Adam optimizers and a versioned checkpoint format.
//! - [`vqvae`] — the shape prior: mask encoder, codebook quantizer with
//!   straight-through gradients, mask decoder, the three-term loss, and
//!   its training loop.
//! - [`pipeline`] — the end-to-end segmenter: backbone, occlusion branch,
//!   single-scale proposals, ROI heads (shape-code, refinement, FCN
//!   baseline), combined objective, training, and inference.
//! - [`eval`] — mask IoU, COCO-style average precision / mAP, and the
//!   occlusion-robustness sweep.
//! - [`config`] — one config document wiring all of the above into
//!   reproducible runs.

pub mod config;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod nn;
pub mod pipeline;
pub mod synthshapes;
pub mod vqvae;

pub use error::{Error, Result};
