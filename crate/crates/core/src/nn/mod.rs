//! A small deterministic tape-based autodiff engine over `ndarray`.
//!
//! Everything the models in this crate need and nothing more: conv /
//! transposed-conv via im2col GEMM, linear, group norm, ROI align,
//! elementwise ops, the loss primitives, and reverse-mode gradients with
//! explicit stop-gradient (`detach`) routing. All kernels are
//! deterministic: batch parallelism uses indexed outputs and gradient
//! reductions are summed in fixed order, so identical seeds produce
//! byte-identical results regardless of thread count.

mod gradcheck;
mod kernels;
mod layers;
mod optim;
mod store;
mod tape;

pub use gradcheck::{assert_gradcheck, gradcheck, GradCheckReport};
pub use kernels::ConvConf;
pub use layers::{Conv2d, ConvTranspose2d, GroupNorm, Linear, ResidualBlock};
pub use optim::{Adam, AdamConf, Optimizer, Sgd, SgdConf};
pub use store::{ParamId, ParamStore};
pub use tape::{Grads, Roi, Tape, Var};

/// Element type the engine is generic over. Training uses `f32`;
/// finite-difference gradient checks use `f64`.
pub trait Scalar:
    ndarray::LinalgScalar
    + num_traits::Float
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}
