//! Minimal neural-network engine: dense tensors, layer primitives with
//! explicit backward passes, and SGD with momentum.
//!
//! Design rules that hold across the module:
//!
//! - Activations are `[channels, length]` per sample or
//!   `[batch, channels, length]` batched, row-major.
//! - Every reduction runs in a fixed order (a fixed-shape accumulator
//!   tree), so results are bit-reproducible run to run regardless of how
//!   the compiler vectorises the loops.
//! - Layers are generic over [`Scalar`] (`f32` for training, `f64` for
//!   gradient verification).

mod act;
mod conv;
pub mod gradcheck;
mod linear;
mod norm;
mod param;
mod pool;
mod sgdm;
mod softmax;
mod tensor;

pub use act::{activation, activation_backward, Activation};
pub use conv::{conv1d, conv1d_backward, conv1d_out_len, Conv1dGrad};
pub use linear::{fully_connected, fully_connected_backward, FcGrad};
pub use norm::{
    batchnorm, batchnorm_backward, batchnorm_infer, batchnorm_train, BnCache, BnGrad, BnMode,
    RunningStats,
};
pub use param::{GradSet, Param, ParamSet};
pub use pool::{avgpool1d, avgpool1d_backward};
pub use sgdm::{sgdm_step, OptimizerState};
pub use softmax::{
    cross_entropy, depth_concat, softmax, softmax_cross_entropy_backward, DEFAULT_PROB_FLOOR,
};
pub use tensor::{Dtype, Scalar, Tensor};

use thiserror::Error;

/// Errors raised by tensor and layer operations.
#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("{op}: input length {len} is shorter than kernel length {kernel}")]
    InputShorterThanKernel {
        op: &'static str,
        len: usize,
        kernel: usize,
    },
    #[error("{op}: stride must be at least 1")]
    ZeroStride { op: &'static str },
    #[error("{op}: {detail}")]
    InvalidArgument { op: &'static str, detail: String },
    #[error("non-finite value in parameter {name}")]
    NonFinite { name: String },
}

pub type Result<T> = std::result::Result<T, NnError>;
