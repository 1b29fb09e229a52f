//! Small CPU tensor kernel: layers with hand-written backward passes,
//! Adam, gradient checking and checkpoints.

use thiserror::Error;

mod adam;
mod batchnorm;
pub mod checkpoint;
pub mod conv;
pub mod gradcheck;
mod linear;
mod loss;
mod lstm;
pub mod param;
mod pool;
mod tensor;

pub use adam::{adam_update, Adam, AdamConfig, Moments};
pub use batchnorm::{BatchNorm2d, BnCache, BN_EPS, BN_MOMENTUM};
pub use checkpoint::{Checkpoint, CheckpointError};
pub use conv::{fit_spatial, fit_spatial_backward, upsample2x, upsample2x_backward, Conv2d};
pub use gradcheck::{gradcheck, GradCheckConfig, GradCheckReport};
pub use linear::{
    relu, relu_backward, sigmoid, sigmoid_backward, sigmoid_scalar, tanh, tanh_backward, Linear,
};
pub use loss::{bce_grad, bce_loss, BCE_EPS};
pub use lstm::{ConvLstmCache, ConvLstmCell, LstmCache, LstmCell};
pub use param::{Module, Param, ParamKind};
pub use pool::{MaxPool2d, PoolCache};
pub use tensor::{matmul, DType, Scalar, Tensor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("buffer of {len} elements does not fit shape {shape:?}")]
    BufferSize { shape: Vec<usize>, len: usize },
    #[error("{op}: expected rank {expected}, got shape {got:?}")]
    Rank {
        op: &'static str,
        expected: usize,
        got: Vec<usize>,
    },
    #[error("{op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("{op}: {axis} is {got}, expected {expected}")]
    Dim {
        op: &'static str,
        axis: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{op}: batch statistics need more than one element per channel, got {elements}")]
    BatchTooSmall { op: &'static str, elements: usize },
    #[error("{op}: empty input")]
    EmptyInput { op: &'static str },
    #[error("non-finite gradient in `{param}`")]
    NonFiniteGradient { param: String },
}
