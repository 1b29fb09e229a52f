//! Forecasting models: the single-cell CNN-LSTM, the full-map
//! reconstruction CNN-LSTM and the ConvLSTM baseline.
//!
//! Every model observes `t_obs` frames, then rolls forward `t_pred` steps
//! on its own predictions. Training-mode forwards return a tape that the
//! matching `backward` consumes (backpropagation through time).

mod aoi;
mod blocks;
mod convlstm;
pub mod cost;
mod dense;
mod recon;
mod spec;

pub use aoi::{AoiModel, AoiTape};
pub use blocks::{ConvBlock, UpBlock};
pub use convlstm::{ConvLstmModel, ConvLstmTape};
pub use cost::{count_activations, count_params, ActivationTally};
pub use dense::DenseCore;
pub use recon::{ReconModel, ReconTape};
pub use spec::{
    BlockShape, DecoderBlockSpec, EncoderBlockSpec, ModelSpec, PoolSpec, Variant, HIDDEN,
};

use std::path::Path;

use rand::Rng;
use thiserror::Error;

use crate::dataset::AoiSpec;
use crate::nn::{Checkpoint, CheckpointError, Module, NnError, Param, Scalar, Tensor};

/// Batch-norm behaviour and whether a tape is recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model spec {field}: {reason}")]
    InvalidSpec { field: &'static str, reason: String },
    #[error("input {height}x{width} too small for encoder block {block}")]
    InputTooSmall {
        block: usize,
        height: usize,
        width: usize,
    },
    #[error("expected {expected} observed frames, got {got}")]
    ObservationLength { expected: usize, got: usize },
    #[error("frame {index} has shape {got:?}, expected [N, {channels}, {height}, {width}]")]
    FrameShape {
        index: usize,
        got: Vec<usize>,
        channels: usize,
        height: usize,
        width: usize,
    },
    #[error("tape belongs to a different variant")]
    TapeMismatch,
    #[error("checkpoint header is not a model spec: {0}")]
    Header(#[from] serde_json::Error),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Validates the observed frames and returns the batch size.
pub(crate) fn check_frames<T: Scalar>(
    spec: &ModelSpec,
    frames: &[Tensor<T>],
) -> Result<usize, ModelError> {
    if frames.len() != spec.t_obs {
        return Err(ModelError::ObservationLength {
            expected: spec.t_obs,
            got: frames.len(),
        });
    }
    let n = frames[0].shape().first().copied().unwrap_or(0);
    for (index, f) in frames.iter().enumerate() {
        if n == 0 || f.shape() != [n, spec.in_channels, spec.height, spec.width] {
            return Err(ModelError::FrameShape {
                index,
                got: f.shape().to_vec(),
                channels: spec.in_channels,
                height: spec.height,
                width: spec.width,
            });
        }
    }
    Ok(n)
}

/// Copies an `N x 1 x H x W` map into step `s` of `N x T x H x W`.
pub(crate) fn scatter_step<T: Scalar>(out: &mut Tensor<T>, s: usize, map: &Tensor<T>) {
    let (n, tp) = (out.shape()[0], out.shape()[1]);
    let plane = map.len() / n;
    let data = out.data_mut();
    for b in 0..n {
        let dst = (b * tp + s) * plane;
        data[dst..dst + plane].copy_from_slice(&map.data()[b * plane..(b + 1) * plane]);
    }
}

/// Inverse of [`scatter_step`].
pub(crate) fn gather_step<T: Scalar>(src: &Tensor<T>, s: usize) -> Result<Tensor<T>, NnError> {
    let (n, tp, h, w) = src.dims4("gather_step")?;
    let plane = h * w;
    let mut data = Vec::with_capacity(n * plane);
    for b in 0..n {
        let at = (b * tp + s) * plane;
        data.extend_from_slice(&src.data()[at..at + plane]);
    }
    Tensor::from_vec(&[n, 1, h, w], data)
}

/// Any of the three forecasters.
#[derive(Debug, Clone, PartialEq)]
pub enum Model<T> {
    Aoi(AoiModel<T>),
    Reconstruction(ReconModel<T>),
    ConvLstm(ConvLstmModel<T>),
}

#[derive(Debug, Clone)]
pub enum Tape<T> {
    Aoi(AoiTape<T>),
    Reconstruction(ReconTape<T>),
    ConvLstm(ConvLstmTape<T>),
}

impl<T: Scalar> Module<T> for Model<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        match self {
            Model::Aoi(m) => m.visit(prefix, f),
            Model::Reconstruction(m) => m.visit(prefix, f),
            Model::ConvLstm(m) => m.visit(prefix, f),
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        match self {
            Model::Aoi(m) => m.visit_mut(prefix, f),
            Model::Reconstruction(m) => m.visit_mut(prefix, f),
            Model::ConvLstm(m) => m.visit_mut(prefix, f),
        }
    }
}

impl<T: Scalar> Model<T> {
    pub fn new<R: Rng + ?Sized>(spec: ModelSpec, rng: &mut R) -> Result<Self, ModelError> {
        Ok(match spec.variant {
            Variant::Aoi => Model::Aoi(AoiModel::new(spec, rng)?),
            Variant::Reconstruction => Model::Reconstruction(ReconModel::new(spec, rng)?),
            Variant::ConvLstm => Model::ConvLstm(ConvLstmModel::new(spec, rng)?),
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        match self {
            Model::Aoi(m) => &m.spec,
            Model::Reconstruction(m) => &m.spec,
            Model::ConvLstm(m) => &m.spec,
        }
    }

    pub fn variant(&self) -> Variant {
        self.spec().variant
    }

    /// Probabilities: `N x T_pred` for the single-cell variant,
    /// `N x T_pred x H x W` for map variants.
    pub fn forward(
        &mut self,
        frames: &[Tensor<T>],
        mode: Mode,
    ) -> Result<(Tensor<T>, Option<Tape<T>>), ModelError> {
        Ok(match self {
            Model::Aoi(m) => {
                let (p, t) = m.forward(frames, mode)?;
                (p, t.map(Tape::Aoi))
            }
            Model::Reconstruction(m) => {
                let (p, t) = m.forward(frames, mode)?;
                (p, t.map(Tape::Reconstruction))
            }
            Model::ConvLstm(m) => {
                let (p, t) = m.forward(frames, mode)?;
                (p, t.map(Tape::ConvLstm))
            }
        })
    }

    pub fn backward(&mut self, tape: &Tape<T>, dprobs: &Tensor<T>) -> Result<(), ModelError> {
        match (self, tape) {
            (Model::Aoi(m), Tape::Aoi(t)) => m.backward(t, dprobs),
            (Model::Reconstruction(m), Tape::Reconstruction(t)) => m.backward(t, dprobs),
            (Model::ConvLstm(m), Tape::ConvLstm(t)) => m.backward(t, dprobs),
            _ => Err(ModelError::TapeMismatch),
        }
    }

    /// Per-step probabilities of one cell, `N x T_pred`. Map outputs are
    /// sampled at the AOI pixel; single-cell outputs pass through.
    pub fn aoi_probabilities(
        &self,
        probs: &Tensor<T>,
        aoi: AoiSpec,
    ) -> Result<Tensor<T>, ModelError> {
        let spec = self.spec();
        if !spec.variant.is_map() {
            return Ok(probs.clone());
        }
        let (n, tp, h, w) = probs.dims4("aoi_probabilities")?;
        if aoi.x >= w || aoi.y >= h {
            return Err(ModelError::InvalidSpec {
                field: "aoi",
                reason: format!("({aoi}) outside {w}x{h}"),
            });
        }
        let data: Vec<T> = (0..n * tp)
            .map(|i| probs.data()[(i * h + aoi.y) * w + aoi.x])
            .collect();
        Ok(Tensor::from_vec(&[n, tp], data)?)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::from_module(self, &self.spec().to_json())
    }

    /// Rebuilds a model from a checkpoint; the header carries the spec.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, ModelError> {
        let spec: ModelSpec = serde_json::from_str(&ck.header)?;
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let mut model = Self::new(spec, &mut rng)?;
        ck.load_into(&mut model)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        Ok(self.to_checkpoint().write(path)?)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_checkpoint(&Checkpoint::read(path)?)
    }
}

#[cfg(test)]
mod tests;
