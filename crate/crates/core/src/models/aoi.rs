use rand::Rng;

use super::dense::{DenseCore, ObsCache, PredCache};
use super::spec::ModelSpec;
use super::{Mode, ModelError};
use crate::nn::{relu, relu_backward, sigmoid, sigmoid_backward, Linear, NnError, Scalar, Tensor};

/// CNN-LSTM forecasting the burning probability of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct AoiModel<T> {
    pub spec: ModelSpec,
    pub core: DenseCore<T>,
    /// `hidden → head_hidden`, followed by ReLU.
    pub head1: Linear<T>,
    /// `head_hidden → 1`, followed by the logistic function.
    pub head2: Linear<T>,
}

crate::impl_module!(AoiModel {
    params: [],
    children: [core, head1, head2]
});

#[derive(Debug, Clone)]
struct HeadCache<T> {
    h: Tensor<T>,
    r: Tensor<T>,
    p: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct AoiTape<T> {
    obs: Vec<ObsCache<T>>,
    steps: Vec<(PredCache<T>, HeadCache<T>)>,
}

impl<T: Scalar> AoiModel<T> {
    pub fn new<R: Rng + ?Sized>(spec: ModelSpec, rng: &mut R) -> Result<Self, ModelError> {
        spec.validate()?;
        Ok(Self {
            core: DenseCore::new(&spec, rng)?,
            head1: Linear::new(spec.hidden, spec.head_hidden, rng),
            head2: Linear::new(spec.head_hidden, 1, rng),
            spec,
        })
    }

    fn head(&self, h: &Tensor<T>) -> Result<HeadCache<T>, NnError> {
        let r = relu(&self.head1.forward(h)?);
        let p = sigmoid(&self.head2.forward(&r)?);
        Ok(HeadCache { h: h.clone(), r, p })
    }

    /// Returns `N x T_pred` probabilities, plus the tape in training mode.
    pub fn forward(
        &mut self,
        frames: &[Tensor<T>],
        mode: Mode,
    ) -> Result<(Tensor<T>, Option<AoiTape<T>>), ModelError> {
        let (mut state, obs) = self.core.observe(&self.spec, frames, mode)?;
        let n = state.0.shape()[0];
        let tp = self.spec.t_pred;
        let mut probs = Tensor::zeros(&[n, tp]);
        let mut steps = Vec::new();
        for s in 0..tp {
            let (next, pc) = self.core.predict(&state, mode)?;
            let hc = self.head(&next.0)?;
            for b in 0..n {
                probs.data_mut()[b * tp + s] = hc.p.data()[b];
            }
            if let Some(pc) = pc {
                steps.push((pc, hc));
            }
            state = next;
        }
        let tape = (mode == Mode::Train).then_some(AoiTape { obs, steps });
        Ok((probs, tape))
    }

    /// Backpropagates `dL/dprobs` (`N x T_pred`) through the whole rollout,
    /// accumulating parameter gradients.
    pub fn backward(&mut self, tape: &AoiTape<T>, dprobs: &Tensor<T>) -> Result<(), ModelError> {
        let tp = self.spec.t_pred;
        let n = dprobs.len() / tp;
        let hs = self.spec.hidden;
        let mut dh = Tensor::zeros(&[n, hs]);
        let mut dc = Tensor::zeros(&[n, hs]);
        for (s, (pc, hc)) in tape.steps.iter().enumerate().rev() {
            let dp: Vec<T> = (0..n).map(|b| dprobs.data()[b * tp + s]).collect();
            let dp = Tensor::from_vec(&[n, 1], dp)?;
            let dlogit = sigmoid_backward(&hc.p, &dp);
            let dr = self.head2.backward(&hc.r, &dlogit)?;
            let da = relu_backward(&hc.r, &dr);
            dh.add_assign(&self.head1.backward(&hc.h, &da)?);
            (dh, dc) = self.core.predict_backward(pc, &dh, &dc)?;
        }
        self.core.observe_backward(&tape.obs, dh, dc)?;
        Ok(())
    }
}
