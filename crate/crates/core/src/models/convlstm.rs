use rand::Rng;

use super::blocks::{
    decode, decode_backward, encode, encode_backward, ConvBlock, ConvBlockCache, UpBlock,
    UpBlockCache,
};
use super::spec::ModelSpec;
use super::{check_frames, gather_step, scatter_step, Mode, ModelError};
use crate::nn::{
    fit_spatial, fit_spatial_backward, sigmoid, sigmoid_backward, Conv2d, ConvLstmCache,
    ConvLstmCell, NnError, Scalar, Tensor,
};

/// Convolutional recurrent baseline: one encoder block, a ConvLSTM cell over
/// the feature maps and an upsampling decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLstmModel<T> {
    pub spec: ModelSpec,
    pub stem: Vec<ConvBlock<T>>,
    pub cell: ConvLstmCell<T>,
    /// 1x1 projection of the hidden state to the cell's input channels,
    /// consumed during prediction.
    pub proj: Conv2d<T>,
    pub decoder: Vec<UpBlock<T>>,
    pub out_conv: Conv2d<T>,
}

crate::impl_module!(ConvLstmModel {
    params: [],
    children: [stem, cell, proj, decoder, out_conv]
});

#[derive(Debug, Clone)]
struct ObsStep<T> {
    enc: Vec<ConvBlockCache<T>>,
    cell: ConvLstmCache<T>,
}

#[derive(Debug, Clone)]
struct PredStep<T> {
    h_prev: Tensor<T>,
    cell: ConvLstmCache<T>,
    blocks: Vec<UpBlockCache<T>>,
    m_extent: (usize, usize),
    m_fit: Tensor<T>,
    p: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct ConvLstmTape<T> {
    obs: Vec<ObsStep<T>>,
    steps: Vec<PredStep<T>>,
}

impl<T: Scalar> ConvLstmModel<T> {
    pub fn new<R: Rng + ?Sized>(spec: ModelSpec, rng: &mut R) -> Result<Self, ModelError> {
        spec.validate()?;
        let mut stem = Vec::with_capacity(spec.encoder.len());
        let mut ch = spec.in_channels;
        for b in &spec.encoder {
            stem.push(ConvBlock::new(ch, b, rng));
            ch = b.out_channels;
        }
        let cell = ConvLstmCell::new(ch, spec.hidden, spec.convlstm_kernel, rng);
        let proj = Conv2d::new(spec.hidden, ch, 1, 1, 0, rng);
        let mut decoder = Vec::with_capacity(spec.decoder.len());
        let mut dch = spec.hidden;
        for b in &spec.decoder {
            decoder.push(UpBlock::new(dch, b, rng));
            dch = b.out_channels;
        }
        Ok(Self {
            stem,
            cell,
            proj,
            decoder,
            out_conv: Conv2d::new(dch, 1, 1, 1, 0, rng),
            spec,
        })
    }

    /// Returns `N x T_pred x H x W` probability maps.
    pub fn forward(
        &mut self,
        frames: &[Tensor<T>],
        mode: Mode,
    ) -> Result<(Tensor<T>, Option<ConvLstmTape<T>>), ModelError> {
        let n = check_frames(&self.spec, frames)?;
        let (_, eh, ew) = self.spec.encoder_output()?;
        let shape = [n, self.spec.hidden, eh, ew];
        let (mut h, mut c) = (Tensor::zeros(&shape), Tensor::zeros(&shape));
        let train = mode == Mode::Train;
        let mut obs = Vec::new();
        for x in frames {
            let (e, enc) = encode(&mut self.stem, x, mode)?;
            let (h2, c2, cell) = self.cell.forward_cached(&e, &h, &c)?;
            if train {
                obs.push(ObsStep { enc, cell });
            }
            (h, c) = (h2, c2);
        }
        let (height, width, tp) = (self.spec.height, self.spec.width, self.spec.t_pred);
        let mut probs = Tensor::zeros(&[n, tp, height, width]);
        let mut steps = Vec::new();
        for s in 0..tp {
            let xin = self.proj.forward(&h)?;
            let (h2, c2, cell) = self.cell.forward_cached(&xin, &h, &c)?;
            let (m, blocks) = decode(&mut self.decoder, h2.clone(), mode)?;
            let (_, _, mh, mw) = m.dims4("convlstm decoder")?;
            let m_fit = fit_spatial(&m, height, width)?;
            let p = sigmoid(&self.out_conv.forward(&m_fit)?);
            scatter_step(&mut probs, s, &p);
            if train {
                steps.push(PredStep {
                    h_prev: h,
                    cell,
                    blocks,
                    m_extent: (mh, mw),
                    m_fit,
                    p,
                });
            }
            (h, c) = (h2, c2);
        }
        Ok((probs, train.then_some(ConvLstmTape { obs, steps })))
    }

    fn step_backward(
        &mut self,
        st: &PredStep<T>,
        dp: &Tensor<T>,
        dh: &mut Tensor<T>,
        dc: &mut Tensor<T>,
    ) -> Result<(), NnError> {
        let dlogit = sigmoid_backward(&st.p, dp);
        let dm_fit = self.out_conv.backward(&st.m_fit, &dlogit)?;
        let dm = fit_spatial_backward(&dm_fit, st.m_extent.0, st.m_extent.1)?;
        dh.add_assign(&decode_backward(&mut self.decoder, &st.blocks, dm)?);
        let (dx, mut dh_prev, dc_prev) = self.cell.backward(&st.cell, dh, dc)?;
        dh_prev.add_assign(&self.proj.backward(&st.h_prev, &dx)?);
        *dh = dh_prev;
        *dc = dc_prev;
        Ok(())
    }

    pub fn backward(
        &mut self,
        tape: &ConvLstmTape<T>,
        dprobs: &Tensor<T>,
    ) -> Result<(), ModelError> {
        let n = dprobs.shape()[0];
        let (_, eh, ew) = self.spec.encoder_output()?;
        let shape = [n, self.spec.hidden, eh, ew];
        let (mut dh, mut dc) = (Tensor::zeros(&shape), Tensor::zeros(&shape));
        for (s, st) in tape.steps.iter().enumerate().rev() {
            let dp = gather_step(dprobs, s)?;
            self.step_backward(st, &dp, &mut dh, &mut dc)?;
        }
        for st in tape.obs.iter().rev() {
            let (dx, dh_prev, dc_prev) = self.cell.backward(&st.cell, &dh, &dc)?;
            encode_backward(&mut self.stem, &st.enc, dx)?;
            (dh, dc) = (dh_prev, dc_prev);
        }
        Ok(())
    }
}
