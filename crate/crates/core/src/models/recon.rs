use rand::Rng;

use super::blocks::{decode, decode_backward, UpBlock, UpBlockCache};
use super::dense::{DenseCore, ObsCache, PredCache};
use super::spec::ModelSpec;
use super::{gather_step, scatter_step, Mode, ModelError};
use crate::nn::{
    fit_spatial, fit_spatial_backward, sigmoid, sigmoid_backward, Conv2d, Linear, NnError, Scalar,
    Tensor,
};

/// CNN-LSTM decoding a full probability map every prediction step.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconModel<T> {
    pub spec: ModelSpec,
    pub core: DenseCore<T>,
    /// Hidden state → `seed_channels x seed_size x seed_size`.
    pub fc_dec: Linear<T>,
    pub decoder: Vec<UpBlock<T>>,
    /// 1x1 convolution to a single logit map.
    pub out_conv: Conv2d<T>,
}

crate::impl_module!(ReconModel {
    params: [],
    children: [core, fc_dec, decoder, out_conv]
});

#[derive(Debug, Clone)]
struct DecodeCache<T> {
    h: Tensor<T>,
    blocks: Vec<UpBlockCache<T>>,
    m: Tensor<T>,
    p: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct ReconTape<T> {
    obs: Vec<ObsCache<T>>,
    steps: Vec<(PredCache<T>, DecodeCache<T>)>,
}

impl<T: Scalar> ReconModel<T> {
    pub fn new<R: Rng + ?Sized>(spec: ModelSpec, rng: &mut R) -> Result<Self, ModelError> {
        spec.validate()?;
        let s = spec.seed_size;
        let mut ch = spec.seed_channels;
        let mut decoder = Vec::with_capacity(spec.decoder.len());
        let core = DenseCore::new(&spec, rng)?;
        let fc_dec = Linear::new(spec.hidden, ch * s * s, rng);
        for b in &spec.decoder {
            decoder.push(UpBlock::new(ch, b, rng));
            ch = b.out_channels;
        }
        Ok(Self {
            core,
            fc_dec,
            decoder,
            out_conv: Conv2d::new(ch, 1, 1, 1, 0, rng),
            spec,
        })
    }

    fn decode(
        &mut self,
        h: &Tensor<T>,
        mode: Mode,
    ) -> Result<(Tensor<T>, DecodeCache<T>), NnError> {
        let n = h.shape()[0];
        let s = self.spec.seed_size;
        let seed = self
            .fc_dec
            .forward(h)?
            .reshape(&[n, self.spec.seed_channels, s, s])?;
        let (m, blocks) = decode(&mut self.decoder, seed, mode)?;
        let p = sigmoid(&self.out_conv.forward(&m)?);
        let out = fit_spatial(&p, self.spec.height, self.spec.width)?;
        Ok((
            out,
            DecodeCache {
                h: h.clone(),
                blocks,
                m,
                p,
            },
        ))
    }

    fn decode_backward(
        &mut self,
        cache: &DecodeCache<T>,
        dout: &Tensor<T>,
    ) -> Result<Tensor<T>, NnError> {
        let (_, _, ph, pw) = cache.p.dims4("reconstruction decoder")?;
        let dp = fit_spatial_backward(dout, ph, pw)?;
        let dlogit = sigmoid_backward(&cache.p, &dp);
        let dm = self.out_conv.backward(&cache.m, &dlogit)?;
        let dseed = decode_backward(&mut self.decoder, &cache.blocks, dm)?;
        let n = dseed.shape()[0];
        let flat = dseed.len() / n;
        self.fc_dec.backward(&cache.h, &dseed.reshape(&[n, flat])?)
    }

    /// Returns `N x T_pred x H x W` probability maps.
    pub fn forward(
        &mut self,
        frames: &[Tensor<T>],
        mode: Mode,
    ) -> Result<(Tensor<T>, Option<ReconTape<T>>), ModelError> {
        let (mut state, obs) = self.core.observe(&self.spec, frames, mode)?;
        let n = state.0.shape()[0];
        let tp = self.spec.t_pred;
        let mut probs = Tensor::zeros(&[n, tp, self.spec.height, self.spec.width]);
        let mut steps = Vec::new();
        for s in 0..tp {
            let (next, pc) = self.core.predict(&state, mode)?;
            let (map, dc) = self.decode(&next.0, mode)?;
            scatter_step(&mut probs, s, &map);
            if let Some(pc) = pc {
                steps.push((pc, dc));
            }
            state = next;
        }
        let tape = (mode == Mode::Train).then_some(ReconTape { obs, steps });
        Ok((probs, tape))
    }

    pub fn backward(&mut self, tape: &ReconTape<T>, dprobs: &Tensor<T>) -> Result<(), ModelError> {
        let n = dprobs.shape()[0];
        let hs = self.spec.hidden;
        let mut dh = Tensor::zeros(&[n, hs]);
        let mut dc = Tensor::zeros(&[n, hs]);
        for (s, (pc, dcache)) in tape.steps.iter().enumerate().rev() {
            let dmap = gather_step(dprobs, s)?;
            dh.add_assign(&self.decode_backward(dcache, &dmap)?);
            (dh, dc) = self.core.predict_backward(pc, &dh, &dc)?;
        }
        self.core.observe_backward(&tape.obs, dh, dc)?;
        Ok(())
    }
}
