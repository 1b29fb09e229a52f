//! Frame encoder, latent projections and LSTM shared by the dense variants.

use rand::Rng;

use super::blocks::{encode, encode_backward, ConvBlock, ConvBlockCache};
use super::spec::ModelSpec;
use super::{check_frames, Mode, ModelError};
use crate::nn::{Linear, LstmCache, LstmCell, NnError, Scalar, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseCore<T> {
    pub encoder: Vec<ConvBlock<T>>,
    /// Encoder features → LSTM input.
    pub fc1: Linear<T>,
    pub lstm: LstmCell<T>,
    /// Hidden state → predicted LSTM input.
    pub fc2: Linear<T>,
}

crate::impl_module!(DenseCore {
    params: [],
    children: [encoder, fc1, lstm, fc2]
});

#[derive(Debug, Clone)]
pub struct ObsCache<T> {
    enc: Vec<ConvBlockCache<T>>,
    map_shape: Vec<usize>,
    feat: Tensor<T>,
    lstm: LstmCache<T>,
}

#[derive(Debug, Clone)]
pub struct PredCache<T> {
    h_prev: Tensor<T>,
    lstm: LstmCache<T>,
}

/// Recurrent state `(h, c)`.
pub type State<T> = (Tensor<T>, Tensor<T>);

impl<T: Scalar> DenseCore<T> {
    pub fn new<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Result<Self, ModelError> {
        let mut encoder = Vec::with_capacity(spec.encoder.len());
        let mut ch = spec.in_channels;
        for b in &spec.encoder {
            encoder.push(ConvBlock::new(ch, b, rng));
            ch = b.out_channels;
        }
        Ok(Self {
            encoder,
            fc1: Linear::new(spec.feature_dim()?, spec.latent_dim, rng),
            lstm: LstmCell::new(spec.latent_dim, spec.hidden, rng),
            fc2: Linear::new(spec.hidden, spec.latent_dim, rng),
        })
    }

    /// Encodes one frame batch into `N x F` features.
    pub fn encode_frame(
        &mut self,
        x: &Tensor<T>,
        mode: Mode,
    ) -> Result<(Tensor<T>, Vec<ConvBlockCache<T>>, Vec<usize>), NnError> {
        let (map, caches) = encode(&mut self.encoder, x, mode)?;
        let shape = map.shape().to_vec();
        let n = shape[0];
        let f = map.len() / n.max(1);
        Ok((map.reshape(&[n, f])?, caches, shape))
    }

    /// Consumes the observed frames; returns the final state.
    pub fn observe(
        &mut self,
        spec: &ModelSpec,
        frames: &[Tensor<T>],
        mode: Mode,
    ) -> Result<(State<T>, Vec<ObsCache<T>>), ModelError> {
        let n = check_frames(spec, frames)?;
        let hs = self.lstm.hidden_size();
        let mut h = Tensor::zeros(&[n, hs]);
        let mut c = Tensor::zeros(&[n, hs]);
        let mut caches = Vec::new();
        for x in frames {
            let (feat, enc, map_shape) = self.encode_frame(x, mode)?;
            let z = self.fc1.forward(&feat)?;
            let (h2, c2, lstm) = self.lstm.forward_cached(&z, &h, &c)?;
            if mode == Mode::Train {
                caches.push(ObsCache {
                    enc,
                    map_shape,
                    feat,
                    lstm,
                });
            }
            h = h2;
            c = c2;
        }
        Ok(((h, c), caches))
    }

    /// One autonomous step: the LSTM consumes `fc2(h)`.
    pub fn predict(
        &mut self,
        state: &State<T>,
        mode: Mode,
    ) -> Result<(State<T>, Option<PredCache<T>>), NnError> {
        let (h, c) = state;
        let z = self.fc2.forward(h)?;
        let (h2, c2, lstm) = self.lstm.forward_cached(&z, h, c)?;
        let cache = (mode == Mode::Train).then(|| PredCache {
            h_prev: h.clone(),
            lstm,
        });
        Ok(((h2, c2), cache))
    }

    /// Backward through one prediction step; returns the gradient of the
    /// previous state.
    pub fn predict_backward(
        &mut self,
        cache: &PredCache<T>,
        dh: &Tensor<T>,
        dc: &Tensor<T>,
    ) -> Result<State<T>, NnError> {
        let (dz, mut dh_prev, dc_prev) = self.lstm.backward(&cache.lstm, dh, dc)?;
        dh_prev.add_assign(&self.fc2.backward(&cache.h_prev, &dz)?);
        Ok((dh_prev, dc_prev))
    }

    pub fn observe_backward(
        &mut self,
        caches: &[ObsCache<T>],
        dh: Tensor<T>,
        dc: Tensor<T>,
    ) -> Result<(), NnError> {
        let (mut dh, mut dc) = (dh, dc);
        for cache in caches.iter().rev() {
            let (dz, dh_prev, dc_prev) = self.lstm.backward(&cache.lstm, &dh, &dc)?;
            let dfeat = self.fc1.backward(&cache.feat, &dz)?;
            encode_backward(
                &mut self.encoder,
                &cache.enc,
                dfeat.reshape(&cache.map_shape)?,
            )?;
            dh = dh_prev;
            dc = dc_prev;
        }
        Ok(())
    }
}
