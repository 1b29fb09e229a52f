use rand::Rng;

use super::spec::{DecoderBlockSpec, EncoderBlockSpec};
use super::Mode;
use crate::nn::{
    relu, relu_backward, upsample2x, upsample2x_backward, BatchNorm2d, BnCache, Conv2d, MaxPool2d,
    NnError, PoolCache, Scalar, Tensor,
};

/// conv → BN → ReLU → optional max-pool.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock<T> {
    pub conv: Conv2d<T>,
    pub bn: BatchNorm2d<T>,
    pub pool: Option<MaxPool2d>,
}

crate::impl_module!(ConvBlock {
    params: [],
    children: [conv, bn]
});

#[derive(Debug, Clone)]
pub struct ConvBlockCache<T> {
    x: Tensor<T>,
    bn: BnCache<T>,
    act: Tensor<T>,
    pool: Option<PoolCache>,
}

impl<T: Scalar> ConvBlock<T> {
    pub fn new<R: Rng + ?Sized>(in_ch: usize, spec: &EncoderBlockSpec, rng: &mut R) -> Self {
        Self {
            conv: Conv2d::new(
                in_ch,
                spec.out_channels,
                spec.kernel,
                spec.stride,
                spec.padding,
                rng,
            ),
            bn: BatchNorm2d::new(spec.out_channels),
            pool: spec.pool.map(|p| MaxPool2d::new(p.kernel, p.stride)),
        }
    }

    pub fn forward(
        &mut self,
        x: &Tensor<T>,
        mode: Mode,
    ) -> Result<(Tensor<T>, Option<ConvBlockCache<T>>), NnError> {
        let z = self.conv.forward(x)?;
        match mode {
            Mode::Eval => {
                let act = relu(&self.bn.forward_eval(&z)?);
                let y = match &self.pool {
                    Some(p) => p.forward(&act)?,
                    None => act,
                };
                Ok((y, None))
            }
            Mode::Train => {
                let (n, bn) = self.bn.forward_train(&z)?;
                let act = relu(&n);
                let (y, pool) = match &self.pool {
                    Some(p) => {
                        let (y, c) = p.forward_cached(&act)?;
                        (y, Some(c))
                    }
                    None => (act.clone(), None),
                };
                Ok((
                    y,
                    Some(ConvBlockCache {
                        x: x.clone(),
                        bn,
                        act,
                        pool,
                    }),
                ))
            }
        }
    }

    /// Accumulates parameter gradients; returns the input gradient when
    /// `want_dx` is set.
    pub fn backward(
        &mut self,
        cache: &ConvBlockCache<T>,
        dy: &Tensor<T>,
        want_dx: bool,
    ) -> Result<Option<Tensor<T>>, NnError> {
        let dact = match (&self.pool, &cache.pool) {
            (Some(p), Some(c)) => p.backward(c, dy)?,
            _ => dy.clone(),
        };
        let dn = relu_backward(&cache.act, &dact);
        let dz = self.bn.backward(&cache.bn, &dn)?;
        if want_dx {
            self.conv.backward(&cache.x, &dz).map(Some)
        } else {
            self.conv.backward_params(&cache.x, &dz).map(|_| None)
        }
    }
}

/// Optional 2x nearest upsample → conv 3x3 s1 p1 → BN → ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct UpBlock<T> {
    pub conv: Conv2d<T>,
    pub bn: BatchNorm2d<T>,
    pub upsample: bool,
}

crate::impl_module!(UpBlock {
    params: [],
    children: [conv, bn]
});

#[derive(Debug, Clone)]
pub struct UpBlockCache<T> {
    x: Tensor<T>,
    bn: BnCache<T>,
    act: Tensor<T>,
}

impl<T: Scalar> UpBlock<T> {
    pub fn new<R: Rng + ?Sized>(in_ch: usize, spec: &DecoderBlockSpec, rng: &mut R) -> Self {
        Self {
            conv: Conv2d::new(in_ch, spec.out_channels, 3, 1, 1, rng),
            bn: BatchNorm2d::new(spec.out_channels),
            upsample: spec.upsample,
        }
    }

    pub fn forward(
        &mut self,
        x: &Tensor<T>,
        mode: Mode,
    ) -> Result<(Tensor<T>, Option<UpBlockCache<T>>), NnError> {
        let x = if self.upsample {
            upsample2x(x)?
        } else {
            x.clone()
        };
        let z = self.conv.forward(&x)?;
        match mode {
            Mode::Eval => Ok((relu(&self.bn.forward_eval(&z)?), None)),
            Mode::Train => {
                let (n, bn) = self.bn.forward_train(&z)?;
                let act = relu(&n);
                Ok((act.clone(), Some(UpBlockCache { x, bn, act })))
            }
        }
    }

    pub fn backward(
        &mut self,
        cache: &UpBlockCache<T>,
        dy: &Tensor<T>,
    ) -> Result<Tensor<T>, NnError> {
        let dn = relu_backward(&cache.act, dy);
        let dz = self.bn.backward(&cache.bn, &dn)?;
        let dx = self.conv.backward(&cache.x, &dz)?;
        if self.upsample {
            upsample2x_backward(&dx)
        } else {
            Ok(dx)
        }
    }
}

/// Runs a block stack, collecting caches in training mode.
pub fn encode<T: Scalar>(
    blocks: &mut [ConvBlock<T>],
    x: &Tensor<T>,
    mode: Mode,
) -> Result<(Tensor<T>, Vec<ConvBlockCache<T>>), NnError> {
    let mut caches = Vec::new();
    let mut cur = x.clone();
    for b in blocks.iter_mut() {
        let (y, c) = b.forward(&cur, mode)?;
        caches.extend(c);
        cur = y;
    }
    Ok((cur, caches))
}

/// Backward through [`encode`]; the input gradient is not needed.
pub fn encode_backward<T: Scalar>(
    blocks: &mut [ConvBlock<T>],
    caches: &[ConvBlockCache<T>],
    dy: Tensor<T>,
) -> Result<(), NnError> {
    let mut d = dy;
    for (i, (b, c)) in blocks.iter_mut().zip(caches).enumerate().rev() {
        match b.backward(c, &d, i > 0)? {
            Some(dx) => d = dx,
            None => break,
        }
    }
    Ok(())
}

pub fn decode<T: Scalar>(
    blocks: &mut [UpBlock<T>],
    x: Tensor<T>,
    mode: Mode,
) -> Result<(Tensor<T>, Vec<UpBlockCache<T>>), NnError> {
    let mut caches = Vec::new();
    let mut cur = x;
    for b in blocks.iter_mut() {
        let (y, c) = b.forward(&cur, mode)?;
        caches.extend(c);
        cur = y;
    }
    Ok((cur, caches))
}

pub fn decode_backward<T: Scalar>(
    blocks: &mut [UpBlock<T>],
    caches: &[UpBlockCache<T>],
    dy: Tensor<T>,
) -> Result<Tensor<T>, NnError> {
    let mut d = dy;
    for (b, c) in blocks.iter_mut().zip(caches).rev() {
        d = b.backward(c, &d)?;
    }
    Ok(d)
}
