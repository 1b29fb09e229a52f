use super::param::Param;
use super::tensor::{Scalar, Tensor};
use super::NnError;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Per-channel batch normalization over `N x H x W`.
///
/// Train mode normalizes with the biased batch variance and folds the
/// unbiased variance into the running estimate; eval mode uses the running
/// estimates only.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm2d<T> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Param<T>,
    pub running_var: Param<T>,
}

crate::impl_module!(BatchNorm2d {
    params: [gamma, beta, running_mean, running_var],
    children: []
});

#[derive(Debug, Clone)]
pub struct BnCache<T> {
    xhat: Tensor<T>,
    inv_std: Vec<T>,
}

impl<T: Scalar> BatchNorm2d<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Param::new(Tensor::full(&[channels], T::one())),
            beta: Param::new(Tensor::zeros(&[channels])),
            running_mean: Param::buffer(Tensor::zeros(&[channels])),
            running_var: Param::buffer(Tensor::full(&[channels], T::one())),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.value.len()
    }

    fn check(&self, x: &Tensor<T>) -> Result<(usize, usize, usize), NnError> {
        let (n, c, h, w) = x.dims4("batchnorm2d")?;
        if c != self.channels() {
            return Err(NnError::Dim {
                op: "batchnorm2d",
                axis: "channels",
                expected: self.channels(),
                got: c,
            });
        }
        Ok((n, c, h * w))
    }

    pub fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let (n, c, plane) = self.check(x)?;
        let eps = T::from_f64_lossy(BN_EPS);
        let mut y = x.clone();
        let d = y.data_mut();
        for ch in 0..c {
            let inv = T::one() / (self.running_var.value.data()[ch] + eps).sqrt();
            let scale = self.gamma.value.data()[ch] * inv;
            let shift = self.beta.value.data()[ch] - self.running_mean.value.data()[ch] * scale;
            for i in 0..n {
                let off = (i * c + ch) * plane;
                for v in &mut d[off..off + plane] {
                    *v = *v * scale + shift;
                }
            }
        }
        Ok(y)
    }

    /// Batch-statistics forward; updates the running estimates.
    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, BnCache<T>), NnError> {
        let (n, c, plane) = self.check(x)?;
        let m = n * plane;
        if m <= 1 {
            return Err(NnError::BatchTooSmall {
                op: "batchnorm2d",
                elements: m,
            });
        }
        let eps = T::from_f64_lossy(BN_EPS);
        let momentum = T::from_f64_lossy(BN_MOMENTUM);
        let mf = T::from_usize(m).expect("count");
        let src = x.data();
        let mut xhat = Tensor::zeros(x.shape());
        let mut y = Tensor::zeros(x.shape());
        let mut inv_std = vec![T::zero(); c];
        for ch in 0..c {
            let mut sum = T::zero();
            for i in 0..n {
                let off = (i * c + ch) * plane;
                sum += src[off..off + plane].iter().copied().sum::<T>();
            }
            let mean = sum / mf;
            let mut sq = T::zero();
            for i in 0..n {
                let off = (i * c + ch) * plane;
                for &v in &src[off..off + plane] {
                    sq += (v - mean) * (v - mean);
                }
            }
            let var = sq / mf;
            let inv = T::one() / (var + eps).sqrt();
            inv_std[ch] = inv;
            let (g, b) = (self.gamma.value.data()[ch], self.beta.value.data()[ch]);
            for i in 0..n {
                let off = (i * c + ch) * plane;
                for k in off..off + plane {
                    let xh = (src[k] - mean) * inv;
                    xhat.data_mut()[k] = xh;
                    y.data_mut()[k] = g * xh + b;
                }
            }
            let unbiased = sq / (mf - T::one());
            let rm = &mut self.running_mean.value.data_mut()[ch];
            *rm = (T::one() - momentum) * *rm + momentum * mean;
            let rv = &mut self.running_var.value.data_mut()[ch];
            *rv = (T::one() - momentum) * *rv + momentum * unbiased;
        }
        Ok((y, BnCache { xhat, inv_std }))
    }

    pub fn backward(&mut self, cache: &BnCache<T>, dy: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        if dy.shape() != cache.xhat.shape() {
            return Err(NnError::Shape {
                op: "batchnorm2d backward",
                detail: format!("{:?} vs cached {:?}", dy.shape(), cache.xhat.shape()),
            });
        }
        let (n, c, plane) = self.check(dy)?;
        let mf = T::from_usize(n * plane).expect("count");
        let mut dx = Tensor::zeros(dy.shape());
        let (g, xh) = (dy.data(), cache.xhat.data());
        for ch in 0..c {
            let mut sum_dy = T::zero();
            let mut sum_dy_xh = T::zero();
            for i in 0..n {
                let off = (i * c + ch) * plane;
                for k in off..off + plane {
                    sum_dy += g[k];
                    sum_dy_xh += g[k] * xh[k];
                }
            }
            self.beta.grad.data_mut()[ch] += sum_dy;
            self.gamma.grad.data_mut()[ch] += sum_dy_xh;
            let scale = self.gamma.value.data()[ch] * cache.inv_std[ch] / mf;
            let d = dx.data_mut();
            for i in 0..n {
                let off = (i * c + ch) * plane;
                for k in off..off + plane {
                    d[k] = scale * (mf * g[k] - sum_dy - xh[k] * sum_dy_xh);
                }
            }
        }
        Ok(dx)
    }
}
