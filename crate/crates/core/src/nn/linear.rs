use rand::Rng;

use super::param::Param;
use super::tensor::{matmul, Scalar, Tensor};
use super::NnError;

/// Fully-connected layer `y = x W^T + b` on `N x in` inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    /// `out x in`
    pub weight: Param<T>,
    pub bias: Param<T>,
}

crate::impl_module!(Linear {
    params: [weight, bias],
    children: []
});

impl<T: Scalar> Linear<T> {
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        Self {
            weight: Param::new(Tensor::uniform(&[output, input], bound, rng)),
            bias: Param::new(Tensor::uniform(&[output], bound, rng)),
        }
    }

    pub fn from_weights(weight: Tensor<T>, bias: Tensor<T>) -> Self {
        Self {
            weight: Param::new(weight),
            bias: Param::new(bias),
        }
    }

    pub fn in_features(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn out_features(&self) -> usize {
        self.weight.value.shape()[0]
    }

    fn check(&self, x: &Tensor<T>) -> Result<usize, NnError> {
        let (n, f) = x.dims2("linear")?;
        if f != self.in_features() {
            return Err(NnError::Dim {
                op: "linear",
                axis: "features",
                expected: self.in_features(),
                got: f,
            });
        }
        Ok(n)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let n = self.check(x)?;
        let (o, i) = (self.out_features(), self.in_features());
        let mut y = Tensor::zeros(&[n, o]);
        for r in 0..n {
            y.outer_mut(r).copy_from_slice(self.bias.value.data());
        }
        matmul(
            n,
            i,
            o,
            x.data(),
            false,
            self.weight.value.data(),
            true,
            y.data_mut(),
            true,
        );
        Ok(y)
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&mut self, x: &Tensor<T>, dy: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let n = self.check(x)?;
        let (o, i) = (self.out_features(), self.in_features());
        if dy.shape() != [n, o] {
            return Err(NnError::Shape {
                op: "linear backward",
                detail: format!("upstream gradient {:?}, expected [{n}, {o}]", dy.shape()),
            });
        }
        matmul(
            o,
            n,
            i,
            dy.data(),
            true,
            x.data(),
            false,
            self.weight.grad.data_mut(),
            true,
        );
        let db = self.bias.grad.data_mut();
        for r in 0..n {
            for (d, &g) in db.iter_mut().zip(dy.outer(r)) {
                *d += g;
            }
        }
        let mut dx = Tensor::zeros(&[n, i]);
        matmul(
            n,
            o,
            i,
            dy.data(),
            false,
            self.weight.value.data(),
            false,
            dx.data_mut(),
            false,
        );
        Ok(dx)
    }
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient of ReLU given its output; the subgradient at 0 is 0.
pub fn relu_backward<T: Scalar>(y: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    let mut dx = dy.clone();
    for (d, &v) in dx.data_mut().iter_mut().zip(y.data()) {
        if v <= T::zero() {
            *d = T::zero();
        }
    }
    dx
}

#[inline]
pub fn sigmoid_scalar<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

pub fn sigmoid<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(sigmoid_scalar)
}

/// Gradient of the logistic function given its output.
pub fn sigmoid_backward<T: Scalar>(y: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    let mut dx = dy.clone();
    for (d, &s) in dx.data_mut().iter_mut().zip(y.data()) {
        *d *= s * (T::one() - s);
    }
    dx
}

pub fn tanh<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v.tanh())
}

pub fn tanh_backward<T: Scalar>(y: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    let mut dx = dy.clone();
    for (d, &t) in dx.data_mut().iter_mut().zip(y.data()) {
        *d *= T::one() - t * t;
    }
    dx
}
