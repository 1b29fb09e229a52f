//! LSTM and ConvLSTM cells.
//!
//! Gate blocks are packed in the order input, forget, cell candidate, output.
//! Both cells compute
//!
//! ```text
//! i = σ(a_i)  f = σ(a_f)  g = tanh(a_g)  o = σ(a_o)
//! c' = f ⊙ c + i ⊙ g
//! h' = o ⊙ tanh(c')
//! ```
//!
//! where the pre-activations `a` come from dense products (LSTM) or 2-D
//! convolutions over the channel-concatenated `[x, h]` (ConvLSTM).

use rand::Rng;

use super::conv::Conv2d;
use super::linear::sigmoid_scalar;
use super::param::Param;
use super::tensor::{matmul, Scalar, Tensor};
use super::NnError;

/// Gate activations saved for the backward pass. All buffers are laid out as
/// `N x 4 x G` where `G` is the per-gate size (hidden units, or hidden
/// channels times spatial extent).
#[derive(Debug, Clone)]
struct GateCache<T> {
    acts: Vec<T>,
    c_prev: Vec<T>,
    tanh_c: Vec<T>,
}

/// Elementwise part shared by both cells. `pre` holds `N x 4 x G`
/// pre-activations and is overwritten by the activated gates.
fn gates_forward<T: Scalar>(
    mut pre: Vec<T>,
    c_prev: &[T],
    n: usize,
    g: usize,
) -> (Vec<T>, Vec<T>, GateCache<T>) {
    let mut h = vec![T::zero(); n * g];
    let mut c = vec![T::zero(); n * g];
    let mut tanh_c = vec![T::zero(); n * g];
    for b in 0..n {
        let base = b * 4 * g;
        for j in 0..g {
            let i = sigmoid_scalar(pre[base + j]);
            let f = sigmoid_scalar(pre[base + g + j]);
            let cand = pre[base + 2 * g + j].tanh();
            let o = sigmoid_scalar(pre[base + 3 * g + j]);
            pre[base + j] = i;
            pre[base + g + j] = f;
            pre[base + 2 * g + j] = cand;
            pre[base + 3 * g + j] = o;
            let k = b * g + j;
            let cn = f * c_prev[k] + i * cand;
            let tc = cn.tanh();
            c[k] = cn;
            tanh_c[k] = tc;
            h[k] = o * tc;
        }
    }
    (
        h,
        c,
        GateCache {
            acts: pre,
            c_prev: c_prev.to_vec(),
            tanh_c,
        },
    )
}

/// Returns `(d pre-activations, dc_prev)`.
fn gates_backward<T: Scalar>(
    cache: &GateCache<T>,
    dh: &[T],
    dc: &[T],
    n: usize,
    g: usize,
) -> (Vec<T>, Vec<T>) {
    let mut dpre = vec![T::zero(); n * 4 * g];
    let mut dc_prev = vec![T::zero(); n * g];
    let one = T::one();
    for b in 0..n {
        let base = b * 4 * g;
        for j in 0..g {
            let k = b * g + j;
            let (i, f, cand, o) = (
                cache.acts[base + j],
                cache.acts[base + g + j],
                cache.acts[base + 2 * g + j],
                cache.acts[base + 3 * g + j],
            );
            let tc = cache.tanh_c[k];
            let dct = dc[k] + dh[k] * o * (one - tc * tc);
            dpre[base + j] = dct * cand * i * (one - i);
            dpre[base + g + j] = dct * cache.c_prev[k] * f * (one - f);
            dpre[base + 2 * g + j] = dct * i * (one - cand * cand);
            dpre[base + 3 * g + j] = dh[k] * tc * o * (one - o);
            dc_prev[k] = dct * f;
        }
    }
    (dpre, dc_prev)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell<T> {
    /// `4H x in`
    pub w_ih: Param<T>,
    /// `4H x H`
    pub w_hh: Param<T>,
    pub b_ih: Param<T>,
    pub b_hh: Param<T>,
}

crate::impl_module!(LstmCell {
    params: [w_ih, w_hh, b_ih, b_hh],
    children: []
});

#[derive(Debug, Clone)]
pub struct LstmCache<T> {
    x: Tensor<T>,
    h_prev: Tensor<T>,
    gates: GateCache<T>,
}

impl<T: Scalar> LstmCell<T> {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        Self {
            w_ih: Param::new(Tensor::uniform(&[4 * hidden, input], bound, rng)),
            w_hh: Param::new(Tensor::uniform(&[4 * hidden, hidden], bound, rng)),
            b_ih: Param::new(Tensor::uniform(&[4 * hidden], bound, rng)),
            b_hh: Param::new(Tensor::uniform(&[4 * hidden], bound, rng)),
        }
    }

    pub fn zeroed(input: usize, hidden: usize) -> Self {
        Self {
            w_ih: Param::new(Tensor::zeros(&[4 * hidden, input])),
            w_hh: Param::new(Tensor::zeros(&[4 * hidden, hidden])),
            b_ih: Param::new(Tensor::zeros(&[4 * hidden])),
            b_hh: Param::new(Tensor::zeros(&[4 * hidden])),
        }
    }

    pub fn input_size(&self) -> usize {
        self.w_ih.value.shape()[1]
    }

    pub fn hidden_size(&self) -> usize {
        self.w_hh.value.shape()[1]
    }

    fn check(&self, x: &Tensor<T>, h: &Tensor<T>, c: &Tensor<T>) -> Result<usize, NnError> {
        let (n, f) = x.dims2("lstm_cell")?;
        let hs = self.hidden_size();
        if f != self.input_size() {
            return Err(NnError::Dim {
                op: "lstm_cell",
                axis: "input",
                expected: self.input_size(),
                got: f,
            });
        }
        for (t, name) in [(h, "h_prev"), (c, "c_prev")] {
            if t.shape() != [n, hs] {
                return Err(NnError::Shape {
                    op: "lstm_cell",
                    detail: format!("{name} is {:?}, expected [{n}, {hs}]", t.shape()),
                });
            }
        }
        Ok(n)
    }

    pub fn forward(
        &self,
        x: &Tensor<T>,
        h: &Tensor<T>,
        c: &Tensor<T>,
    ) -> Result<(Tensor<T>, Tensor<T>), NnError> {
        self.forward_cached(x, h, c).map(|(h, c, _)| (h, c))
    }

    pub fn forward_cached(
        &self,
        x: &Tensor<T>,
        h: &Tensor<T>,
        c: &Tensor<T>,
    ) -> Result<(Tensor<T>, Tensor<T>, LstmCache<T>), NnError> {
        let n = self.check(x, h, c)?;
        let (hs, is) = (self.hidden_size(), self.input_size());
        let g4 = 4 * hs;
        let mut pre = vec![T::zero(); n * g4];
        for b in 0..n {
            let row = &mut pre[b * g4..(b + 1) * g4];
            for ((p, &bi), &bh) in row
                .iter_mut()
                .zip(self.b_ih.value.data())
                .zip(self.b_hh.value.data())
            {
                *p = bi + bh;
            }
        }
        matmul(
            n,
            is,
            g4,
            x.data(),
            false,
            self.w_ih.value.data(),
            true,
            &mut pre,
            true,
        );
        matmul(
            n,
            hs,
            g4,
            h.data(),
            false,
            self.w_hh.value.data(),
            true,
            &mut pre,
            true,
        );
        let (h_new, c_new, gates) = gates_forward(pre, c.data(), n, hs);
        Ok((
            Tensor::from_vec(&[n, hs], h_new)?,
            Tensor::from_vec(&[n, hs], c_new)?,
            LstmCache {
                x: x.clone(),
                h_prev: h.clone(),
                gates,
            },
        ))
    }

    /// Returns `(dx, dh_prev, dc_prev)` and accumulates parameter gradients.
    pub fn backward(
        &mut self,
        cache: &LstmCache<T>,
        dh: &Tensor<T>,
        dc: &Tensor<T>,
    ) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>), NnError> {
        let (n, hs, is) = (cache.x.shape()[0], self.hidden_size(), self.input_size());
        if dh.shape() != [n, hs] || dc.shape() != [n, hs] {
            return Err(NnError::Shape {
                op: "lstm_cell backward",
                detail: format!(
                    "dh {:?}, dc {:?}, expected [{n}, {hs}]",
                    dh.shape(),
                    dc.shape()
                ),
            });
        }
        let g4 = 4 * hs;
        let (dpre, dc_prev) = gates_backward(&cache.gates, dh.data(), dc.data(), n, hs);
        matmul(
            g4,
            n,
            is,
            &dpre,
            true,
            cache.x.data(),
            false,
            self.w_ih.grad.data_mut(),
            true,
        );
        matmul(
            g4,
            n,
            hs,
            &dpre,
            true,
            cache.h_prev.data(),
            false,
            self.w_hh.grad.data_mut(),
            true,
        );
        for b in 0..n {
            let row = &dpre[b * g4..(b + 1) * g4];
            for (d, &g) in self.b_ih.grad.data_mut().iter_mut().zip(row) {
                *d += g;
            }
            for (d, &g) in self.b_hh.grad.data_mut().iter_mut().zip(row) {
                *d += g;
            }
        }
        let mut dx = Tensor::zeros(&[n, is]);
        matmul(
            n,
            g4,
            is,
            &dpre,
            false,
            self.w_ih.value.data(),
            false,
            dx.data_mut(),
            false,
        );
        let mut dh_prev = Tensor::zeros(&[n, hs]);
        matmul(
            n,
            g4,
            hs,
            &dpre,
            false,
            self.w_hh.value.data(),
            false,
            dh_prev.data_mut(),
            false,
        );
        Ok((dx, dh_prev, Tensor::from_vec(&[n, hs], dc_prev)?))
    }
}

/// Convolutional LSTM cell: one `k x k` convolution with padding `k / 2` over
/// `[x, h]` yields all four gate maps.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLstmCell<T> {
    pub conv: Conv2d<T>,
    pub hidden: usize,
}

impl<T: Scalar> super::Module<T> for ConvLstmCell<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        self.conv.visit(&super::param::join(prefix, "conv"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.conv.visit_mut(&super::param::join(prefix, "conv"), f);
    }
}

#[derive(Debug, Clone)]
pub struct ConvLstmCache<T> {
    xh: Tensor<T>,
    gates: GateCache<T>,
    input_channels: usize,
}

impl<T: Scalar> ConvLstmCell<T> {
    pub fn new<R: Rng + ?Sized>(
        input_channels: usize,
        hidden: usize,
        kernel: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            conv: Conv2d::new(
                input_channels + hidden,
                4 * hidden,
                kernel,
                1,
                kernel / 2,
                rng,
            ),
            hidden,
        }
    }

    pub fn input_channels(&self) -> usize {
        self.conv.in_channels() - self.hidden
    }

    fn check(
        &self,
        x: &Tensor<T>,
        h: &Tensor<T>,
        c: &Tensor<T>,
    ) -> Result<(usize, usize, usize), NnError> {
        let (n, _, hh, ww) = x.dims4("convlstm_cell")?;
        for (t, name) in [(h, "h_prev"), (c, "c_prev")] {
            let (tn, tc, th, tw) = t.dims4("convlstm_cell")?;
            if (tn, tc) != (n, self.hidden) {
                return Err(NnError::Shape {
                    op: "convlstm_cell",
                    detail: format!("{name} is {:?}", t.shape()),
                });
            }
            if th != hh {
                return Err(NnError::Dim {
                    op: "convlstm_cell",
                    axis: "height",
                    expected: hh,
                    got: th,
                });
            }
            if tw != ww {
                return Err(NnError::Dim {
                    op: "convlstm_cell",
                    axis: "width",
                    expected: ww,
                    got: tw,
                });
            }
        }
        Ok((n, hh, ww))
    }

    pub fn forward(
        &self,
        x: &Tensor<T>,
        h: &Tensor<T>,
        c: &Tensor<T>,
    ) -> Result<(Tensor<T>, Tensor<T>), NnError> {
        self.forward_cached(x, h, c).map(|(h, c, _)| (h, c))
    }

    pub fn forward_cached(
        &self,
        x: &Tensor<T>,
        h: &Tensor<T>,
        c: &Tensor<T>,
    ) -> Result<(Tensor<T>, Tensor<T>, ConvLstmCache<T>), NnError> {
        let (n, hh, ww) = self.check(x, h, c)?;
        let xh = Tensor::concat_channels(&[x, h])?;
        let pre = self.conv.forward(&xh)?.into_data();
        let g = self.hidden * hh * ww;
        let (h_new, c_new, gates) = gates_forward(pre, c.data(), n, g);
        let shape = [n, self.hidden, hh, ww];
        Ok((
            Tensor::from_vec(&shape, h_new)?,
            Tensor::from_vec(&shape, c_new)?,
            ConvLstmCache {
                xh,
                gates,
                input_channels: x.shape()[1],
            },
        ))
    }

    /// Returns `(dx, dh_prev, dc_prev)`.
    pub fn backward(
        &mut self,
        cache: &ConvLstmCache<T>,
        dh: &Tensor<T>,
        dc: &Tensor<T>,
    ) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>), NnError> {
        let (n, _, hh, ww) = cache.xh.dims4("convlstm_cell backward")?;
        let g = self.hidden * hh * ww;
        let expected = [n, self.hidden, hh, ww];
        if dh.shape() != expected || dc.shape() != expected {
            return Err(NnError::Shape {
                op: "convlstm_cell backward",
                detail: format!(
                    "dh {:?}, dc {:?}, expected {expected:?}",
                    dh.shape(),
                    dc.shape()
                ),
            });
        }
        let (dpre, dc_prev) = gates_backward(&cache.gates, dh.data(), dc.data(), n, g);
        let dpre = Tensor::from_vec(&[n, 4 * self.hidden, hh, ww], dpre)?;
        let dxh = self.conv.backward(&cache.xh, &dpre)?;
        let mut parts = dxh.split_channels(&[cache.input_channels, self.hidden])?;
        let dh_prev = parts.pop().expect("two parts");
        let dx = parts.pop().expect("two parts");
        Ok((dx, dh_prev, Tensor::from_vec(&expected, dc_prev)?))
    }
}
