//! 2-D cross-correlation via im2col + GEMM.

use rand::Rng;

use super::param::Param;
use super::tensor::{matmul, Scalar, Tensor};
use super::NnError;

/// Output extent of a strided window sweep, or `None` if the window never fits.
pub fn out_extent(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    if stride == 0 || kernel == 0 || padded < kernel {
        None
    } else {
        Some((padded - kernel) / stride + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeom {
    fn rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    fn cols(&self) -> usize {
        self.out_h * self.out_w
    }
}

/// Output columns `lo..hi` whose tap at kernel offset `kx` lands inside
/// the unpadded row.
fn valid_span(g: &ConvGeom, kx: usize) -> (usize, usize) {
    let (s, pad) = (g.stride, g.padding);
    let lo = if pad > kx { (pad - kx).div_ceil(s) } else { 0 };
    let hi = if g.width + pad > kx {
        ((g.width - 1 + pad - kx) / s + 1).min(g.out_w)
    } else {
        0
    };
    (lo.min(hi), hi)
}

/// Unfolds one `C x H x W` image into a `(C*k*k) x (H'*W')` matrix.
pub fn im2col<T: Scalar>(img: &[T], g: &ConvGeom, cols: &mut [T]) {
    let k = g.kernel;
    let ncols = g.cols();
    let pad = g.padding as isize;
    for c in 0..g.channels {
        let plane = &img[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let dst = &mut cols[row * ncols..(row + 1) * ncols];
                let (lo, hi) = valid_span(g, kx);
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - pad;
                    let out_row = &mut dst[oy * g.out_w..(oy + 1) * g.out_w];
                    if iy < 0 || iy >= g.height as isize {
                        out_row.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    out_row[..lo].fill(T::zero());
                    out_row[hi..].fill(T::zero());
                    let first = lo * g.stride + kx - g.padding;
                    if g.stride == 1 {
                        out_row[lo..hi].copy_from_slice(&src[first..first + hi - lo]);
                    } else {
                        for (o, &v) in out_row[lo..hi]
                            .iter_mut()
                            .zip(src[first..].iter().step_by(g.stride))
                        {
                            *o = v;
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters-adds columns back into an image.
pub fn col2im<T: Scalar>(cols: &[T], g: &ConvGeom, img: &mut [T]) {
    let k = g.kernel;
    let ncols = g.cols();
    let pad = g.padding as isize;
    for c in 0..g.channels {
        let plane = &mut img[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src = &cols[row * ncols..(row + 1) * ncols];
                let (lo, hi) = valid_span(g, kx);
                if lo >= hi {
                    continue;
                }
                let first = lo * g.stride + kx - g.padding;
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - pad;
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    let s_row = &src[oy * g.out_w + lo..oy * g.out_w + hi];
                    for (d, &v) in dst[first..].iter_mut().step_by(g.stride).zip(s_row) {
                        *d += v;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    /// `C_out x C_in x k x k`
    pub weight: Param<T>,
    /// `C_out`
    pub bias: Param<T>,
    pub stride: usize,
    pub padding: usize,
}

crate::impl_module!(Conv2d {
    params: [weight, bias],
    children: []
});

impl<T: Scalar> Conv2d<T> {
    pub fn new<R: Rng + ?Sized>(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / ((in_ch * kernel * kernel) as f64).sqrt();
        Self {
            weight: Param::new(Tensor::uniform(
                &[out_ch, in_ch, kernel, kernel],
                bound,
                rng,
            )),
            bias: Param::new(Tensor::uniform(&[out_ch], bound, rng)),
            stride,
            padding,
        }
    }

    pub fn from_weights(weight: Tensor<T>, bias: Tensor<T>, stride: usize, padding: usize) -> Self {
        Self {
            weight: Param::new(weight),
            bias: Param::new(bias),
            stride,
            padding,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn kernel(&self) -> usize {
        self.weight.value.shape()[2]
    }

    pub fn geometry(&self, x: &Tensor<T>) -> Result<(usize, ConvGeom), NnError> {
        let (n, c, h, w) = x.dims4("conv2d")?;
        if c != self.in_channels() {
            return Err(NnError::Dim {
                op: "conv2d",
                axis: "channels",
                expected: self.in_channels(),
                got: c,
            });
        }
        let k = self.kernel();
        let out_h = out_extent(h, k, self.stride, self.padding).ok_or(NnError::Dim {
            op: "conv2d",
            axis: "height",
            expected: k,
            got: h + 2 * self.padding,
        })?;
        let out_w = out_extent(w, k, self.stride, self.padding).ok_or(NnError::Dim {
            op: "conv2d",
            axis: "width",
            expected: k,
            got: w + 2 * self.padding,
        })?;
        Ok((
            n,
            ConvGeom {
                channels: c,
                height: h,
                width: w,
                kernel: k,
                stride: self.stride,
                padding: self.padding,
                out_h,
                out_w,
            },
        ))
    }

    fn is_pointwise(&self, g: &ConvGeom) -> bool {
        g.kernel == 1 && g.stride == 1 && g.padding == 0
    }

    /// `N x C_in x H x W -> N x C_out x H' x W'`.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let (n, g) = self.geometry(x)?;
        let co = self.out_channels();
        let (rows, ncols) = (g.rows(), g.cols());
        let mut out = Tensor::zeros(&[n, co, g.out_h, g.out_w]);
        let mut cols = if self.is_pointwise(&g) {
            Vec::new()
        } else {
            vec![T::zero(); rows * ncols]
        };
        let bias = self.bias.value.data();
        for i in 0..n {
            let y = out.outer_mut(i);
            for (o, &b) in bias.iter().enumerate() {
                y[o * ncols..(o + 1) * ncols].fill(b);
            }
            let src: &[T] = if self.is_pointwise(&g) {
                x.outer(i)
            } else {
                im2col(x.outer(i), &g, &mut cols);
                &cols
            };
            matmul(
                co,
                rows,
                ncols,
                self.weight.value.data(),
                false,
                src,
                false,
                y,
                true,
            );
        }
        Ok(out)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, x: &Tensor<T>, dy: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        self.backward_impl(x, dy, true)
            .map(|dx| dx.expect("input gradient requested"))
    }

    /// Like [`Conv2d::backward`] but skips the input gradient.
    pub fn backward_params(&mut self, x: &Tensor<T>, dy: &Tensor<T>) -> Result<(), NnError> {
        self.backward_impl(x, dy, false).map(|_| ())
    }

    fn backward_impl(
        &mut self,
        x: &Tensor<T>,
        dy: &Tensor<T>,
        want_dx: bool,
    ) -> Result<Option<Tensor<T>>, NnError> {
        let (n, g) = self.geometry(x)?;
        let co = self.out_channels();
        let expected = [n, co, g.out_h, g.out_w];
        if dy.shape() != expected {
            return Err(NnError::Shape {
                op: "conv2d backward",
                detail: format!(
                    "upstream gradient {:?}, expected {:?}",
                    dy.shape(),
                    expected
                ),
            });
        }
        let (rows, ncols) = (g.rows(), g.cols());
        let pointwise = self.is_pointwise(&g);
        let mut cols = if pointwise {
            Vec::new()
        } else {
            vec![T::zero(); rows * ncols]
        };
        let mut dcols = vec![T::zero(); if pointwise { 0 } else { rows * ncols }];
        let mut dx = want_dx.then(|| Tensor::zeros(x.shape()));
        for i in 0..n {
            let dyi = dy.outer(i);
            {
                let db = self.bias.grad.data_mut();
                for (o, d) in db.iter_mut().enumerate() {
                    *d += dyi[o * ncols..(o + 1) * ncols].iter().copied().sum::<T>();
                }
            }
            let src: &[T] = if pointwise {
                x.outer(i)
            } else {
                im2col(x.outer(i), &g, &mut cols);
                &cols
            };
            matmul(
                co,
                ncols,
                rows,
                dyi,
                false,
                src,
                true,
                self.weight.grad.data_mut(),
                true,
            );
            if let Some(dx) = dx.as_mut() {
                if pointwise {
                    matmul(
                        rows,
                        co,
                        ncols,
                        self.weight.value.data(),
                        true,
                        dyi,
                        false,
                        dx.outer_mut(i),
                        false,
                    );
                } else {
                    matmul(
                        rows,
                        co,
                        ncols,
                        self.weight.value.data(),
                        true,
                        dyi,
                        false,
                        &mut dcols,
                        false,
                    );
                    col2im(&dcols, &g, dx.outer_mut(i));
                }
            }
        }
        Ok(dx)
    }
}

/// Nearest-neighbour 2x upsampling, `N x C x H x W -> N x C x 2H x 2W`.
pub fn upsample2x<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    let (n, c, h, w) = x.dims4("upsample2x")?;
    let mut out = Tensor::zeros(&[n, c, 2 * h, 2 * w]);
    let src = x.data();
    let dst = out.data_mut();
    for p in 0..n * c {
        let s = &src[p * h * w..(p + 1) * h * w];
        let d = &mut dst[p * 4 * h * w..(p + 1) * 4 * h * w];
        for y in 0..2 * h {
            for xo in 0..2 * w {
                d[y * 2 * w + xo] = s[(y / 2) * w + xo / 2];
            }
        }
    }
    Ok(out)
}

pub fn upsample2x_backward<T: Scalar>(dy: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    let (n, c, h2, w2) = dy.dims4("upsample2x backward")?;
    let (h, w) = (h2 / 2, w2 / 2);
    let mut dx = Tensor::zeros(&[n, c, h, w]);
    let src = dy.data();
    let dst = dx.data_mut();
    for p in 0..n * c {
        let s = &src[p * h2 * w2..(p + 1) * h2 * w2];
        let d = &mut dst[p * h * w..(p + 1) * h * w];
        for y in 0..h2 {
            for xo in 0..w2 {
                d[(y / 2) * w + xo / 2] += s[y * w2 + xo];
            }
        }
    }
    Ok(dx)
}

/// Centre-crops or symmetrically zero-pads each spatial axis to the target
/// extent. For odd differences the extra row/column goes to the bottom/right.
pub fn fit_spatial<T: Scalar>(
    x: &Tensor<T>,
    height: usize,
    width: usize,
) -> Result<Tensor<T>, NnError> {
    let (n, c, h, w) = x.dims4("fit_spatial")?;
    let mut out = Tensor::zeros(&[n, c, height, width]);
    let (dy, dx) = (h as isize - height as isize, w as isize - width as isize);
    let (oy, ox) = (dy.div_euclid(2), dx.div_euclid(2));
    let src = x.data();
    let dst = out.data_mut();
    for p in 0..n * c {
        for y in 0..height {
            let sy = y as isize + oy;
            if sy < 0 || sy >= h as isize {
                continue;
            }
            for xo in 0..width {
                let sx = xo as isize + ox;
                if sx >= 0 && sx < w as isize {
                    dst[(p * height + y) * width + xo] =
                        src[(p * h + sy as usize) * w + sx as usize];
                }
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`fit_spatial`] back to `h x w`.
pub fn fit_spatial_backward<T: Scalar>(
    dy: &Tensor<T>,
    h: usize,
    w: usize,
) -> Result<Tensor<T>, NnError> {
    let (n, c, height, width) = dy.dims4("fit_spatial backward")?;
    let mut dx = Tensor::zeros(&[n, c, h, w]);
    let (ddy, ddx) = (h as isize - height as isize, w as isize - width as isize);
    let (oy, ox) = (ddy.div_euclid(2), ddx.div_euclid(2));
    let src = dy.data();
    let dst = dx.data_mut();
    for p in 0..n * c {
        for y in 0..height {
            let sy = y as isize + oy;
            if sy < 0 || sy >= h as isize {
                continue;
            }
            for xo in 0..width {
                let sx = xo as isize + ox;
                if sx >= 0 && sx < w as isize {
                    dst[(p * h + sy as usize) * w + sx as usize] +=
                        src[(p * height + y) * width + xo];
                }
            }
        }
    }
    Ok(dx)
}
