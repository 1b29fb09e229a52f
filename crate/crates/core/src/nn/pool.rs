use super::conv::out_extent;
use super::tensor::{Scalar, Tensor};
use super::NnError;

/// Max pooling without padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaxPool2d {
    pub kernel: usize,
    pub stride: usize,
}

/// Flat input index of the winning element of each output cell.
#[derive(Debug, Clone)]
pub struct PoolCache {
    input_shape: Vec<usize>,
    argmax: Vec<u32>,
}

impl MaxPool2d {
    pub fn new(kernel: usize, stride: usize) -> Self {
        Self { kernel, stride }
    }

    pub fn out_shape(&self, h: usize, w: usize) -> Result<(usize, usize), NnError> {
        let oh = out_extent(h, self.kernel, self.stride, 0).ok_or(NnError::Dim {
            op: "maxpool2d",
            axis: "height",
            expected: self.kernel,
            got: h,
        })?;
        let ow = out_extent(w, self.kernel, self.stride, 0).ok_or(NnError::Dim {
            op: "maxpool2d",
            axis: "width",
            expected: self.kernel,
            got: w,
        })?;
        Ok((oh, ow))
    }

    pub fn forward<T: Scalar>(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        self.forward_cached(x).map(|(y, _)| y)
    }

    /// Ties go to the first maximal element in row-major window order.
    pub fn forward_cached<T: Scalar>(
        &self,
        x: &Tensor<T>,
    ) -> Result<(Tensor<T>, PoolCache), NnError> {
        let (n, c, h, w) = x.dims4("maxpool2d")?;
        let (oh, ow) = self.out_shape(h, w)?;
        let mut out = Tensor::zeros(&[n, c, oh, ow]);
        let mut argmax = vec![0u32; n * c * oh * ow];
        let src = x.data();
        let dst = out.data_mut();
        for p in 0..n * c {
            let base = p * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let (y0, x0) = (oy * self.stride, ox * self.stride);
                    let mut best = base + y0 * w + x0;
                    let mut best_v = src[best];
                    for ky in 0..self.kernel {
                        let row = base + (y0 + ky) * w + x0;
                        for kx in 0..self.kernel {
                            let v = src[row + kx];
                            if v > best_v {
                                best_v = v;
                                best = row + kx;
                            }
                        }
                    }
                    let o = (p * oh + oy) * ow + ox;
                    dst[o] = best_v;
                    argmax[o] = best as u32;
                }
            }
        }
        Ok((
            out,
            PoolCache {
                input_shape: x.shape().to_vec(),
                argmax,
            },
        ))
    }

    pub fn backward<T: Scalar>(
        &self,
        cache: &PoolCache,
        dy: &Tensor<T>,
    ) -> Result<Tensor<T>, NnError> {
        if dy.len() != cache.argmax.len() {
            return Err(NnError::Shape {
                op: "maxpool2d backward",
                detail: format!(
                    "upstream gradient {:?} does not match cached output",
                    dy.shape()
                ),
            });
        }
        let mut dx = Tensor::zeros(&cache.input_shape);
        let d = dx.data_mut();
        for (&i, &g) in cache.argmax.iter().zip(dy.data()) {
            d[i as usize] += g;
        }
        Ok(dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_pooling() {
        let x = Tensor::<f64>::from_vec(&[1, 1, 4, 4], (0..16).map(f64::from).collect()).unwrap();
        let y = MaxPool2d::new(3, 2).forward(&x).unwrap();
        // Windows start at rows/cols 0 only: (4 - 3) / 2 + 1 = 1.
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[10.0]);

        let x5 = Tensor::<f64>::from_vec(&[1, 1, 5, 5], (0..25).map(f64::from).collect()).unwrap();
        let y5 = MaxPool2d::new(3, 2).forward(&x5).unwrap();
        assert_eq!(y5.data(), &[12., 14., 22., 24.]);
    }

    #[test]
    fn paper_scale_shapes() {
        let pool = MaxPool2d::new(3, 2);
        assert_eq!(pool.out_shape(123, 123).unwrap(), (61, 61));
        assert_eq!(pool.out_shape(30, 30).unwrap(), (14, 14));
        assert_eq!(pool.out_shape(6, 6).unwrap(), (2, 2));
        assert!(pool.out_shape(2, 2).is_err());
    }

    #[test]
    fn ties_route_to_first_element() {
        let pool = MaxPool2d::new(3, 2);
        let x = Tensor::<f64>::full(&[1, 1, 5, 5], 2.0);
        let (y, cache) = pool.forward_cached(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 2.0));
        let dx = pool
            .backward(&cache, &Tensor::full(&[1, 1, 2, 2], 1.0))
            .unwrap();
        let mut expected = vec![0.0; 25];
        for (r, c) in [(0, 0), (0, 2), (2, 0), (2, 2)] {
            expected[r * 5 + c] = 1.0;
        }
        assert_eq!(dx.data(), &expected[..]);
    }
}
