//! Max pooling with cached argmax routing.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolLayer {
    pub window: usize,
    pub stride: usize,
}

impl Default for PoolLayer {
    fn default() -> Self {
        PoolLayer { window: 2, stride: 2 }
    }
}

/// Flat input offsets of the winning element for every output element.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolCache {
    input_dims: [usize; 3],
    argmax: Vec<usize>,
}

impl PoolCache {
    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

impl PoolLayer {
    pub fn output_dims(&self, input: &[usize]) -> Result<[usize; 3]> {
        let &[h, w, c] = input else {
            return Err(Error::shape(format!("pool input must be [H, W, C], got {input:?}")));
        };
        if self.window == 0 || self.stride == 0 {
            return Err(Error::shape("pool window and stride must be positive"));
        }
        if h < self.window || w < self.window {
            return Err(Error::shape(format!(
                "pool input {h}x{w} smaller than {0}x{0} window",
                self.window
            )));
        }
        Ok([
            (h - self.window) / self.stride + 1,
            (w - self.window) / self.stride + 1,
            c,
        ])
    }

    /// Trailing rows/columns that do not fill a window are dropped. Ties go
    /// to the first maximum in row-major order.
    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, PoolCache)> {
        let [ho, wo, c] = self.output_dims(input.dims())?;
        let w = input.dims()[1];
        let x = input.data();
        let mut out = Vec::with_capacity(ho * wo * c);
        let mut argmax = Vec::with_capacity(ho * wo * c);
        for y in 0..ho {
            for xo in 0..wo {
                for ch in 0..c {
                    let mut best = (y * self.stride * w + xo * self.stride) * c + ch;
                    for i in 0..self.window {
                        for j in 0..self.window {
                            let off = ((y * self.stride + i) * w + xo * self.stride + j) * c + ch;
                            if x[off] > x[best] {
                                best = off;
                            }
                        }
                    }
                    out.push(x[best]);
                    argmax.push(best);
                }
            }
        }
        let dims = input.dims();
        Ok((
            Tensor::from_vec([ho, wo, c], out)?,
            PoolCache {
                input_dims: [dims[0], dims[1], dims[2]],
                argmax,
            },
        ))
    }

    pub fn backward(&self, cache: &PoolCache, grad_out: &Tensor) -> Result<Tensor> {
        let expected = self.output_dims(&cache.input_dims)?;
        if grad_out.dims() != expected || cache.argmax.len() != grad_out.len() {
            return Err(Error::State(format!(
                "pool cache for output {expected:?} does not match grad_out {}",
                grad_out.shape()
            )));
        }
        let mut grad_in = Tensor::zeros(cache.input_dims.to_vec())?;
        let gi = grad_in.data_mut();
        for (&src, &g) in cache.argmax.iter().zip(grad_out.data()) {
            gi[src] += g;
        }
        Ok(grad_in)
    }
}
