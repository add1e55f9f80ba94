//! Valid-padding 2-D convolution over channels-last `[H, W, C]` tensors.
//!
//! The sliding dot product is a cross-correlation: kernel element `(i, j)`
//! multiplies input pixel `(y*s + i, x*s + j)`, with no flip.

use crate::error::{Error, Result};
use crate::tensor::{axpy, Tensor};

/// Output length of a valid convolution along one axis.
pub fn conv_output_size(in_size: usize, kernel_size: usize, stride: usize) -> Result<usize> {
    if kernel_size == 0 || stride == 0 {
        return Err(Error::shape(format!(
            "kernel size {kernel_size} and stride {stride} must be positive"
        )));
    }
    if in_size < kernel_size {
        return Err(Error::shape(format!("input size {in_size} is smaller than kernel {kernel_size}")));
    }
    Ok((in_size - kernel_size) / stride + 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    /// `[C_out, kh, kw, C_in]`
    kernels: Tensor,
    /// `[C_out]`
    bias: Tensor,
    stride: usize,
}

#[derive(Clone, Debug)]
pub struct ConvGrads {
    pub input: Option<Tensor>,
    pub kernels: Tensor,
    pub bias: Tensor,
}

impl ConvLayer {
    pub fn new(kernels: Tensor, bias: Tensor, stride: usize) -> Result<Self> {
        let &[c_out, _, _, _] = kernels.dims() else {
            return Err(Error::shape(format!("conv kernels must be rank 4, got {}", kernels.shape())));
        };
        if bias.dims() != [c_out] {
            return Err(Error::shape(format!(
                "conv bias {} does not match {c_out} output channels",
                bias.shape()
            )));
        }
        if stride == 0 {
            return Err(Error::shape("conv stride must be at least 1"));
        }
        Ok(ConvLayer {
            kernels,
            bias,
            stride,
        })
    }

    pub fn zeros(c_out: usize, kernel: (usize, usize), c_in: usize, stride: usize) -> Result<Self> {
        Self::new(
            Tensor::zeros([c_out, kernel.0, kernel.1, c_in])?,
            Tensor::zeros([c_out])?,
            stride,
        )
    }

    pub fn kernels(&self) -> &Tensor {
        &self.kernels
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias
    }

    pub fn kernels_mut(&mut self) -> &mut Tensor {
        &mut self.kernels
    }

    pub fn bias_mut(&mut self) -> &mut Tensor {
        &mut self.bias
    }

    pub fn params_mut(&mut self) -> (&mut Tensor, &mut Tensor) {
        (&mut self.kernels, &mut self.bias)
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.dims()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.dims()[3]
    }

    pub fn kernel_size(&self) -> (usize, usize) {
        (self.kernels.dims()[1], self.kernels.dims()[2])
    }

    pub fn output_dims(&self, input: &[usize]) -> Result<[usize; 3]> {
        let &[h, w, c] = input else {
            return Err(Error::shape(format!("conv input must be [H, W, C], got {input:?}")));
        };
        if c != self.in_channels() {
            return Err(Error::shape(format!(
                "conv expects {} input channels, got {c}",
                self.in_channels()
            )));
        }
        let (kh, kw) = self.kernel_size();
        Ok([
            conv_output_size(h, kh, self.stride)?,
            conv_output_size(w, kw, self.stride)?,
            self.out_channels(),
        ])
    }

    /// Kernels rearranged to `[kh, kw, C_in, C_out]` so the inner loop runs
    /// over output channels.
    fn kernels_by_tap(&self) -> Vec<f64> {
        let c_out = self.out_channels();
        let taps = self.kernels.len() / c_out;
        let mut out = vec![0.0; self.kernels.len()];
        for (o, row) in self.kernels.data().chunks_exact(taps).enumerate() {
            for (t, &v) in row.iter().enumerate() {
                out[t * c_out + o] = v;
            }
        }
        out
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let [ho, wo, c_out] = self.output_dims(input.dims())?;
        let (w, c_in) = (input.dims()[1], input.dims()[2]);
        let (kh, kw) = self.kernel_size();
        let s = self.stride;
        let by_tap = self.kernels_by_tap();
        let row_taps = kw * c_in;
        let x = input.data();

        let mut out = vec![0.0; ho * wo * c_out];
        for (p, px) in out.chunks_exact_mut(c_out).enumerate() {
            let (y, xo) = (p / wo, p % wo);
            px.copy_from_slice(self.bias.data());
            for i in 0..kh {
                let base = ((y * s + i) * w + xo * s) * c_in;
                let patch = &x[base..base + row_taps];
                let taps = &by_tap[i * row_taps * c_out..(i + 1) * row_taps * c_out];
                for (&v, k) in patch.iter().zip(taps.chunks_exact(c_out)) {
                    axpy(v, k, px);
                }
            }
        }
        Tensor::from_vec([ho, wo, c_out], out)
    }

    /// Gradients of the forward map at `input`, given the gradient of the
    /// loss with respect to the output.
    pub fn backward(&self, input: &Tensor, grad_out: &Tensor) -> Result<ConvGrads> {
        self.backward_impl(input, grad_out, true)
    }

    pub(crate) fn backward_impl(
        &self,
        input: &Tensor,
        grad_out: &Tensor,
        want_input: bool,
    ) -> Result<ConvGrads> {
        let out_dims = self.output_dims(input.dims())?;
        if grad_out.dims() != out_dims {
            return Err(Error::shape(format!(
                "conv grad_out {} does not match forward output {:?}",
                grad_out.shape(),
                out_dims
            )));
        }
        let [_, wo, c_out] = out_dims;
        let (w, c_in) = (input.dims()[1], input.dims()[2]);
        let (kh, kw) = self.kernel_size();
        let s = self.stride;
        let row_taps = kw * c_in;
        let taps_total = kh * row_taps;
        let x = input.data();
        let kern = self.kernels.data();

        let mut grad_bias = vec![0.0; c_out];
        let mut grad_by_tap = vec![0.0; taps_total * c_out];
        let mut grad_in = if want_input { vec![0.0; x.len()] } else { Vec::new() };

        for (p, g) in grad_out.data().chunks_exact(c_out).enumerate() {
            let (y, xo) = (p / wo, p % wo);
            axpy(1.0, g, &mut grad_bias);
            for i in 0..kh {
                let base = ((y * s + i) * w + xo * s) * c_in;
                let patch = &x[base..base + row_taps];
                let gk = &mut grad_by_tap[i * row_taps * c_out..(i + 1) * row_taps * c_out];
                for (&v, gk_row) in patch.iter().zip(gk.chunks_exact_mut(c_out)) {
                    axpy(v, g, gk_row);
                }
                if want_input {
                    let gin = &mut grad_in[base..base + row_taps];
                    for (o, &go) in g.iter().enumerate() {
                        if go != 0.0 {
                            let k = &kern[o * taps_total + i * row_taps..][..row_taps];
                            axpy(go, k, gin);
                        }
                    }
                }
            }
        }

        let mut grad_kernels = vec![0.0; kern.len()];
        for (t, row) in grad_by_tap.chunks_exact(c_out).enumerate() {
            for (o, &v) in row.iter().enumerate() {
                grad_kernels[o * taps_total + t] = v;
            }
        }
        Ok(ConvGrads {
            input: if want_input {
                Some(Tensor::from_vec(input.dims().to_vec(), grad_in)?)
            } else {
                None
            },
            kernels: Tensor::from_vec(self.kernels.dims().to_vec(), grad_kernels)?,
            bias: Tensor::from_vec([c_out], grad_bias)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn output_size_rule() {
        assert_eq!(conv_output_size(500, 5, 1).unwrap(), 496);
        assert_eq!(conv_output_size(256, 5, 1).unwrap(), 252);
        assert_eq!(conv_output_size(7, 7, 1).unwrap(), 1);
        assert_eq!(conv_output_size(7, 3, 2).unwrap(), 3);
        assert!(matches!(conv_output_size(2, 3, 1), Err(Error::Shape(_))));
    }

    #[test]
    fn hand_computed_cross_correlation() {
        let input = Tensor::from_vec([3, 3, 1], (1..=9).map(f64::from).collect()).unwrap();
        let k = Tensor::from_vec([1, 2, 2, 1], vec![1., 0., 0., 1.]).unwrap();
        let layer = ConvLayer::new(k, Tensor::zeros([1]).unwrap(), 1).unwrap();
        let out = layer.forward(&input).unwrap();
        assert_eq!(out.dims(), &[2, 2, 1]);
        assert_eq!(out.data(), &[6., 8., 12., 14.]);
    }

    #[test]
    fn identity_kernel() {
        let input = Tensor::from_vec([2, 3, 1], vec![1., -2., 3., 4., 5., -6.]).unwrap();
        let layer = ConvLayer::new(
            Tensor::filled([1, 1, 1, 1], 1.0).unwrap(),
            Tensor::zeros([1]).unwrap(),
            1,
        )
        .unwrap();
        assert_eq!(layer.forward(&input).unwrap().data(), input.data());

        let g = Tensor::from_vec([2, 3, 1], vec![0.5, 1., 1.5, 2., 2.5, 3.]).unwrap();
        let grads = layer.backward(&input, &g).unwrap();
        assert_eq!(grads.input.unwrap(), g);
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let input = Tensor::filled([5, 5, 2], 0.3).unwrap();
        let layer = ConvLayer::new(
            Tensor::filled([3, 3, 3, 2], 0.1).unwrap(),
            Tensor::filled([3], 1.0).unwrap(),
            1,
        )
        .unwrap();
        let grads = layer.backward(&input, &Tensor::zeros([3, 3, 3]).unwrap()).unwrap();
        assert!(grads.input.unwrap().data().iter().all(|&v| v == 0.0));
        assert!(grads.kernels.data().iter().all(|&v| v == 0.0));
        assert!(grads.bias.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_errors() {
        let layer = ConvLayer::zeros(4, (3, 3), 2, 1).unwrap();
        assert!(matches!(layer.forward(&Tensor::zeros([5, 5, 1]).unwrap()), Err(Error::Shape(_))));
        assert!(matches!(layer.forward(&Tensor::zeros([2, 5, 2]).unwrap()), Err(Error::Shape(_))));
        let input = Tensor::zeros([5, 5, 2]).unwrap();
        assert!(matches!(
            layer.backward(&input, &Tensor::zeros([2, 2, 4]).unwrap()),
            Err(Error::Shape(_))
        ));
        assert!(ConvLayer::new(Tensor::zeros([2, 3, 3, 1]).unwrap(), Tensor::zeros([3]).unwrap(), 1).is_err());
    }

    #[test]
    fn bias_gradient_sums_upstream() {
        let layer = ConvLayer::zeros(2, (2, 2), 1, 1).unwrap();
        let input = Tensor::filled([3, 3, 1], 1.0).unwrap();
        let g = Tensor::from_vec([2, 2, 2], vec![1., 10., 2., 20., 3., 30., 4., 40.]).unwrap();
        let grads = layer.backward(&input, &g).unwrap();
        assert_eq!(grads.bias.data(), &[10., 100.]);
    }

    proptest! {
        #[test]
        fn shrink_rule_at_unit_stride(k in 1usize..12, extra in 0usize..300) {
            let n = k + extra;
            prop_assert_eq!(conv_output_size(n, k, 1).unwrap(), n - k + 1);
        }
    }
}
