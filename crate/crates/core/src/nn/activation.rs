use crate::error::Result;
use crate::tensor::Tensor;

pub fn relu_forward(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// The derivative at exactly zero is taken as 0.
pub fn relu_backward(cached_x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    cached_x.zip_map(grad_out, |x, g| if x > 0.0 { g } else { 0.0 })
}
