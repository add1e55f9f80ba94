use crate::error::{Error, Result};
use crate::tensor::{axpy, dot, Tensor};

/// Fully connected layer computing `x^T W + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    /// `[in_features, out_features]`
    weights: Tensor,
    bias: Tensor,
}

#[derive(Clone, Debug)]
pub struct DenseGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

impl DenseLayer {
    pub fn new(weights: Tensor, bias: Tensor) -> Result<Self> {
        let &[_, out] = weights.dims() else {
            return Err(Error::shape(format!("dense weights must be rank 2, got {}", weights.shape())));
        };
        if bias.dims() != [out] {
            return Err(Error::shape(format!(
                "dense bias {} does not match {out} outputs",
                bias.shape()
            )));
        }
        Ok(DenseLayer { weights, bias })
    }

    pub fn zeros(in_features: usize, out_features: usize) -> Result<Self> {
        Self::new(
            Tensor::zeros([in_features, out_features])?,
            Tensor::zeros([out_features])?,
        )
    }

    pub fn in_features(&self) -> usize {
        self.weights.dims()[0]
    }

    pub fn out_features(&self) -> usize {
        self.weights.dims()[1]
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut Tensor {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut Tensor {
        &mut self.bias
    }

    pub fn params_mut(&mut self) -> (&mut Tensor, &mut Tensor) {
        (&mut self.weights, &mut self.bias)
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.rank_one_len() != Some(self.in_features()) {
            return Err(Error::shape(format!(
                "dense expects a [{}] vector, got {}",
                self.in_features(),
                x.shape()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let n = self.out_features();
        let mut out = self.bias.data().to_vec();
        for (&xi, row) in x.data().iter().zip(self.weights.data().chunks_exact(n)) {
            if xi != 0.0 {
                axpy(xi, row, &mut out);
            }
        }
        Tensor::from_vec([n], out)
    }

    pub fn backward(&self, x: &Tensor, grad_out: &Tensor) -> Result<DenseGrads> {
        self.check_input(x)?;
        let n = self.out_features();
        if grad_out.dims() != [n] {
            return Err(Error::shape(format!(
                "dense grad_out {} does not match [{n}]",
                grad_out.shape()
            )));
        }
        let g = grad_out.data();
        let w = self.weights.data();
        let grad_x = w.chunks_exact(n).map(|row| dot(row, g)).collect();
        let mut grad_w = vec![0.0; w.len()];
        for (&xi, row) in x.data().iter().zip(grad_w.chunks_exact_mut(n)) {
            if xi != 0.0 {
                axpy(xi, g, row);
            }
        }
        Ok(DenseGrads {
            input: Tensor::from_vec([self.in_features()], grad_x)?,
            weights: Tensor::from_vec(self.weights.dims().to_vec(), grad_w)?,
            bias: grad_out.clone(),
        })
    }
}

impl Tensor {
    fn rank_one_len(&self) -> Option<usize> {
        match self.dims() {
            &[n] => Some(n),
            _ => None,
        }
    }
}
