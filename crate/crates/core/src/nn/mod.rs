//! Layers and the sequential network that chains them.

mod activation;
mod conv;
mod dense;
mod loss;
mod pool;

pub use activation::{relu_backward, relu_forward};
pub use conv::{conv_output_size, ConvGrads, ConvLayer};
pub use dense::{DenseGrads, DenseLayer};
pub use loss::{softmax, softmax_cross_entropy, LossOutput};
pub use pool::{PoolCache, PoolLayer};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Conv(ConvLayer),
    Relu,
    MaxPool(PoolLayer),
    Flatten,
    Dense(DenseLayer),
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv",
            Layer::Relu => "relu",
            Layer::MaxPool(_) => "maxpool",
            Layer::Flatten => "flatten",
            Layer::Dense(_) => "dense",
        }
    }

    pub fn output_dims(&self, input: &[usize]) -> Result<Vec<usize>> {
        match self {
            Layer::Conv(c) => Ok(c.output_dims(input)?.to_vec()),
            Layer::Relu => Ok(input.to_vec()),
            Layer::MaxPool(p) => Ok(p.output_dims(input)?.to_vec()),
            Layer::Flatten => Ok(vec![input.iter().product()]),
            Layer::Dense(d) => {
                if input != [d.in_features()] {
                    return Err(Error::shape(format!(
                        "dense expects [{}], got {input:?}",
                        d.in_features()
                    )));
                }
                Ok(vec![d.out_features()])
            }
        }
    }

    /// Weight and bias tensors, for parameterized layers.
    pub fn params(&self) -> Option<(&Tensor, &Tensor)> {
        match self {
            Layer::Conv(c) => Some((c.kernels(), c.bias())),
            Layer::Dense(d) => Some((d.weights(), d.bias())),
            _ => None,
        }
    }

    pub fn params_mut(&mut self) -> Option<(&mut Tensor, &mut Tensor)> {
        match self {
            Layer::Conv(c) => Some(c.params_mut()),
            Layer::Dense(d) => Some(d.params_mut()),
            _ => None,
        }
    }
}

/// What a layer's backward pass needs from its forward pass.
#[derive(Clone, Debug)]
pub enum LayerCache {
    Conv(Tensor),
    Relu(Tensor),
    MaxPool(PoolCache),
    Flatten(Vec<usize>),
    Dense(Tensor),
}

#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub logits: Tensor,
    pub caches: Vec<LayerCache>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads {
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Per-layer parameter gradients, `None` for layers without parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Option<ParamGrads>>,
}

impl Gradients {
    pub fn zeros_for(net: &Network) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| {
                    l.params().map(|(w, b)| ParamGrads {
                        weights: Tensor::zeros_like(w),
                        bias: Tensor::zeros_like(b),
                    })
                })
                .collect(),
        }
    }

    /// `self += other`, layer by layer.
    pub fn accumulate(&mut self, other: &Gradients) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::shape("gradient sets have different layer counts"));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            match (a, b) {
                (Some(a), Some(b)) => {
                    a.weights.add_scaled(1.0, &b.weights)?;
                    a.bias.add_scaled(1.0, &b.bias)?;
                }
                (None, None) => {}
                _ => return Err(Error::shape("gradient sets have different layouts")),
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.layers.iter_mut().flatten() {
            g.weights.data_mut().iter_mut().for_each(|v| *v *= factor);
            g.bias.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Tensors in the same order as [`Network::params_mut`].
    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flatten().flat_map(|g| [&g.weights, &g.bias])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    input_dims: Vec<usize>,
    layers: Vec<Layer>,
}

impl Network {
    /// Builds a network and checks that every layer accepts its
    /// predecessor's output.
    pub fn new(input_dims: Vec<usize>, layers: Vec<Layer>) -> Result<Self> {
        let net = Network { input_dims, layers };
        net.shape_trace()?;
        Ok(net)
    }

    pub fn input_dims(&self) -> &[usize] {
        &self.input_dims
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Output dims of every layer in order, from shape arithmetic alone.
    pub fn shape_trace(&self) -> Result<Vec<Vec<usize>>> {
        let mut dims = self.input_dims.clone();
        let mut trace = Vec::with_capacity(self.layers.len());
        for (idx, layer) in self.layers.iter().enumerate() {
            dims = layer.output_dims(&dims).map_err(|e| at_layer(idx, layer, e))?;
            trace.push(dims.clone());
        }
        Ok(trace)
    }

    pub fn output_len(&self) -> Result<usize> {
        Ok(self.shape_trace()?.last().map_or(0, |d| d.iter().product()))
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.dims() != self.input_dims.as_slice() {
            return Err(Error::shape(format!(
                "network expects input {:?}, got {}",
                self.input_dims,
                input.shape()
            )));
        }
        Ok(())
    }

    fn layer_forward(layer: &Layer, x: Tensor, keep: bool) -> Result<(Tensor, Option<LayerCache>)> {
        Ok(match layer {
            Layer::Conv(c) => {
                let y = c.forward(&x)?;
                (y, keep.then_some(LayerCache::Conv(x)))
            }
            Layer::Relu => {
                let y = relu_forward(&x);
                (y, keep.then_some(LayerCache::Relu(x)))
            }
            Layer::MaxPool(p) => {
                let (y, cache) = p.forward(&x)?;
                (y, keep.then_some(LayerCache::MaxPool(cache)))
            }
            Layer::Flatten => {
                let y = x.reshape([x.len()])?;
                (y, keep.then(|| LayerCache::Flatten(x.dims().to_vec())))
            }
            Layer::Dense(d) => {
                let y = d.forward(&x)?;
                (y, keep.then_some(LayerCache::Dense(x)))
            }
        })
    }

    /// Forward pass keeping the caches needed by [`Network::backward`].
    pub fn forward(&self, input: &Tensor) -> Result<ForwardPass> {
        self.check_input(input)?;
        let mut x = input.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (idx, layer) in self.layers.iter().enumerate() {
            let (y, cache) = Self::layer_forward(layer, x, true).map_err(|e| at_layer(idx, layer, e))?;
            caches.push(cache.expect("cache requested"));
            x = y;
        }
        Ok(ForwardPass { logits: x, caches })
    }

    /// Forward pass without caches.
    pub fn infer(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let mut x = input.clone();
        for (idx, layer) in self.layers.iter().enumerate() {
            x = Self::layer_forward(layer, x, false).map_err(|e| at_layer(idx, layer, e))?.0;
        }
        Ok(x)
    }

    /// Parameter gradients given the loss gradient at the logits.
    pub fn backward(&self, caches: &[LayerCache], grad_logits: &Tensor) -> Result<Gradients> {
        Ok(self.backward_impl(caches, grad_logits, false)?.0)
    }

    /// Like [`Network::backward`], also returning the gradient with respect
    /// to the network input.
    pub fn backward_with_input(
        &self,
        caches: &[LayerCache],
        grad_logits: &Tensor,
    ) -> Result<(Gradients, Tensor)> {
        let (grads, input) = self.backward_impl(caches, grad_logits, true)?;
        Ok((grads, input.expect("input gradient requested")))
    }

    fn backward_impl(
        &self,
        caches: &[LayerCache],
        grad_logits: &Tensor,
        want_input: bool,
    ) -> Result<(Gradients, Option<Tensor>)> {
        if caches.len() != self.layers.len() {
            return Err(Error::State(format!(
                "{} caches for {} layers",
                caches.len(),
                self.layers.len()
            )));
        }
        let mut grads = vec![None; self.layers.len()];
        let mut g = grad_logits.clone();
        for (idx, (layer, cache)) in self.layers.iter().zip(caches).enumerate().rev() {
            let need_input = want_input || idx > 0;
            let wrap = |e| at_layer(idx, layer, e);
            g = match (layer, cache) {
                (Layer::Conv(c), LayerCache::Conv(x)) => {
                    let out = c.backward_impl(x, &g, need_input).map_err(wrap)?;
                    grads[idx] = Some(ParamGrads {
                        weights: out.kernels,
                        bias: out.bias,
                    });
                    match out.input {
                        Some(gi) => gi,
                        None => break,
                    }
                }
                (Layer::Relu, LayerCache::Relu(x)) => relu_backward(x, &g).map_err(wrap)?,
                (Layer::MaxPool(p), LayerCache::MaxPool(cache)) => p.backward(cache, &g).map_err(wrap)?,
                (Layer::Flatten, LayerCache::Flatten(dims)) => g.reshape(dims.clone()).map_err(wrap)?,
                (Layer::Dense(d), LayerCache::Dense(x)) => {
                    let out = d.backward(x, &g).map_err(wrap)?;
                    grads[idx] = Some(ParamGrads {
                        weights: out.weights,
                        bias: out.bias,
                    });
                    out.input
                }
                _ => {
                    return Err(Error::State(format!(
                        "cache at layer {idx} does not belong to a {} layer",
                        layer.name()
                    )))
                }
            };
        }
        Ok((Gradients { layers: grads }, want_input.then_some(g)))
    }

    pub fn params(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().filter_map(Layer::params).flat_map(|(w, b)| [w, b])
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers
            .iter_mut()
            .filter_map(Layer::params_mut)
            .flat_map(|(w, b)| [w, b])
    }

    pub fn count_parameters(&self) -> usize {
        self.params().map(Tensor::len).sum()
    }
}

fn at_layer(idx: usize, layer: &Layer, err: Error) -> Error {
    match err {
        Error::Shape(msg) => Error::Shape(format!("layer {idx} ({}): {msg}", layer.name())),
        Error::State(msg) => Error::State(format!("layer {idx} ({}): {msg}", layer.name())),
        other => other,
    }
}
