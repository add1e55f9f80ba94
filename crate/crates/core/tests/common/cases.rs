//! Gradient and convolution checks shared by the focused tests and the
//! acceptance suite. Each returns a report instead of asserting.

use super::*;
use pavecnn::nn::{relu_backward, relu_forward, softmax_cross_entropy, ConvLayer, DenseLayer, PoolLayer};

fn projection(y: &Tensor, r: &Tensor) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn conv_case(seed: u64, in_dims: [usize; 3], k_dims: [usize; 4], stride: usize) -> GradReport {
    let mut r = rng(seed);
    let input = uniform(&in_dims, -1.0, 1.0, &mut r);
    let kernels = uniform(&k_dims, -1.0, 1.0, &mut r);
    let bias = uniform(&[k_dims[0]], -0.5, 0.5, &mut r);
    let layer = ConvLayer::new(kernels.clone(), bias.clone(), stride).unwrap();
    let proj = uniform(&layer.output_dims(&in_dims).unwrap(), -1.0, 1.0, &mut r);
    let grads = layer.backward(&input, &proj).unwrap();
    check_gradient(input.data(), grads.input.as_ref().unwrap().data(), |x| {
        projection(&layer.forward(&with_data(&input, x)).unwrap(), &proj)
    })
    .merge(check_gradient(kernels.data(), grads.kernels.data(), |k| {
        let l = ConvLayer::new(with_data(&kernels, k), bias.clone(), stride).unwrap();
        projection(&l.forward(&input).unwrap(), &proj)
    }))
    .merge(check_gradient(bias.data(), grads.bias.data(), |b| {
        let l = ConvLayer::new(kernels.clone(), with_data(&bias, b), stride).unwrap();
        projection(&l.forward(&input).unwrap(), &proj)
    }))
}

pub fn conv() -> GradReport {
    conv_case(1, [6, 6, 2], [2, 3, 3, 2], 1)
}

pub fn strided_conv() -> GradReport {
    conv_case(2, [7, 8, 3], [4, 3, 2, 3], 2)
}

pub fn dense() -> GradReport {
    let mut r = rng(3);
    let mut report = GradReport::default();
    for (n_in, n_out) in [(1, 1), (7, 3), (20, 11)] {
        let x = uniform(&[n_in], -1.0, 1.0, &mut r);
        let w = uniform(&[n_in, n_out], -1.0, 1.0, &mut r);
        let b = uniform(&[n_out], -1.0, 1.0, &mut r);
        let layer = DenseLayer::new(w.clone(), b.clone()).unwrap();
        let proj = uniform(&[n_out], -1.0, 1.0, &mut r);
        let g = layer.backward(&x, &proj).unwrap();
        report = report
            .merge(check_gradient(x.data(), g.input.data(), |v| {
                projection(&layer.forward(&with_data(&x, v)).unwrap(), &proj)
            }))
            .merge(check_gradient(w.data(), g.weights.data(), |v| {
                let l = DenseLayer::new(with_data(&w, v), b.clone()).unwrap();
                projection(&l.forward(&x).unwrap(), &proj)
            }))
            .merge(check_gradient(b.data(), g.bias.data(), |v| {
                let l = DenseLayer::new(w.clone(), with_data(&b, v)).unwrap();
                projection(&l.forward(&x).unwrap(), &proj)
            }));
    }
    report
}

/// Inputs are kept away from the kink at 0.
pub fn relu() -> GradReport {
    let mut r = rng(4);
    let x = away_from_zero(&[5, 5, 3], &mut r);
    let proj = uniform(&[5, 5, 3], -1.0, 1.0, &mut r);
    let g = relu_backward(&x, &proj).unwrap();
    check_gradient(x.data(), g.data(), |v| projection(&relu_forward(&with_data(&x, v)), &proj))
}

/// Continuous random inputs, so windows have no ties.
pub fn maxpool() -> GradReport {
    let mut r = rng(5);
    let x = uniform(&[8, 8, 2], -1.0, 1.0, &mut r);
    let pool = PoolLayer::default();
    let (y, cache) = pool.forward(&x).unwrap();
    let proj = uniform(y.dims(), -1.0, 1.0, &mut r);
    let g = pool.backward(&cache, &proj).unwrap();
    check_gradient(x.data(), g.data(), |v| projection(&pool.forward(&with_data(&x, v)).unwrap().0, &proj))
}

pub fn softmax_cross_entropy_loss() -> GradReport {
    let mut r = rng(6);
    let mut report = GradReport::default();
    for classes in [2, 3, 10] {
        let z = uniform(&[classes], -3.0, 3.0, &mut r);
        for label in 0..classes {
            let out = softmax_cross_entropy(&z, label).unwrap();
            report = report.merge(check_gradient(z.data(), out.grad_logits.data(), |v| {
                softmax_cross_entropy(&with_data(&z, v), label).unwrap().loss
            }));
        }
    }
    report
}

/// Every parameter of [`toy_network`] plus its input.
pub fn composed() -> GradReport {
    let net = toy_network(7);
    let mut r = rng(8);
    let input = uniform(&[18, 18, 1], 0.0, 1.0, &mut r);
    let label = 1;
    let loss_of = |n: &Network, x: &Tensor| softmax_cross_entropy(&n.infer(x).unwrap(), label).unwrap().loss;
    let pass = net.forward(&input).unwrap();
    let out = softmax_cross_entropy(&pass.logits, label).unwrap();
    let (grads, grad_input) = net.backward_with_input(&pass.caches, &out.grad_logits).unwrap();

    let mut report = check_gradient(input.data(), grad_input.data(), |x| loss_of(&net, &with_data(&input, x)));
    let analytic: Vec<&Tensor> = grads.tensors().collect();
    assert_eq!(analytic.len(), net.params().count());
    for (p, grad) in analytic.iter().enumerate() {
        let original = net.params().nth(p).unwrap().clone();
        report = report.merge(check_gradient(original.data(), grad.data(), |v| {
            let mut probe = net.clone();
            *probe.params_mut().nth(p).unwrap() = with_data(&original, v);
            loss_of(&probe, &input)
        }));
    }
    report
}

/// Largest absolute gap between the layer's convolution and [`naive_conv`]
/// over `configs` random shapes (sides up to 10, channels up to 4).
pub fn conv_oracle_gap(configs: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..configs {
        let kh = random_int(&mut r, 1, 5);
        let kw = random_int(&mut r, 1, 5);
        let stride = random_int(&mut r, 1, 3);
        let h = random_int(&mut r, kh, 10);
        let w = random_int(&mut r, kw, 10);
        let c_in = random_int(&mut r, 1, 4);
        let c_out = random_int(&mut r, 1, 4);
        let input = uniform(&[h, w, c_in], -2.0, 2.0, &mut r);
        let kernels = uniform(&[c_out, kh, kw, c_in], -1.0, 1.0, &mut r);
        let bias = uniform(&[c_out], -1.0, 1.0, &mut r);
        let fast = ConvLayer::new(kernels.clone(), bias.clone(), stride).unwrap().forward(&input).unwrap();
        let slow = naive_conv(&input, &kernels, &bias, stride);
        if fast.dims() != slow.dims() {
            return f64::INFINITY;
        }
        for (a, b) in fast.data().iter().zip(slow.data()) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}
