#![allow(dead_code)]

use pavecnn::data::{synthetic::synthesize, to_sample, LabeledSample};
use pavecnn::nn::{ConvLayer, DenseLayer, Layer, Network, PoolLayer};
use pavecnn::{Task, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub mod cases;

pub const FD_STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
pub const PASS_FRACTION: f64 = 0.99;
/// Denominator floor so that components whose true gradient is ~0 are
/// judged on absolute error.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Default, Clone, Copy)]
pub struct GradReport {
    pub checked: usize,
    pub passed: usize,
    pub worst: f64,
}

impl GradReport {
    pub fn fraction(&self) -> f64 {
        self.passed as f64 / self.checked as f64
    }

    pub fn ok(&self) -> bool {
        self.checked > 0 && self.fraction() >= PASS_FRACTION
    }

    pub fn merge(self, other: GradReport) -> GradReport {
        GradReport {
            checked: self.checked + other.checked,
            passed: self.passed + other.passed,
            worst: self.worst.max(other.worst),
        }
    }
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares `analytic` against central differences of `loss` at `x`.
/// `loss` receives a perturbed copy of `x`.
pub fn check_gradient(x: &[f64], analytic: &[f64], loss: impl Fn(&[f64]) -> f64) -> GradReport {
    assert_eq!(x.len(), analytic.len());
    let mut probe = x.to_vec();
    let mut report = GradReport::default();
    for i in 0..x.len() {
        probe[i] = x[i] + FD_STEP;
        let up = loss(&probe);
        probe[i] = x[i] - FD_STEP;
        let down = loss(&probe);
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * FD_STEP);
        let err = rel_err(analytic[i], numeric);
        report.checked += 1;
        if err < REL_TOL {
            report.passed += 1;
        }
        report.worst = report.worst.max(err);
    }
    report
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(dims: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::random_uniform(dims.to_vec(), lo, hi, rng).unwrap()
}

/// Values bounded away from zero, for ReLU checks.
pub fn away_from_zero(dims: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let t = uniform(dims, -1.0, 1.0, rng);
    t.map(|v| if v.abs() < 1e-3 { v.signum() * 1e-2 + v } else { v })
}

pub fn with_data(t: &Tensor, data: &[f64]) -> Tensor {
    Tensor::from_vec(t.dims().to_vec(), data.to_vec()).unwrap()
}

/// conv 3@3x3 -> relu -> pool -> conv 4@3x3 -> relu -> pool -> flatten ->
/// dense 5 -> relu -> dense 3, on 18x18x1 input.
pub fn toy_network(seed: u64) -> Network {
    let mut r = rng(seed);
    let conv1 = ConvLayer::new(uniform(&[3, 3, 3, 1], -0.5, 0.5, &mut r), uniform(&[3], -0.1, 0.1, &mut r), 1).unwrap();
    let conv2 = ConvLayer::new(uniform(&[4, 3, 3, 3], -0.4, 0.4, &mut r), uniform(&[4], -0.1, 0.1, &mut r), 1).unwrap();
    let fc1 = DenseLayer::new(uniform(&[36, 5], -0.4, 0.4, &mut r), uniform(&[5], -0.1, 0.1, &mut r)).unwrap();
    let fc2 = DenseLayer::new(uniform(&[5, 3], -0.6, 0.6, &mut r), uniform(&[3], -0.1, 0.1, &mut r)).unwrap();
    Network::new(
        vec![18, 18, 1],
        vec![
            Layer::Conv(conv1),
            Layer::Relu,
            Layer::MaxPool(PoolLayer::default()),
            Layer::Conv(conv2),
            Layer::Relu,
            Layer::MaxPool(PoolLayer::default()),
            Layer::Flatten,
            Layer::Dense(fc1),
            Layer::Relu,
            Layer::Dense(fc2),
        ],
    )
    .unwrap()
}

/// Reference convolution: five nested loops straight from the definition.
pub fn naive_conv(input: &Tensor, kernels: &Tensor, bias: &Tensor, stride: usize) -> Tensor {
    let &[h, w, c_in] = input.dims() else { panic!("rank") };
    let &[c_out, kh, kw, _] = kernels.dims() else { panic!("rank") };
    let ho = (h - kh) / stride + 1;
    let wo = (w - kw) / stride + 1;
    let mut out = vec![0.0; ho * wo * c_out];
    for y in 0..ho {
        for x in 0..wo {
            for o in 0..c_out {
                let mut acc = bias.data()[o];
                for i in 0..kh {
                    for j in 0..kw {
                        for c in 0..c_in {
                            acc += input.get(&[y * stride + i, x * stride + j, c]).unwrap()
                                * kernels.get(&[o, i, j, c]).unwrap();
                        }
                    }
                }
                out[(y * wo + x) * c_out + o] = acc;
            }
        }
    }
    Tensor::from_vec([ho, wo, c_out], out).unwrap()
}

pub fn synthetic_samples(task: Task, per_class: usize, size: usize, seed: u64) -> Vec<LabeledSample> {
    synthesize(task, per_class, size, seed)
        .unwrap()
        .into_iter()
        .map(|(label, img)| to_sample(&img, size, label).unwrap())
        .collect()
}

pub fn random_int<R: Rng>(rng: &mut R, lo: usize, hi: usize) -> usize {
    rng.gen_range(lo..=hi)
}
