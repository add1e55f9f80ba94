//! The task networks and their binary model file.
//!
//! All three networks share one architecture and differ only in input side
//! and class count:
//!
//! ```text
//! conv 32@5x5 -> relu -> pool
//! conv 32@3x3 -> relu -> pool
//! conv 64@3x3 -> relu -> pool
//! conv 64@3x3 -> relu -> pool
//! flatten -> dense(64) -> relu -> dense(classes)
//! ```
//!
//! # Model file
//!
//! All integers are little-endian.
//!
//! ```text
//! "PCNN"            magic, 4 bytes
//! u32               version (1)
//! u8                task tag (0 crack, 1 mark, 2 severity)
//! u32               input side length
//! u32               class count
//! u32               parameterized layer count
//! per parameterized layer, in network order:
//!   u8              layer tag (1 conv, 2 dense)
//!   u32 x 5         conv: out channels, kernel h, kernel w, in channels, stride
//!   u32 x 2         dense: in features, out features
//!   f32 ...         weights, row-major
//!   f32 ...         biases
//! ```

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{ConvLayer, DenseLayer, Layer, Network, PoolLayer};
use crate::task::Task;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"PCNN";
pub const FORMAT_VERSION: u32 = 1;

/// `(kernel count, kernel side)` of the four convolution stages.
pub const CONV_STAGES: [(usize, usize); 4] = [(32, 5), (32, 3), (64, 3), (64, 3)];

/// Width of the hidden fully connected layer.
pub const HIDDEN_UNITS: usize = 64;

const TAG_CONV: u8 = 1;
const TAG_DENSE: u8 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetworkSpec {
    pub task: Task,
    pub input_size: usize,
    pub num_classes: usize,
}

impl NetworkSpec {
    pub fn for_task(task: Task) -> Self {
        NetworkSpec {
            task,
            input_size: task.input_size(),
            num_classes: task.num_classes(),
        }
    }

    /// The task architecture on a different input side, e.g. for small
    /// synthetic images.
    pub fn with_input_size(task: Task, input_size: usize) -> Result<Self> {
        let spec = NetworkSpec {
            task,
            input_size,
            num_classes: task.num_classes(),
        };
        spec.zeroed().map_err(|e| {
            Error::argument(format!("input size {input_size} is too small for the architecture: {e}"))
        })?;
        Ok(spec)
    }

    /// Side length of the last pooled feature map.
    pub fn final_feature_side(&self) -> Result<usize> {
        let mut side = self.input_size;
        for (_, k) in CONV_STAGES {
            side = crate::nn::conv_output_size(side, k, 1)?;
            if side < 2 {
                return Err(Error::shape(format!("feature map shrinks to {side} before pooling")));
            }
            side /= 2;
        }
        Ok(side)
    }

    pub fn flatten_len(&self) -> Result<usize> {
        let side = self.final_feature_side()?;
        Ok(side * side * CONV_STAGES[3].0)
    }

    /// Layer list with all parameters zero.
    pub fn zeroed(&self) -> Result<Network> {
        let mut layers = Vec::with_capacity(15);
        let mut c_in = 1;
        for (c_out, k) in CONV_STAGES {
            layers.push(Layer::Conv(ConvLayer::zeros(c_out, (k, k), c_in, 1)?));
            layers.push(Layer::Relu);
            layers.push(Layer::MaxPool(PoolLayer::default()));
            c_in = c_out;
        }
        layers.push(Layer::Flatten);
        layers.push(Layer::Dense(DenseLayer::zeros(self.flatten_len()?, HIDDEN_UNITS)?));
        layers.push(Layer::Relu);
        layers.push(Layer::Dense(DenseLayer::zeros(HIDDEN_UNITS, self.num_classes)?));
        Network::new(vec![self.input_size, self.input_size, 1], layers)
    }
}

/// A task network together with the description it was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub spec: NetworkSpec,
    pub network: Network,
}

impl Model {
    pub fn name(&self) -> &'static str {
        self.spec.task.model_name()
    }
}

/// He-uniform weights (`±sqrt(6 / fan_in)`), zero biases.
pub fn initialize(net: &mut Network, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for layer in net.layers_mut() {
        let fan_in = match layer {
            Layer::Conv(c) => {
                let (kh, kw) = c.kernel_size();
                kh * kw * c.in_channels()
            }
            Layer::Dense(d) => d.in_features(),
            _ => continue,
        };
        let limit = (6.0 / fan_in as f64).sqrt();
        let (w, b) = layer.params_mut().expect("parameterized layer");
        *w = Tensor::random_uniform(w.dims().to_vec(), -limit, limit, &mut rng)?;
        *b = Tensor::zeros_like(b);
    }
    Ok(())
}

pub fn build_model(task: Task, seed: u64) -> Model {
    build_from_spec(NetworkSpec::for_task(task), seed).expect("paper-sized networks are valid")
}

pub fn build_model_sized(task: Task, input_size: usize, seed: u64) -> Result<Model> {
    build_from_spec(NetworkSpec::with_input_size(task, input_size)?, seed)
}

fn build_from_spec(spec: NetworkSpec, seed: u64) -> Result<Model> {
    let mut network = spec.zeroed()?;
    initialize(&mut network, seed)?;
    Ok(Model { spec, network })
}

pub fn count_parameters(net: &Network) -> usize {
    net.count_parameters()
}

/// Rounds every parameter to the nearest `f32`, as saving would.
pub fn quantize(net: &mut Network) {
    for p in net.params_mut() {
        for v in p.data_mut() {
            *v = f64::from(*v as f32);
        }
    }
}

pub fn encode(model: &Model) -> Vec<u8> {
    let net = &model.network;
    let mut out = Vec::with_capacity(32 + net.count_parameters() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(model.spec.task.tag());
    let u32_of = |v: usize| u32::try_from(v).expect("dimension fits in u32").to_le_bytes();
    out.extend_from_slice(&u32_of(model.spec.input_size));
    out.extend_from_slice(&u32_of(model.spec.num_classes));
    let param_layers: Vec<&Layer> = net.layers().iter().filter(|l| l.params().is_some()).collect();
    out.extend_from_slice(&u32_of(param_layers.len()));
    for layer in param_layers {
        let dims = match layer {
            Layer::Conv(c) => {
                out.push(TAG_CONV);
                let mut d = c.kernels().dims().to_vec();
                d.push(c.stride());
                d
            }
            Layer::Dense(d) => {
                out.push(TAG_DENSE);
                d.weights().dims().to_vec()
            }
            _ => unreachable!("filtered to parameterized layers"),
        };
        for d in dims {
            out.extend_from_slice(&u32_of(d));
        }
        let (w, b) = layer.params().expect("parameterized layer");
        for &v in w.data().iter().chain(b.data()) {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::format(format!("truncated model file while reading {what}")));
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f32s_into(&mut self, out: &mut Tensor, what: &str) -> Result<()> {
        let bytes = self.take(out.len() * 4, what)?;
        for (v, b) in out.data_mut().iter_mut().zip(bytes.chunks_exact(4)) {
            *v = f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
        }
        Ok(())
    }
}

pub fn decode(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::format("not a model file (bad magic)"));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION as usize {
        return Err(Error::format(format!("unsupported model version {version}")));
    }
    let tag = r.u8("task")?;
    let task = Task::from_tag(tag).ok_or_else(|| Error::format(format!("unknown task tag {tag}")))?;
    let input_size = r.u32("input size")?;
    let num_classes = r.u32("class count")?;
    if num_classes != task.num_classes() {
        return Err(Error::format(format!(
            "{num_classes} classes declared for task {task}, which has {}",
            task.num_classes()
        )));
    }
    let spec = NetworkSpec::with_input_size(task, input_size)
        .map_err(|e| Error::format(format!("inconsistent model header: {e}")))?;
    let mut network = spec.zeroed()?;
    let expected_layers = network.layers().iter().filter(|l| l.params().is_some()).count();
    let count = r.u32("layer count")?;
    if count != expected_layers {
        return Err(Error::format(format!(
            "{count} parameterized layers declared, architecture has {expected_layers}"
        )));
    }
    for (idx, layer) in network.layers_mut().iter_mut().enumerate() {
        let (want_tag, want_dims) = match layer {
            Layer::Conv(c) => {
                let mut d = c.kernels().dims().to_vec();
                d.push(c.stride());
                (TAG_CONV, d)
            }
            Layer::Dense(d) => (TAG_DENSE, d.weights().dims().to_vec()),
            _ => continue,
        };
        let tag = r.u8("layer tag")?;
        if tag != want_tag {
            return Err(Error::format(format!("layer {idx}: tag {tag}, expected {want_tag}")));
        }
        let dims = (0..want_dims.len())
            .map(|_| r.u32("layer dimensions"))
            .collect::<Result<Vec<_>>>()?;
        if dims != want_dims {
            return Err(Error::format(format!(
                "layer {idx}: dimensions {dims:?} do not match {want_dims:?} for {task} at input {input_size}"
            )));
        }
        let (w, b) = layer.params_mut().expect("parameterized layer");
        r.f32s_into(w, "weights")?;
        r.f32s_into(b, "biases")?;
    }
    if r.pos != bytes.len() {
        return Err(Error::format(format!("{} trailing bytes after model", bytes.len() - r.pos)));
    }
    Ok(Model { spec, network })
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
