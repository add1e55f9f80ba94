//! Minibatch SGD, validation-driven early stopping and evaluation metrics.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{split::permutation, LabeledSample};
use crate::error::{Error, Result};
use crate::nn::{softmax, softmax_cross_entropy, Gradients, Network};
use crate::par;
use crate::task::Task;
use crate::tensor::Tensor;

/// Samples per unit of parallel work. Each chunk accumulates sequentially
/// and chunks are summed in index order, so batch gradients do not depend on
/// the thread count.
const CHUNK: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EarlyStopping {
    pub enabled: bool,
    /// Epochs without a new best validation accuracy before stopping.
    pub patience: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub val_ratio: f64,
    pub seed: u64,
    pub early_stopping: EarlyStopping,
}

impl TrainConfig {
    pub fn for_task(task: Task) -> Self {
        TrainConfig {
            batch_size: 64,
            learning_rate: 0.01,
            max_epochs: task.default_epochs(),
            val_ratio: task.default_val_ratio(),
            seed: 0,
            early_stopping: EarlyStopping {
                enabled: true,
                patience: 5,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::argument("batch size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::argument(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.max_epochs == 0 {
            return Err(Error::argument("epochs must be at least 1"));
        }
        if !(self.val_ratio > 0.0 && self.val_ratio < 1.0) {
            return Err(Error::argument(format!("validation ratio {} not in (0, 1)", self.val_ratio)));
        }
        if self.early_stopping.patience == 0 {
            return Err(Error::argument("patience must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    /// Epoch whose weights the network holds after [`fit`] returns when
    /// early stopping is enabled.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainHistory {
    /// `epoch,train_loss,train_acc,val_loss,val_acc`, six decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.6}",
                r.epoch, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy
            );
        }
        out
    }
}

/// Rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != classes * classes {
            return Err(Error::shape(format!(
                "{} counts for a {classes}x{classes} matrix",
                counts.len()
            )));
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.classes + predicted] += 1;
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes).map(|c| self.get(c, c)).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.correct() as f64 / n as f64,
        }
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.chunks_exact(self.classes).map(|r| r.iter().sum()).collect()
    }

    /// Per-class recall: correct predictions over samples of that class.
    pub fn class_accuracy(&self, class: usize) -> f64 {
        let row = self.row_sums()[class];
        if row == 0 {
            0.0
        } else {
            self.get(class, class) as f64 / row as f64
        }
    }

    /// Header `true\predicted,<names...>`, one row per true class.
    pub fn to_csv(&self, names: &[&str]) -> String {
        let mut out = String::from("true\\predicted");
        for n in names {
            let _ = write!(out, ",{n}");
        }
        out.push('\n');
        for (t, row) in self.counts.chunks_exact(self.classes).enumerate() {
            out.push_str(names.get(t).copied().unwrap_or("?"));
            for c in row {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub probs: Tensor,
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn predict(net: &Network, input: &Tensor) -> Result<Prediction> {
    let logits = net.infer(input)?;
    Ok(Prediction {
        class: argmax(logits.data()),
        probs: softmax(&logits)?,
    })
}

/// `p <- p - lr * g` for paired tensors. Nothing is updated unless every
/// pair matches in shape.
pub fn sgd_step<'p, 'g>(
    params: impl IntoIterator<Item = &'p mut Tensor>,
    grads: impl IntoIterator<Item = &'g Tensor>,
    learning_rate: f64,
) -> Result<()> {
    let params: Vec<&mut Tensor> = params.into_iter().collect();
    let grads: Vec<&Tensor> = grads.into_iter().collect();
    if params.len() != grads.len() {
        return Err(Error::shape(format!(
            "{} parameter tensors but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (p, g) in params.iter().zip(&grads) {
        p.expect_same_shape(g)?;
    }
    for (p, g) in params.into_iter().zip(grads) {
        p.add_scaled(-learning_rate, g)?;
    }
    Ok(())
}

/// Training order for one epoch, a permutation seeded by `(seed, epoch)`.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    permutation(n, &mut rng)
}

struct BatchResult {
    grads: Gradients,
    loss_sum: f64,
    correct: usize,
}

fn batch_gradients(net: &Network, samples: &[LabeledSample], batch: &[usize]) -> Result<BatchResult> {
    let chunks: Vec<&[usize]> = batch.chunks(CHUNK).collect();
    let partials = par::map(&chunks, |chunk| -> Result<BatchResult> {
        let mut acc = BatchResult {
            grads: Gradients::zeros_for(net),
            loss_sum: 0.0,
            correct: 0,
        };
        for &i in *chunk {
            let sample = &samples[i];
            let pass = net.forward(&sample.input)?;
            let out = softmax_cross_entropy(&pass.logits, sample.label)?;
            if argmax(pass.logits.data()) == sample.label {
                acc.correct += 1;
            }
            acc.loss_sum += out.loss;
            acc.grads.accumulate(&net.backward(&pass.caches, &out.grad_logits)?)?;
        }
        Ok(acc)
    });
    let mut partials = partials.into_iter();
    let mut total = partials.next().expect("batch is nonempty")?;
    for p in partials {
        let p = p?;
        total.grads.accumulate(&p.grads)?;
        total.loss_sum += p.loss_sum;
        total.correct += p.correct;
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub loss: f64,
    pub accuracy: f64,
    pub batches: usize,
}

/// One pass over `samples` in `order`, updating after every batch with the
/// batch-mean gradient. Loss and accuracy are accumulated from each
/// sample's forward pass before its batch's update.
pub fn train_epoch(
    net: &mut Network,
    samples: &[LabeledSample],
    order: &[usize],
    config: &TrainConfig,
) -> Result<EpochStats> {
    if samples.is_empty() || order.is_empty() {
        return Err(Error::argument("cannot train on an empty sample set"));
    }
    if config.batch_size == 0 {
        return Err(Error::argument("batch size must be at least 1"));
    }
    if let Some(&bad) = order.iter().find(|&&i| i >= samples.len()) {
        return Err(Error::argument(format!("order index {bad} out of range")));
    }
    let mut loss_sum = 0.0;
    let mut correct = 0;
    let mut batches = 0;
    for batch in order.chunks(config.batch_size) {
        let mut result = batch_gradients(net, samples, batch)?;
        result.grads.scale(1.0 / batch.len() as f64);
        sgd_step(net.params_mut(), result.grads.tensors(), config.learning_rate)?;
        loss_sum += result.loss_sum;
        correct += result.correct;
        batches += 1;
    }
    Ok(EpochStats {
        loss: loss_sum / order.len() as f64,
        accuracy: correct as f64 / order.len() as f64,
        batches,
    })
}

/// Mean loss, accuracy and confusion matrix. Never mutates `net`.
pub fn evaluate(net: &Network, samples: &[LabeledSample]) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::argument("cannot evaluate an empty sample set"));
    }
    let classes = net.output_len()?;
    let per_sample = par::map(samples, |s| -> Result<(f64, usize)> {
        let logits = net.infer(&s.input)?;
        let out = softmax_cross_entropy(&logits, s.label)?;
        Ok((out.loss, argmax(logits.data())))
    });
    let mut confusion = ConfusionMatrix::new(classes);
    let mut loss_sum = 0.0;
    for (s, r) in samples.iter().zip(per_sample) {
        let (loss, predicted) = r?;
        loss_sum += loss;
        confusion.record(s.label, predicted);
    }
    Ok(Evaluation {
        loss: loss_sum / samples.len() as f64,
        accuracy: confusion.accuracy(),
        confusion,
    })
}

/// Trains on `train`, scoring each epoch on `val`.
pub fn fit(
    net: &mut Network,
    train: &[LabeledSample],
    val: &[LabeledSample],
    config: &TrainConfig,
) -> Result<TrainHistory> {
    fit_with(
        net,
        train,
        config,
        |net, _| {
            let e = evaluate(net, val)?;
            Ok((e.loss, e.accuracy))
        },
        |_| {},
    )
}

/// [`fit`] with a caller-supplied validation function returning
/// `(loss, accuracy)` and a per-epoch observer.
///
/// With early stopping enabled, training halts once validation accuracy has
/// failed to beat the best seen for `patience` consecutive epochs, and the
/// network is left holding the best epoch's weights.
pub fn fit_with<V, O>(
    net: &mut Network,
    train: &[LabeledSample],
    config: &TrainConfig,
    mut validate: V,
    mut on_epoch: O,
) -> Result<TrainHistory>
where
    V: FnMut(&Network, usize) -> Result<(f64, f64)>,
    O: FnMut(&EpochRecord),
{
    config.validate()?;
    if train.is_empty() {
        return Err(Error::argument("cannot train on an empty sample set"));
    }
    let mut records = Vec::with_capacity(config.max_epochs);
    let mut best: Option<(usize, f64, Network)> = None;
    let mut stale = 0;
    let mut stopped_early = false;
    for epoch in 1..=config.max_epochs {
        let order = epoch_order(train.len(), config.seed, epoch);
        let stats = train_epoch(net, train, &order, config)?;
        let (val_loss, val_accuracy) = validate(net, epoch)?;
        let record = EpochRecord {
            epoch,
            train_loss: stats.loss,
            train_accuracy: stats.accuracy,
            val_loss,
            val_accuracy,
        };
        on_epoch(&record);
        records.push(record);

        if best.as_ref().is_none_or(|(_, acc, _)| val_accuracy > *acc) {
            best = Some((epoch, val_accuracy, net.clone()));
            stale = 0;
        } else {
            stale += 1;
        }
        if config.early_stopping.enabled && stale >= config.early_stopping.patience {
            stopped_early = epoch < config.max_epochs;
            break;
        }
    }
    let (best_epoch, _, best_net) = best.expect("at least one epoch ran");
    let best_epoch = if config.early_stopping.enabled {
        *net = best_net;
        best_epoch
    } else {
        records.len()
    };
    Ok(TrainHistory {
        records,
        best_epoch,
        stopped_early,
    })
}
