//! `pavecnn` command line: corpus generation, training, evaluation and
//! prediction.
//!
//! Exit codes: 0 success, 1 runtime or io failure, 2 usage or validation
//! failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{self, generate_synthetic_corpus, load_manifest, split_dataset, LabeledSample};
use crate::error::{Error, Result};
use crate::models::{self, build_model_sized, load_model, save_model};
use crate::task::Task;
use crate::train::{self, EarlyStopping, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "pavecnn", version, about = "Pavement crack CNN: generate, train, evaluate, predict")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled image corpus with a manifest.
    Gen(GenArgs),
    /// Train a task model on a manifest.
    Train(TrainArgs),
    /// Evaluate a model on a manifest.
    Eval(EvalArgs),
    /// Classify individual images.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub task: Task,
    /// Images per class.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub count: u64,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(32..))]
    pub size: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub task: Task,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Defaults to 30 for crack and severity, 20 for mark.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    /// Defaults to 0.2 crack, 0.1 mark, 0.3 severity.
    #[arg(long)]
    pub val_split: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    #[arg(long)]
    pub no_early_stop: bool,
    /// Network input side. Defaults to 256 for crack and mark, 500 for severity.
    #[arg(long)]
    pub input_size: Option<usize>,
    #[arg(long)]
    pub model_out: PathBuf,
    /// Per-epoch CSV log.
    #[arg(long)]
    pub log_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Fail unless the model was trained for this task.
    #[arg(long)]
    pub task: Option<Task>,
    /// Also write the confusion matrix CSV here.
    #[arg(long)]
    pub confusion_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    pub image: Vec<PathBuf>,
}

fn exit_code(err: &Error) -> i32 {
    if err.is_usage() {
        EXIT_USAGE
    } else {
        EXIT_RUNTIME
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(&a, out),
        Command::Train(a) => cmd_train(&a, out, err),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Predict(a) => cmd_predict(&a, out, err),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn emit(out: &mut dyn Write, text: std::fmt::Arguments<'_>) -> Result<()> {
    out.write_fmt(text)
        .and_then(|_| out.write_all(b"\n"))
        .map_err(|e| Error::io("<stdout>", e))
}

pub fn cmd_gen(a: &GenArgs, out: &mut dyn Write) -> Result<i32> {
    let manifest = generate_synthetic_corpus(a.task, a.count as usize, a.size as usize, a.seed, &a.out)?;
    emit(
        out,
        format_args!(
            "wrote {} images and manifest.csv to {}",
            manifest.len(),
            a.out.display()
        ),
    )?;
    Ok(EXIT_OK)
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let config = TrainConfig {
        batch_size: a.batch_size,
        learning_rate: a.lr,
        max_epochs: a.epochs.unwrap_or(a.task.default_epochs()),
        val_ratio: a.val_split.unwrap_or(a.task.default_val_ratio()),
        seed: a.seed,
        early_stopping: EarlyStopping {
            enabled: !a.no_early_stop,
            patience: a.patience,
        },
    };
    config.validate()?;
    Ok(config)
}

fn select(samples: &[LabeledSample], idx: &[usize]) -> Vec<LabeledSample> {
    idx.iter().map(|&i| samples[i].clone()).collect()
}

pub fn cmd_train(a: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let config = train_config(a)?;
    let input_size = a.input_size.unwrap_or(a.task.input_size());
    let mut model = build_model_sized(a.task, input_size, config.seed)?;
    let manifest = load_manifest(&a.manifest, a.task)?;
    let split = split_dataset(manifest.len(), config.val_ratio, config.seed)?;
    let samples = data::load_samples(&manifest, input_size)?;
    let train_set = select(&samples, &split.train);
    let val_set = select(&samples, &split.val);
    emit(
        out,
        format_args!(
            "{} ({}): {} parameters, {} train / {} validation samples",
            model.name(),
            a.task,
            models::count_parameters(&model.network),
            train_set.len(),
            val_set.len()
        ),
    )?;

    let history = train::fit_with(
        &mut model.network,
        &train_set,
        &config,
        |net, _| {
            let e = train::evaluate(net, &val_set)?;
            Ok((e.loss, e.accuracy))
        },
        |r| {
            let _ = writeln!(
                err,
                "epoch {:>3}: train_loss {:.6} train_acc {:.6} val_loss {:.6} val_acc {:.6}",
                r.epoch, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy
            );
        },
    )?;

    // Report on the weights exactly as stored in the model file.
    models::quantize(&mut model.network);
    save_model(&model, &a.model_out)?;
    if let Some(log) = &a.log_out {
        write_file(log, history.to_csv())?;
    }
    let train_eval = train::evaluate(&model.network, &train_set)?;
    let val_eval = train::evaluate(&model.network, &val_set)?;
    let all_eval = train::evaluate(&model.network, &samples)?;
    if history.stopped_early {
        emit(
            out,
            format_args!(
                "early stop after epoch {}, restored epoch {}",
                history.records.len(),
                history.best_epoch
            ),
        )?;
    }
    emit(out, format_args!("train_accuracy {:.6}", train_eval.accuracy))?;
    emit(out, format_args!("val_accuracy {:.6}", val_eval.accuracy))?;
    emit(out, format_args!("manifest_accuracy {:.6}", all_eval.accuracy))?;
    Ok(EXIT_OK)
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<i32> {
    let model = load_model(&a.model)?;
    let task = model.spec.task;
    if let Some(t) = a.task {
        if t != task {
            return Err(Error::Validation(format!("model was trained for task {task}, not {t}")));
        }
    }
    let manifest = load_manifest(&a.manifest, task)?;
    let samples = data::load_samples(&manifest, model.spec.input_size)?;
    let e = train::evaluate(&model.network, &samples)?;
    let csv = e.confusion.to_csv(task.labels());
    emit(out, format_args!("samples {}", samples.len()))?;
    emit(out, format_args!("loss {:.6}", e.loss))?;
    emit(out, format_args!("accuracy {:.6}", e.accuracy))?;
    out.write_all(csv.as_bytes()).map_err(|e| Error::io("<stdout>", e))?;
    if let Some(path) = &a.confusion_out {
        write_file(path, csv)?;
    }
    Ok(EXIT_OK)
}

pub fn cmd_predict(a: &PredictArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let model = load_model(&a.model)?;
    let task = model.spec.task;
    let mut failed = 0;
    for path in &a.image {
        let result = data::load_image(path)
            .and_then(|img| data::image_to_tensor(&img, model.spec.input_size))
            .and_then(|x| train::predict(&model.network, &x));
        match result {
            Ok(p) => {
                let probs: Vec<String> = p.probs.data().iter().map(|v| format!("{v:.6}")).collect();
                let name = task.class_name(p.class).unwrap_or("?");
                emit(out, format_args!("{},{},{}", path.display(), name, probs.join(",")))?;
            }
            Err(e) => {
                failed += 1;
                let _ = writeln!(err, "error: {}: {e}", path.display());
            }
        }
    }
    Ok(if failed > 0 { EXIT_RUNTIME } else { EXIT_OK })
}
