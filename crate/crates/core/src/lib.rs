//! Convolutional classifiers for pavement images: crack presence, marking
//! with or without cracks, and fatigue-crack severity.
//!
//! Everything is implemented directly on a small dense [`Tensor`] type with
//! hand-written forward and backward passes per layer. Per-sample work in a
//! batch runs on rayon when the `parallel` feature is enabled (the default);
//! results are bitwise identical with or without it.

pub mod cli;
pub mod data;
pub mod error;
pub mod models;
pub mod nn;
pub mod par;
pub mod task;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use models::{build_model, build_model_sized, load_model, save_model, Model, NetworkSpec};
pub use nn::Network;
pub use task::Task;
pub use tensor::{Shape, Tensor};
