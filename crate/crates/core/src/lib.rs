//! Power-grid disturbance classification from synchrophasor angle series.
//!
//! Each event (generation trip, load shedding, oscillation) is a single
//! angle time series. The series is embedded as a Gramian Angular Field
//! image and fed to small from-scratch neural classifiers (a LeNet-style
//! CNN, a vanilla RNN and an LSTM). A CART decision tree and an RBF SVM
//! serve as classical baselines.
//!
//! Module map:
//!
//! - [`data`]: event and dataset types, CSV/manifest IO, stratified splits
//! - [`synth`]: synthetic disturbance generator
//! - [`gaf`]: Gramian Angular Field encoding and PGM export
//! - [`tensor`]: dense tensors, layer forward/backward ops, optimizers, checkpoints
//! - [`models`]: LeNet CNN, RNN and LSTM classifiers
//! - [`baselines`]: featurization, CART, SMO-trained SVM
//! - [`pipeline`]: training loop, evaluation, experiment protocol, CLI commands

pub mod baselines;
pub mod data;
pub mod error;
pub mod gaf;
pub mod models;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod tensor;

pub use data::{Dataset, Label, SplitResult, TimeSeriesEvent};
pub use error::{Error, Result};
pub use gaf::GafImage;
pub use tensor::Tensor;

/// Number of disturbance classes handled by every classifier.
pub const NUM_CLASSES: usize = 3;
