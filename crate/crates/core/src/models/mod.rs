//! Neural classifiers over GAF images: a LeNet-style CNN, a vanilla RNN
//! and an LSTM. The recurrent models read image rows as time steps and
//! classify from the final hidden state only.

mod lenet;
mod recurrent;

pub use lenet::{LeNet, LeNetConfig};
pub use recurrent::{lstm_cell, rnn_cell, Lstm, LstmGates, LstmParams, RecurrentConfig, Rnn, RnnParams};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};
use crate::gaf::GafImage;
use crate::tensor::checkpoint::Checkpoint;
use crate::tensor::ops::softmax_xent_loss;
use crate::tensor::Tensor;
use crate::NUM_CLASSES;

pub type Logits = [f64; NUM_CLASSES];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Cnn,
    Rnn,
    Lstm,
    #[serde(rename = "dt")]
    DecisionTree,
    Svm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Cnn,
        ModelKind::Rnn,
        ModelKind::Lstm,
        ModelKind::DecisionTree,
        ModelKind::Svm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Cnn => "cnn",
            ModelKind::Rnn => "rnn",
            ModelKind::Lstm => "lstm",
            ModelKind::DecisionTree => "dt",
            ModelKind::Svm => "svm",
        }
    }

    /// Checkpoint kind tag.
    pub fn tag(self) -> u32 {
        match self {
            ModelKind::Cnn => 1,
            ModelKind::Rnn => 2,
            ModelKind::Lstm => 3,
            ModelKind::DecisionTree => 4,
            ModelKind::Svm => 5,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }

    pub fn is_neural(self) -> bool {
        matches!(self, ModelKind::Cnn | ModelKind::Rnn | ModelKind::Lstm)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model `{s}`")))
    }
}

/// Result of a forward/backward pass on one sample.
#[derive(Debug, Clone)]
pub struct SampleGradient {
    pub loss: f64,
    pub logits: Logits,
    /// One tensor per parameter block, in [`Network::params`] order.
    pub grads: Vec<Tensor>,
}

/// A differentiable image classifier with a fixed topology.
pub trait Network: Send + Sync {
    fn kind(&self) -> ModelKind;

    /// Side length of the square input image.
    fn input_size(&self) -> usize;

    fn logits(&self, image: &GafImage) -> Result<Logits>;

    /// Softmax cross-entropy loss and exact parameter gradients.
    fn loss_and_grad(&self, image: &GafImage, target: usize) -> Result<SampleGradient>;

    fn params(&self) -> Vec<&Tensor>;

    fn params_mut(&mut self) -> Vec<&mut Tensor>;

    fn block_names(&self) -> Vec<&'static str>;

    /// Architecture hyperparameters as JSON (stored in checkpoints).
    fn config_json(&self) -> String;

    fn predict(&self, image: &GafImage) -> Result<Label> {
        self.logits(image).map(|z| predict(&z))
    }

    fn num_params(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }
}

pub(crate) fn check_input(image: &GafImage, expected: usize) -> Result<()> {
    if image.size() != expected {
        return Err(Error::shape(format!(
            "model expects {expected}x{expected} images, got {0}x{0}",
            image.size()
        )));
    }
    Ok(())
}

pub(crate) fn to_logits(t: &Tensor) -> Logits {
    t.data().try_into().expect("output layer has NUM_CLASSES units")
}

pub(crate) fn xent(logits: &Logits, target: usize) -> Result<(f64, Tensor)> {
    let (loss, grad) = softmax_xent_loss(logits, target)?;
    Ok((loss, Tensor::from_slice(&grad)))
}

pub fn one_hot(label: Label) -> [f64; NUM_CLASSES] {
    let mut v = [0.0; NUM_CLASSES];
    v[label.index()] = 1.0;
    v
}

/// Argmax of the logits; ties go to the lowest class index.
pub fn predict(logits: &[f64]) -> Label {
    let mut best = 0;
    for (i, &z) in logits.iter().enumerate().take(NUM_CLASSES) {
        if z > logits[best] {
            best = i;
        }
    }
    Label::from_index(best).expect("index below NUM_CLASSES")
}

/// Samples summed per chunk before chunk sums are combined. Fixing the
/// chunking (rather than leaving it to the thread pool) keeps the summation
/// order, and therefore the result, independent of the worker count.
const GRAD_CHUNK: usize = 8;

/// Summed loss, per-sample logits, and summed gradients over a batch.
pub fn batch_gradient(
    net: &dyn Network,
    batch: &[(&GafImage, usize)],
) -> Result<(f64, Vec<Logits>, Vec<Tensor>)> {
    let partials: Vec<Result<(f64, Vec<Logits>, Vec<Tensor>)>> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut loss = 0.0;
            let mut logits = Vec::with_capacity(chunk.len());
            let mut acc: Option<Vec<Tensor>> = None;
            for &(image, target) in chunk {
                let s = net.loss_and_grad(image, target)?;
                loss += s.loss;
                logits.push(s.logits);
                match acc.as_mut() {
                    None => acc = Some(s.grads),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&s.grads) {
                            a.add_assign(g)?;
                        }
                    }
                }
            }
            Ok((loss, logits, acc.unwrap_or_default()))
        })
        .collect();

    let mut loss = 0.0;
    let mut logits = Vec::with_capacity(batch.len());
    let mut total: Vec<Tensor> = net.params().iter().map(|p| p.zeros_like()).collect();
    for part in partials {
        let (l, z, g) = part?;
        loss += l;
        logits.extend(z);
        for (t, g) in total.iter_mut().zip(&g) {
            t.add_assign(g)?;
        }
    }
    Ok((loss, logits, total))
}

pub fn to_checkpoint(net: &dyn Network) -> Checkpoint {
    Checkpoint {
        kind: net.kind().tag(),
        meta: net.config_json(),
        blocks: net.params().into_iter().cloned().collect(),
    }
}

/// Rebuild a neural network from a checkpoint.
pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Box<dyn Network>> {
    let kind = ModelKind::from_tag(ckpt.kind)
        .ok_or_else(|| Error::Checkpoint(format!("unknown model tag {}", ckpt.kind)))?;
    let mut net: Box<dyn Network> = match kind {
        ModelKind::Cnn => Box::new(LeNet::zeros(serde_json::from_str(&ckpt.meta)?)?),
        ModelKind::Rnn => Box::new(Rnn::zeros(serde_json::from_str(&ckpt.meta)?)),
        ModelKind::Lstm => Box::new(Lstm::zeros(serde_json::from_str(&ckpt.meta)?)),
        other => {
            return Err(Error::Checkpoint(format!("{other} is not a neural network checkpoint")))
        }
    };
    let params = net.params_mut();
    if params.len() != ckpt.blocks.len() {
        return Err(Error::Checkpoint(format!(
            "{kind} expects {} blocks, checkpoint has {}",
            params.len(),
            ckpt.blocks.len()
        )));
    }
    for (p, b) in params.into_iter().zip(&ckpt.blocks) {
        if p.shape() != b.shape() {
            return Err(Error::Checkpoint(format!(
                "block shape {:?} does not match architecture {:?}",
                b.shape(),
                p.shape()
            )));
        }
        *p = b.clone();
    }
    Ok(net)
}
