use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::baselines::{dt_fit, featurize, DecisionTree, FeatureSpec, MulticlassSvm, svm_fit_multiclass};
use crate::data::{Dataset, Label, TimeSeriesEvent};
use crate::error::{Error, Result};
use crate::gaf::{encode_event, GafImage};
use crate::models::{self, batch_gradient, LeNet, LeNetConfig, Lstm, ModelKind, Network, RecurrentConfig, Rnn};
use crate::rng::{self, Purpose};
use crate::tensor::checkpoint::Checkpoint;
use crate::tensor::optim::{AdamConfig, OptimizerState, SgdMomentumConfig};
use crate::NUM_CLASSES;

/// Minibatch schedule for one network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSpec {
    pub epochs: usize,
    pub batch_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    pub mean_loss: f64,
    /// Fraction of samples classified correctly when their batch was seen.
    pub train_accuracy: f64,
}

/// First epoch whose running train accuracy reached 95%.
pub fn epochs_to_threshold(trace: &[EpochStats], threshold: f64) -> Option<usize> {
    trace.iter().find(|s| s.train_accuracy >= threshold).map(|s| s.epoch)
}

/// Minibatch training with a reshuffle per epoch drawn from
/// `(seed, Shuffle, epoch)`. Batch gradients are averaged over the batch.
pub fn train_network(
    net: &mut dyn Network,
    optimizer: &mut OptimizerState,
    samples: &[(&GafImage, usize)],
    spec: TrainSpec,
    seed: u64,
) -> Result<Vec<EpochStats>> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if spec.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let mut trace = Vec::with_capacity(spec.epochs);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..spec.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(seed, Purpose::Shuffle, epoch as u64));
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (b, chunk) in order.chunks(spec.batch_size).enumerate() {
            let batch: Vec<(&GafImage, usize)> = chunk.iter().map(|&i| samples[i]).collect();
            let (loss, logits, mut grads) = batch_gradient(&*net, &batch)?;
            if !loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "{} loss is {loss} at epoch {}, batch {b}",
                    net.kind(),
                    epoch + 1
                )));
            }
            loss_sum += loss;
            correct += logits
                .iter()
                .zip(&batch)
                .filter(|(z, (_, t))| models::predict(&z[..]).index() == *t)
                .count();
            let inv = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| g.scale(inv));
            optimizer.step(net.params_mut(), &grads)?;
        }
        for p in net.params() {
            p.check_finite(&format!("{} parameters after epoch {}", net.kind(), epoch + 1))?;
        }
        trace.push(EpochStats {
            epoch: epoch + 1,
            mean_loss: loss_sum / samples.len() as f64,
            train_accuracy: correct as f64 / samples.len() as f64,
        });
    }
    Ok(trace)
}

/// Accuracy and confusion matrix (`confusion[true][predicted]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub confusion: [[usize; NUM_CLASSES]; NUM_CLASSES],
    pub total: usize,
}

impl Evaluation {
    pub fn from_predictions(truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::InvalidArgument("cannot evaluate on an empty set".into()));
        }
        if truth.len() != predicted.len() {
            return Err(Error::shape(format!("{} labels vs {} predictions", truth.len(), predicted.len())));
        }
        let mut confusion = [[0usize; NUM_CLASSES]; NUM_CLASSES];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= NUM_CLASSES || p >= NUM_CLASSES {
                return Err(Error::InvalidArgument(format!("class index {} out of range", t.max(p))));
            }
            confusion[t][p] += 1;
        }
        let trace: usize = (0..NUM_CLASSES).map(|k| confusion[k][k]).sum();
        Ok(Self {
            accuracy: trace as f64 / truth.len() as f64,
            confusion,
            total: truth.len(),
        })
    }

    pub fn correct(&self) -> usize {
        (0..NUM_CLASSES).map(|k| self.confusion[k][k]).sum()
    }
}

pub fn evaluate_network(net: &dyn Network, samples: &[(&GafImage, usize)]) -> Result<Evaluation> {
    let predicted: Vec<usize> = samples
        .par_iter()
        .map(|(img, _)| Ok(net.predict(img)?.index()))
        .collect::<Result<_>>()?;
    let truth: Vec<usize> = samples.iter().map(|s| s.1).collect();
    Evaluation::from_predictions(&truth, &predicted)
}

pub fn encode_dataset(data: &Dataset, window_s: f64, image_size: usize) -> Result<Vec<GafImage>> {
    data.events()
        .par_iter()
        .map(|e| encode_event(e, window_s, image_size))
        .collect()
}

fn labels_of(data: &Dataset) -> Vec<usize> {
    data.events().iter().map(|e| e.label().index()).collect()
}

/// Freshly initialised network of the given kind.
pub fn build_network(kind: ModelKind, cfg: &ExperimentConfig, seed: u64) -> Result<Box<dyn Network>> {
    Ok(match kind {
        ModelKind::Cnn => Box::new(LeNet::new(
            LeNetConfig {
                input_size: cfg.image_size,
                conv1_channels: cfg.cnn.conv1_channels,
                activation: cfg.cnn.activation,
                ..LeNetConfig::default()
            },
            seed,
        )?),
        ModelKind::Rnn => Box::new(Rnn::new(
            RecurrentConfig {
                input_size: cfg.image_size,
                hidden: cfg.rnn.hidden,
            },
            seed,
        )),
        ModelKind::Lstm => Box::new(Lstm::new(
            RecurrentConfig {
                input_size: cfg.image_size,
                hidden: cfg.lstm.hidden,
            },
            seed,
        )),
        other => return Err(Error::InvalidArgument(format!("{other} is not a neural network"))),
    })
}

/// Optimizer and schedule for a neural model kind.
pub fn training_setup(kind: ModelKind, cfg: &ExperimentConfig) -> Result<(OptimizerState, TrainSpec)> {
    Ok(match kind {
        ModelKind::Cnn => (
            OptimizerState::sgd_momentum(SgdMomentumConfig {
                learning_rate: cfg.cnn.learning_rate,
                momentum: cfg.cnn.momentum,
            }),
            TrainSpec {
                epochs: cfg.cnn.epochs,
                batch_size: cfg.cnn.batch_size,
            },
        ),
        ModelKind::Rnn | ModelKind::Lstm => {
            let h = if kind == ModelKind::Rnn { cfg.rnn } else { cfg.lstm };
            (
                OptimizerState::adam(AdamConfig::with_learning_rate(h.learning_rate)),
                TrainSpec {
                    epochs: h.epochs,
                    batch_size: h.batch_size,
                },
            )
        }
        other => return Err(Error::InvalidArgument(format!("{other} is not a neural network"))),
    })
}

/// Any fitted classifier.
pub enum TrainedModel {
    /// GAF-image classifier; events are windowed to `window_s` first.
    Network { net: Box<dyn Network>, window_s: f64 },
    Tree { tree: DecisionTree, features: FeatureSpec },
    Svm { svm: MulticlassSvm, features: FeatureSpec },
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Network { net, .. } => net.kind(),
            TrainedModel::Tree { .. } => ModelKind::DecisionTree,
            TrainedModel::Svm { .. } => ModelKind::Svm,
        }
    }

    pub fn predict_event(&self, event: &TimeSeriesEvent) -> Result<Label> {
        let index = match self {
            TrainedModel::Network { net, window_s } => {
                return net.predict(&encode_event(event, *window_s, net.input_size())?)
            }
            TrainedModel::Tree { tree, features } => tree.predict(&featurize(event, features)?)?,
            TrainedModel::Svm { svm, features } => svm.predict(&featurize(event, features)?)?,
        };
        Ok(Label::from_index(index).expect("classifiers emit valid classes"))
    }

    pub fn evaluate(&self, data: &Dataset) -> Result<Evaluation> {
        let predicted: Vec<usize> = data
            .events()
            .par_iter()
            .map(|e| Ok(self.predict_event(e)?.index()))
            .collect::<Result<_>>()?;
        Evaluation::from_predictions(&labels_of(data), &predicted)
    }

    /// Network checkpoints store the architecture config as metadata;
    /// baseline checkpoints store the feature spec.
    pub fn to_checkpoint(&self) -> Checkpoint {
        match self {
            TrainedModel::Network { net, .. } => models::to_checkpoint(net.as_ref()),
            TrainedModel::Tree { tree, features } => tree.to_checkpoint(
                ModelKind::DecisionTree.tag(),
                serde_json::to_string(features).expect("feature spec serializes"),
            ),
            TrainedModel::Svm { svm, features } => Checkpoint {
                kind: ModelKind::Svm.tag(),
                meta: serde_json::to_string(features).expect("feature spec serializes"),
                blocks: svm.to_blocks(),
            },
        }
    }

    /// `window_s` only applies to network checkpoints.
    pub fn from_checkpoint(ckpt: &Checkpoint, window_s: f64) -> Result<Self> {
        let kind = ModelKind::from_tag(ckpt.kind)
            .ok_or_else(|| Error::Checkpoint(format!("unknown model tag {}", ckpt.kind)))?;
        Ok(match kind {
            ModelKind::DecisionTree => {
                let features: FeatureSpec = serde_json::from_str(&ckpt.meta)?;
                let [table] = ckpt.blocks.as_slice() else {
                    return Err(Error::Checkpoint("decision tree needs one block".into()));
                };
                TrainedModel::Tree {
                    tree: DecisionTree::from_tensor(table, features.dimension())?,
                    features,
                }
            }
            ModelKind::Svm => TrainedModel::Svm {
                svm: MulticlassSvm::from_blocks(&ckpt.blocks)?,
                features: serde_json::from_str(&ckpt.meta)?,
            },
            _ => TrainedModel::Network {
                net: models::from_checkpoint(ckpt)?,
                window_s,
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path, window_s: f64) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?, window_s)
    }
}

/// Train one model on a dataset. Neural models also return their
/// per-epoch trace; baselines return an empty trace.
pub fn train_model(
    train: &Dataset,
    kind: ModelKind,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(TrainedModel, Vec<EpochStats>)> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let labels = labels_of(train);
    match kind {
        ModelKind::DecisionTree | ModelKind::Svm => {
            let features = cfg.baseline_features;
            let x: Vec<Vec<f64>> = train
                .events()
                .par_iter()
                .map(|e| featurize(e, &features))
                .collect::<Result<_>>()?;
            let model = if kind == ModelKind::DecisionTree {
                TrainedModel::Tree {
                    tree: dt_fit(&x, &labels, &cfg.dt)?,
                    features,
                }
            } else {
                TrainedModel::Svm {
                    svm: svm_fit_multiclass(&x, &labels, &cfg.svm)?,
                    features,
                }
            };
            Ok((model, Vec::new()))
        }
        _ => {
            let images = encode_dataset(train, cfg.window_s, cfg.image_size)?;
            let samples: Vec<(&GafImage, usize)> = images.iter().zip(labels).collect();
            let mut net = build_network(kind, cfg, seed)?;
            let (mut opt, spec) = training_setup(kind, cfg)?;
            let trace = train_network(net.as_mut(), &mut opt, &samples, spec, seed)?;
            Ok((
                TrainedModel::Network {
                    net,
                    window_s: cfg.window_s,
                },
                trace,
            ))
        }
    }
}
