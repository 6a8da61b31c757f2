use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{DtConfig, FeatureSpec, SvmConfig};
use crate::data::{load_events, Dataset, Label};
use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::synth::{build_dataset, class_counts, GeneratorConfig};
use crate::tensor::ops::Activation;

/// Where events come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Manifest {
        path: PathBuf,
    },
    Synthetic {
        #[serde(default)]
        generator: GeneratorConfig,
        /// Events per class in label order.
        #[serde(default = "default_counts")]
        counts: [usize; 3],
    },
}

fn default_counts() -> [usize; 3] {
    [142, 145, 87]
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic {
            generator: GeneratorConfig::default(),
            counts: default_counts(),
        }
    }
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Manifest { path } => load_events(path),
            DatasetSource::Synthetic { generator, counts } => build_dataset(generator, &class_counts(*counts)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnHyper {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub conv1_channels: usize,
    pub activation: Activation,
}

impl Default for CnnHyper {
    fn default() -> Self {
        Self {
            batch_size: 64,
            epochs: 30,
            learning_rate: 0.01,
            momentum: 0.9,
            conv1_channels: 32,
            activation: Activation::Relu,
        }
    }
}

/// Adam-trained recurrent model settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecurrentHyper {
    pub hidden: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl RecurrentHyper {
    pub fn rnn() -> Self {
        Self {
            hidden: 128,
            batch_size: 64,
            epochs: 50,
            learning_rate: 0.001,
        }
    }

    pub fn lstm() -> Self {
        Self {
            hidden: 64,
            batch_size: 64,
            epochs: 30,
            learning_rate: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub window_s: f64,
    pub image_size: usize,
    pub models: Vec<ModelKind>,
    pub fractions: Vec<f64>,
    pub cnn: CnnHyper,
    pub rnn: RecurrentHyper,
    pub lstm: RecurrentHyper,
    pub dt: DtConfig,
    pub svm: SvmConfig,
    /// Feature extraction for the decision tree and SVM.
    pub baseline_features: FeatureSpec,
    pub seed: u64,
    #[serde(skip_serializing)]
    pub out_dir: PathBuf,
    /// Also write every event's GAF image as PGM under `out_dir/images`.
    pub export_images: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::default(),
            window_s: 30.0,
            image_size: 64,
            models: ModelKind::ALL.to_vec(),
            fractions: vec![2.0 / 3.0, 3.0 / 4.0, 4.0 / 5.0],
            cnn: CnnHyper::default(),
            rnn: RecurrentHyper::rnn(),
            lstm: RecurrentHyper::lstm(),
            dt: DtConfig::default(),
            svm: SvmConfig::default(),
            baseline_features: FeatureSpec::default(),
            seed: 0,
            out_dir: PathBuf::from("out"),
            export_images: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text)?;
        // manifest paths in a config file are relative to the file
        if let DatasetSource::Manifest { path: p } = &mut cfg.dataset {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.models.is_empty() {
            return bad("at least one model must be selected".into());
        }
        if self.fractions.is_empty() {
            return bad("at least one split fraction is required".into());
        }
        if let Some(f) = self.fractions.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
            return Err(Error::InvalidFraction(*f));
        }
        if !(self.window_s > 0.0) || self.image_size < 2 {
            return bad(format!("window {} s / image size {} invalid", self.window_s, self.image_size));
        }
        if self.cnn.batch_size == 0 || self.rnn.batch_size == 0 || self.lstm.batch_size == 0 {
            return bad("batch sizes must be positive".into());
        }
        if self.rnn.hidden == 0 || self.lstm.hidden == 0 {
            return bad("hidden sizes must be positive".into());
        }
        for lr in [self.cnn.learning_rate, self.rnn.learning_rate, self.lstm.learning_rate] {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(format!("learning rate {lr} must be positive"));
            }
        }
        if !(0.0..1.0).contains(&self.cnn.momentum) {
            return bad(format!("momentum {} outside [0, 1)", self.cnn.momentum));
        }
        self.dt.validate()?;
        self.svm.validate()?;
        if let DatasetSource::Synthetic { generator, .. } = &self.dataset {
            generator.validate()?;
        }
        Ok(())
    }

    /// Models in report order (by name).
    pub fn ordered_models(&self) -> Vec<ModelKind> {
        let mut m = self.models.clone();
        m.sort_by_key(|k| k.as_str());
        m.dedup();
        m
    }

    pub fn ordered_fractions(&self) -> Vec<f64> {
        let mut f = self.fractions.clone();
        f.sort_by(f64::total_cmp);
        f.dedup();
        f
    }

    pub fn synthetic_counts(&self) -> Option<BTreeMap<Label, usize>> {
        match &self.dataset {
            DatasetSource::Synthetic { counts, .. } => Some(class_counts(*counts)),
            DatasetSource::Manifest { .. } => None,
        }
    }
}
