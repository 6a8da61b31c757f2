use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::ExperimentConfig;
use super::train::{epochs_to_threshold, train_model, EpochStats, Evaluation};
use crate::data::{stratified_split, Dataset, Label};
use crate::error::{Error, Result};
use crate::gaf::{encode_event, export_pgm};
use crate::models::ModelKind;

/// Running train accuracy that counts as "trained".
pub const TRAIN_ACCURACY_TARGET: f64 = 0.95;

/// One (model, fraction) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub model: ModelKind,
    pub fraction: f64,
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    /// Final model on the training partition.
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// `confusion[true][predicted]` on the test partition.
    pub confusion: [[usize; 3]; 3],
    pub epochs_run: usize,
    pub epochs_to_95pct_train: Option<usize>,
    pub epoch_trace: Vec<EpochStats>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub events: usize,
    pub class_counts: BTreeMap<Label, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    /// Ordered by model name, then fraction.
    pub cells: Vec<CellReport>,
}

impl ExperimentReport {
    pub fn cell(&self, model: ModelKind, fraction: f64) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.model == model && (c.fraction - fraction).abs() < 1e-12)
    }

    /// Pretty JSON with lexicographically sorted keys and a trailing newline.
    pub fn to_json(&self) -> Result<String> {
        let value: Value = serde_json::to_value(self)?;
        Ok(serde_json::to_string_pretty(&value)? + "\n")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

/// Report JSON with every `wall_time_s` field removed, for determinism checks.
pub fn without_wall_time(json: &str) -> Result<String> {
    fn strip(v: &mut Value) {
        match v {
            Value::Object(map) => {
                map.remove("wall_time_s");
                map.values_mut().for_each(strip);
            }
            Value::Array(items) => items.iter_mut().for_each(strip),
            _ => {}
        }
    }
    let mut value: Value = serde_json::from_str(json)?;
    strip(&mut value);
    Ok(serde_json::to_string_pretty(&value)?)
}

pub fn run_cell(data: &Dataset, model: ModelKind, fraction: f64, cfg: &ExperimentConfig) -> Result<CellReport> {
    let start = Instant::now();
    let split = stratified_split(data, fraction, cfg.seed)?;
    let (trained, trace) = train_model(&split.train, model, cfg, cfg.seed)?;
    let train_eval = trained.evaluate(&split.train)?;
    let test_eval: Evaluation = trained.evaluate(&split.test)?;
    Ok(CellReport {
        model,
        fraction,
        seed: cfg.seed,
        train_size: split.train.len(),
        test_size: split.test.len(),
        train_accuracy: train_eval.accuracy,
        test_accuracy: test_eval.accuracy,
        confusion: test_eval.confusion,
        epochs_run: trace.len(),
        epochs_to_95pct_train: epochs_to_threshold(&trace, TRAIN_ACCURACY_TARGET),
        epoch_trace: trace,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Every (model, fraction) cell on one dataset. Writes `report.json` (and
/// optionally PGM images) under `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let data = cfg.dataset.load()?;
    let report = run_experiment_on(cfg, &data)?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    report.write(&cfg.out_dir.join("report.json"))?;
    if cfg.export_images {
        let dir = cfg.out_dir.join("images");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for event in data.events() {
            let img = encode_event(event, cfg.window_s, cfg.image_size)?;
            export_pgm(&img, &dir.join(format!("{}.pgm", event.event_id())))?;
        }
    }
    Ok(report)
}

/// Like [`run_experiment`] on an already loaded dataset, without writing
/// anything.
pub fn run_experiment_on(cfg: &ExperimentConfig, data: &Dataset) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for model in cfg.ordered_models() {
        for fraction in cfg.ordered_fractions() {
            let cell = run_cell(data, model, fraction, cfg).map_err(|e| Error::Cell {
                context: format!("model {model}, fraction {fraction:.4}"),
                source: Box::new(e),
            })?;
            cells.push(cell);
        }
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        dataset: DatasetSummary {
            events: data.len(),
            class_counts: data.class_counts().clone(),
        },
        cells,
    })
}
