//! File-level operations behind the `pmu-gaf` subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::train::{encode_dataset, train_model, EpochStats, Evaluation, TrainedModel};
use crate::data::{save_events, Label};
use crate::error::{Error, Result};
use crate::gaf::{export_pgm, read_raw, write_raw};
use crate::models::ModelKind;
use crate::synth::{build_dataset, GeneratorConfig};

pub const GAF_MANIFEST: &str = "gaf_manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GafManifestEntry {
    pub event_id: String,
    pub label: Label,
    /// Relative to the manifest directory.
    pub path: String,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(&serde_json::to_value(value)?)? + "\n";
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

/// Synthesize a dataset and write it as CSVs plus `manifest.json`.
pub fn generate(generator: &GeneratorConfig, counts: [usize; 3], out: &Path) -> Result<PathBuf> {
    let data = build_dataset(generator, &crate::synth::class_counts(counts))?;
    create_dir(out)?;
    save_events(&data, out)
}

/// Encode every event of the configured dataset to a raw `.gaf` file.
pub fn encode(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    let data = cfg.dataset.load()?;
    let images = encode_dataset(&data, cfg.window_s, cfg.image_size)?;
    create_dir(&out.join("gaf"))?;
    let mut entries = Vec::with_capacity(data.len());
    for (event, img) in data.events().iter().zip(&images) {
        let rel = format!("gaf/{}.gaf", event.event_id());
        write_raw(img, &out.join(&rel))?;
        entries.push(GafManifestEntry {
            event_id: event.event_id().to_string(),
            label: event.label(),
            path: rel,
        });
    }
    let manifest = out.join(GAF_MANIFEST);
    write_json(&entries, &manifest)?;
    Ok(manifest)
}

/// Convert the raw images listed in a GAF manifest to PGM files.
pub fn export_images(gaf_manifest: &Path, out: &Path) -> Result<usize> {
    let text = fs::read_to_string(gaf_manifest).map_err(|e| Error::io(gaf_manifest, e))?;
    let entries: Vec<GafManifestEntry> = serde_json::from_str(&text)?;
    let base = gaf_manifest.parent().unwrap_or(Path::new("."));
    create_dir(out)?;
    for entry in &entries {
        let img = read_raw(&base.join(&entry.path))?;
        export_pgm(&img, &out.join(format!("{}.pgm", entry.event_id)))?;
    }
    Ok(entries.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub model: ModelKind,
    pub events: usize,
    pub seed: u64,
    pub train: Evaluation,
    pub epoch_trace: Vec<EpochStats>,
}

/// Train one model on the whole configured dataset; writes
/// `<model>.ckpt` and `<model>_train.json` to `out`.
pub fn train(cfg: &ExperimentConfig, model: ModelKind, out: &Path) -> Result<TrainSummary> {
    cfg.validate()?;
    let data = cfg.dataset.load()?;
    let (trained, trace) = train_model(&data, model, cfg, cfg.seed)?;
    let summary = TrainSummary {
        model,
        events: data.len(),
        seed: cfg.seed,
        train: trained.evaluate(&data)?,
        epoch_trace: trace,
    };
    create_dir(out)?;
    trained.save(&out.join(format!("{model}.ckpt")))?;
    write_json(&summary, &out.join(format!("{model}_train.json")))?;
    Ok(summary)
}

/// Score a checkpoint on the configured dataset; writes `evaluation.json`.
pub fn evaluate(cfg: &ExperimentConfig, checkpoint: &Path, out: &Path) -> Result<Evaluation> {
    let model = TrainedModel::load(checkpoint, cfg.window_s)?;
    let eval = model.evaluate(&cfg.dataset.load()?)?;
    create_dir(out)?;
    write_json(&eval, &out.join("evaluation.json"))?;
    Ok(eval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaf::{parse_raw, pgm_bytes};
    use crate::pipeline::config::DatasetSource;

    #[test]
    fn generate_encode_export_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = generate(&GeneratorConfig::default(), [2, 2, 2], &dir.path().join("data")).unwrap();
        let cfg = ExperimentConfig {
            dataset: DatasetSource::Manifest { path: manifest },
            image_size: 16,
            ..ExperimentConfig::default()
        };
        let gaf_manifest = encode(&cfg, &dir.path().join("enc")).unwrap();
        let n = export_images(&gaf_manifest, &dir.path().join("img")).unwrap();
        assert_eq!(n, 6);
        let raw = fs::read(dir.path().join("enc/gaf/oscillation_0001.gaf")).unwrap();
        let pgm = fs::read(dir.path().join("img/oscillation_0001.pgm")).unwrap();
        assert_eq!(pgm, pgm_bytes(&parse_raw(&raw).unwrap()));
    }

    #[test]
    fn baseline_checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            dataset: DatasetSource::Synthetic {
                generator: GeneratorConfig::default(),
                counts: [5, 5, 5],
            },
            ..ExperimentConfig::default()
        };
        for model in [ModelKind::DecisionTree, ModelKind::Svm] {
            let summary = train(&cfg, model, dir.path()).unwrap();
            let eval = evaluate(&cfg, &dir.path().join(format!("{model}.ckpt")), dir.path()).unwrap();
            assert_eq!(eval, summary.train);
        }
    }
}
