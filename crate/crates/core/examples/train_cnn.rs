//! Train the LeNet-style CNN on a reduced synthetic dataset and evaluate it
//! on a held-out split.
//!
//! ```text
//! cargo run --release --example train_cnn -- [epochs]
//! ```

use pmu_gaf::data::stratified_split;
use pmu_gaf::models::ModelKind;
use pmu_gaf::pipeline::{train_model, DatasetSource, ExperimentConfig, TrainedModel};
use pmu_gaf::synth::GeneratorConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let epochs = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(30);
    let mut cfg = ExperimentConfig {
        dataset: DatasetSource::Synthetic {
            generator: GeneratorConfig::default(),
            counts: [40, 40, 25],
        },
        image_size: 32,
        ..ExperimentConfig::default()
    };
    cfg.cnn.epochs = epochs;
    cfg.cnn.batch_size = 16;

    let data = cfg.dataset.load()?;
    let split = stratified_split(&data, 2.0 / 3.0, cfg.seed)?;
    println!("train {} / test {} events, {}x{} images", split.train.len(), split.test.len(), 32, 32);

    let (model, trace) = train_model(&split.train, ModelKind::Cnn, &cfg, cfg.seed)?;
    for s in &trace {
        println!("epoch {:>3}  loss {:.4}  running train acc {:.3}", s.epoch, s.mean_loss, s.train_accuracy);
    }

    let eval = model.evaluate(&split.test)?;
    println!("\ntest accuracy {:.4} ({}/{})", eval.accuracy, eval.correct(), eval.total);
    println!("confusion [true][pred]:");
    for row in &eval.confusion {
        println!("  {row:?}");
    }

    let dir = scratch_dir()?;
    let path = dir.join("cnn.ckpt");
    model.save(&path)?;
    let back = TrainedModel::load(&path, cfg.window_s)?;
    assert_eq!(back.evaluate(&split.test)?, eval);
    println!("checkpoint {} reloads with identical predictions", path.display());
    Ok(())
}

fn scratch_dir() -> std::io::Result<std::path::PathBuf> {
    let dir = std::env::temp_dir().join("pmu_gaf_train_cnn");
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}
