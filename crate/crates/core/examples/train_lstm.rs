//! Train the vanilla RNN and the LSTM side by side, treating each GAF image
//! as a sequence of rows, and compare how quickly they fit.
//!
//! ```text
//! cargo run --release --example train_lstm -- [epochs]
//! ```

use pmu_gaf::data::stratified_split;
use pmu_gaf::models::ModelKind;
use pmu_gaf::pipeline::{epochs_to_threshold, train_model, DatasetSource, ExperimentConfig};
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
    cfg.rnn.epochs = epochs;
    cfg.rnn.batch_size = 16;
    cfg.lstm.epochs = epochs;
    cfg.lstm.batch_size = 16;

    let data = cfg.dataset.load()?;
    let split = stratified_split(&data, 2.0 / 3.0, cfg.seed)?;

    for kind in [ModelKind::Rnn, ModelKind::Lstm] {
        let (model, trace) = train_model(&split.train, kind, &cfg, cfg.seed)?;
        let last = trace.last().expect("at least one epoch");
        let eval = model.evaluate(&split.test)?;
        let reached = epochs_to_threshold(&trace, 0.95)
            .map(|e| e.to_string())
            .unwrap_or_else(|| "never".into());
        println!(
            "{kind:<5} final loss {:.4}, train acc {:.3}, 95% train acc at epoch {reached}, test acc {:.4}",
            last.mean_loss, last.train_accuracy, eval.accuracy
        );
    }
    Ok(())
}
