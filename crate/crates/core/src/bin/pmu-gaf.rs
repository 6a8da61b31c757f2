use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pmu_gaf::models::ModelKind;
use pmu_gaf::pipeline::{commands, run_experiment, DatasetSource, ExperimentConfig};
use pmu_gaf::tensor::ops::Activation;

#[derive(Parser)]
#[command(name = "pmu-gaf", version, about = "GAF-based PMU disturbance classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a labelled dataset (CSV files + manifest.json).
    Generate(Common),
    /// Encode every event of a dataset as a raw GAF image.
    Encode(Common),
    /// Convert encoded GAF images to PGM.
    ExportImages {
        #[command(flatten)]
        common: Common,
        /// gaf_manifest.json written by `encode`.
        #[arg(long)]
        gaf_manifest: PathBuf,
    },
    /// Train one model on a whole dataset and save a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: ModelKind,
    },
    /// Score a checkpoint on a dataset.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train and test every model on every split fraction.
    RunExperiment(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; omitted fields take default values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dataset manifest (overrides the config's dataset source).
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    hyper: Overrides,
}

#[derive(Args)]
struct Overrides {
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<ModelKind>>,
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    #[arg(long)]
    window_s: Option<f64>,
    #[arg(long)]
    image_size: Option<usize>,
    #[arg(long)]
    cnn_batch_size: Option<usize>,
    #[arg(long)]
    cnn_epochs: Option<usize>,
    #[arg(long)]
    cnn_lr: Option<f64>,
    #[arg(long)]
    cnn_momentum: Option<f64>,
    #[arg(long)]
    cnn_conv1_channels: Option<usize>,
    #[arg(long, value_parser = parse_activation)]
    cnn_activation: Option<Activation>,
    #[arg(long)]
    rnn_hidden: Option<usize>,
    #[arg(long)]
    rnn_batch_size: Option<usize>,
    #[arg(long)]
    rnn_epochs: Option<usize>,
    #[arg(long)]
    rnn_lr: Option<f64>,
    #[arg(long)]
    lstm_hidden: Option<usize>,
    #[arg(long)]
    lstm_batch_size: Option<usize>,
    #[arg(long)]
    lstm_epochs: Option<usize>,
    #[arg(long)]
    lstm_lr: Option<f64>,
    #[arg(long)]
    svm_c: Option<f64>,
    #[arg(long)]
    svm_gamma: Option<f64>,
    #[arg(long)]
    dt_max_depth: Option<usize>,
    #[arg(long)]
    dt_min_samples_split: Option<usize>,
    #[arg(long)]
    dt_min_samples_leaf: Option<usize>,
    /// Also write PGM images during `run-experiment`.
    #[arg(long)]
    export_images: bool,
}

fn parse_activation(s: &str) -> Result<Activation, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

macro_rules! set {
    ($($src:expr => $dst:expr),* $(,)?) => {
        $(if let Some(v) = $src { $dst = v; })*
    };
}

impl Common {
    fn config(&self) -> pmu_gaf::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None => ExperimentConfig::default(),
        };
        let h = &self.hyper;
        set! {
            self.seed => cfg.seed,
            self.out.clone() => cfg.out_dir,
            h.models.clone() => cfg.models,
            h.fractions.clone() => cfg.fractions,
            h.window_s => cfg.window_s,
            h.image_size => cfg.image_size,
            h.cnn_batch_size => cfg.cnn.batch_size,
            h.cnn_epochs => cfg.cnn.epochs,
            h.cnn_lr => cfg.cnn.learning_rate,
            h.cnn_momentum => cfg.cnn.momentum,
            h.cnn_conv1_channels => cfg.cnn.conv1_channels,
            h.cnn_activation => cfg.cnn.activation,
            h.rnn_hidden => cfg.rnn.hidden,
            h.rnn_batch_size => cfg.rnn.batch_size,
            h.rnn_epochs => cfg.rnn.epochs,
            h.rnn_lr => cfg.rnn.learning_rate,
            h.lstm_hidden => cfg.lstm.hidden,
            h.lstm_batch_size => cfg.lstm.batch_size,
            h.lstm_epochs => cfg.lstm.epochs,
            h.lstm_lr => cfg.lstm.learning_rate,
            h.svm_c => cfg.svm.c,
            h.svm_gamma => cfg.svm.gamma,
            h.dt_min_samples_split => cfg.dt.min_samples_split,
            h.dt_min_samples_leaf => cfg.dt.min_samples_leaf,
        }
        if h.dt_max_depth.is_some() {
            cfg.dt.max_depth = h.dt_max_depth;
        }
        if let Some(path) = &self.manifest {
            cfg.dataset = DatasetSource::Manifest { path: path.clone() };
        }
        cfg.export_images |= h.export_images;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(command: Command) -> pmu_gaf::Result<()> {
    match command {
        Command::Generate(common) => {
            let cfg = common.config()?;
            let DatasetSource::Synthetic { mut generator, counts } = cfg.dataset else {
                return Err(pmu_gaf::Error::InvalidArgument(
                    "generate needs a synthetic dataset source".into(),
                ));
            };
            if let Some(seed) = common.seed {
                generator.seed = seed;
            }
            let manifest = commands::generate(&generator, counts, &cfg.out_dir)?;
            println!("wrote {}", manifest.display());
        }
        Command::Encode(common) => {
            let cfg = common.config()?;
            let manifest = commands::encode(&cfg, &cfg.out_dir)?;
            println!("wrote {}", manifest.display());
        }
        Command::ExportImages { common, gaf_manifest } => {
            let cfg = common.config()?;
            let n = commands::export_images(&gaf_manifest, &cfg.out_dir)?;
            println!("wrote {n} images to {}", cfg.out_dir.display());
        }
        Command::Train { common, model } => {
            let cfg = common.config()?;
            let s = commands::train(&cfg, model, &cfg.out_dir)?;
            println!("{model}: train accuracy {:.4} on {} events", s.train.accuracy, s.events);
        }
        Command::Evaluate { common, checkpoint } => {
            let cfg = common.config()?;
            let e = commands::evaluate(&cfg, &checkpoint, &cfg.out_dir)?;
            println!("accuracy {:.4} ({}/{})", e.accuracy, e.correct(), e.total);
        }
        Command::RunExperiment(common) => {
            let cfg = common.config()?;
            let report = run_experiment(&cfg)?;
            for c in &report.cells {
                println!(
                    "{:<5} {:.4}  train {:.4}  test {:.4}",
                    c.model.as_str(),
                    c.fraction,
                    c.train_accuracy,
                    c.test_accuracy
                );
            }
            println!("wrote {}", cfg.out_dir.join("report.json").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
