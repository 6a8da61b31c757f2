//! Run the full model x split-fraction grid and print the accuracy table.
//! Pass a JSON config to override the defaults (374 synthetic events, five
//! models, three fractions); the report lands in `<out_dir>/report.json`.
//!
//! ```text
//! cargo run --release --example run_experiment -- [config.json]
//! ```

use pmu_gaf::pipeline::{run_experiment, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => ExperimentConfig::from_json_file(path.as_ref())?,
        None => ExperimentConfig::default(),
    };
    let report = run_experiment(&cfg)?;

    print!("{:<6}", "model");
    let fractions = cfg.ordered_fractions();
    for f in &fractions {
        print!("{:>10}", format!("{:.1}%", 100.0 * f));
    }
    println!();
    for model in cfg.ordered_models() {
        print!("{:<6}", model.as_str());
        for &f in &fractions {
            let cell = report.cell(model, f).expect("every cell is run");
            print!("{:>10}", format!("{:.2}%", 100.0 * cell.test_accuracy));
        }
        println!();
    }
    println!("\nreport written to {}", cfg.out_dir.join("report.json").display());
    Ok(())
}
