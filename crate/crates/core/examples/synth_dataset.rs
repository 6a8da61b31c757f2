//! Generate the reference synthetic dataset, split it, and write it to disk.
//!
//! ```text
//! cargo run --release --example synth_dataset -- [out_dir]
//! ```

use std::path::PathBuf;

use pmu_gaf::data::{load_events, stratified_split, Label};
use pmu_gaf::pipeline::commands;
use pmu_gaf::synth::{build_dataset, reference_counts, GeneratorConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synth_out".into()));
    let cfg = GeneratorConfig::default();
    let data = build_dataset(&cfg, &reference_counts())?;
    println!("{} events", data.len());
    for (label, n) in data.class_counts() {
        println!("  {:<16} {n}", label.as_str());
    }

    for fraction in [2.0 / 3.0, 0.75, 0.8] {
        let split = stratified_split(&data, fraction, 0)?;
        let per_class: Vec<String> = Label::ALL
            .iter()
            .map(|&l| format!("{}/{}", split.train.count(l), split.test.count(l)))
            .collect();
        println!(
            "fraction {fraction:.3}: train {} test {} (per class train/test {})",
            split.train.len(),
            split.test.len(),
            per_class.join(", ")
        );
    }

    let manifest = commands::generate(&cfg, [142, 145, 87], &out)?;
    let back = load_events(&manifest)?;
    assert_eq!(back, data);
    println!("wrote {} and {} CSVs; reload matches", manifest.display(), back.len());
    Ok(())
}
