//! Encode one synthetic oscillation event as a GAF image and write it as PGM.
//!
//! ```text
//! cargo run --release --example gaf_encode -- [out_dir]
//! ```

use std::path::PathBuf;

use pmu_gaf::data::Label;
use pmu_gaf::gaf::{encode_event, encode_series, export_pgm, pixel_value};
use pmu_gaf::rng::{self, Purpose};
use pmu_gaf::synth::{gen_event, GeneratorConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "gaf_encode_out".into()));
    std::fs::create_dir_all(&out)?;

    // tiny series first: the 3x3 field of [0, 0.5, 1]
    let small = encode_series(&[0.0, 0.5, 1.0], 3)?;
    for i in 0..3 {
        let row: Vec<String> = small.row(i).iter().map(|v| format!("{v:+.4}")).collect();
        println!("{}", row.join("  "));
    }

    let cfg = GeneratorConfig::default();
    let mut r = rng::stream(cfg.seed, Purpose::Synth, 0);
    let event = gen_event(&cfg, Label::Oscillation, &mut r, "osc_demo");
    println!(
        "\n{}: {} samples at {} Hz ({:.0} s)",
        event.event_id(),
        event.len(),
        event.sample_rate_hz(),
        event.duration_s()
    );

    let image = encode_event(&event, 30.0, 64)?;
    let recovered = image.reconstruct_rescaled();
    let err = recovered
        .iter()
        .zip(image.rescaled())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("64x64 image, corner pixels {} {}", pixel_value(image.get(0, 0)), pixel_value(image.get(63, 63)));
    println!("diagonal reconstruction error {err:.2e}");

    let path = out.join("oscillation.pgm");
    export_pgm(&image, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}
